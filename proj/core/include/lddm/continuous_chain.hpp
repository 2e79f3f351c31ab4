#pragma once

#include "lddm/rng.hpp"
#include "lddm/schedules.hpp"
#include "lddm/sequences.hpp"

namespace lddm {

// y_t = alpha_bar[t] y0 + sigma_bar[t] eps, eps ~ N(0, I).
LatentState gauss_forward_sample(const LatentState& y0, int t,
                                 const ContinuousSchedule& cs, RngStream& rng);

// One ancestral reverse step t -> s using the closed-form bridge around the
// predicted clean latent.
LatentState gauss_ancestral_step(const LatentState& yt, const LatentState& y0_pred,
                                 int s, int t, const ContinuousSchedule& cs, RngStream& rng);

// DDIM-style step: eta = 1 matches the ancestral kernel in distribution,
// eta = 0 is deterministic and noise-direction preserving.
LatentState gauss_ddim_step(const LatentState& yt, const LatentState& y0_pred,
                            int s, int t, const ContinuousSchedule& cs, double eta,
                            RngStream& rng);

// w_t * ||y0 - y0_pred||^2 with w_t from elbo_weight_continuous or 1.
double gauss_loss_term(const LatentState& y0, const LatentState& y0_pred, int t,
                       const ContinuousSchedule& cs, WeightMode weight_mode);

}  // namespace lddm
