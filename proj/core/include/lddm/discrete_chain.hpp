#pragma once

#include <atomic>
#include <cstdint>

#include "lddm/rng.hpp"
#include "lddm/schedules.hpp"
#include "lddm/sequences.hpp"

namespace lddm {

// Count of log-probabilities floored at kLogProbFloor inside mask_nelbo_term.
// Early-training mispredictions bump this instead of raising.
std::atomic<std::uint64_t>& floored_logprob_count();

inline constexpr double kLogProbFloor = 1e-12;

// Keep each position with probability gamma_bar[t], else replace by the mask.
// x0 must be mask-free.
TokenSequence mask_forward_sample(const TokenSequence& x0, int t,
                                  const MaskSchedule& ms, RngStream& rng);

// q(x_s^i | x_t^i, x0-prediction) for a jump s < t. Dirac at x_t^i when it is
// not masked; otherwise ((1-gb_s) mask + (gb_s-gb_t) x0_prob) / (1-gb_t).
Eigen::VectorXd mask_bridge_distribution(int xt_i, const Eigen::VectorXd& x0_prob_i,
                                         int s, int t, const MaskSchedule& ms);

// Per-position independent draw from the bridge; unmasked positions carry over.
TokenSequence mask_reverse_step(const TokenSequence& xt, const CategoricalField& x0_probs,
                                int s, int t, const MaskSchedule& ms, RngStream& rng);

// Contribution of one (x0, x_t, t) draw to the discrete NELBO:
//   sum over masked positions of w_t * ln <x0_probs_i, onehot(x0_i)>,
// with w_t the ELBO weight (negative) or -1 in unit mode. Predicted
// probabilities are floored at kLogProbFloor before the log.
double mask_nelbo_term(const TokenSequence& x0, const TokenSequence& xt,
                       const CategoricalField& x0_probs, int t,
                       const MaskSchedule& ms, WeightMode weight_mode);

// Inverse-CDF draw from one probability row using a single uniform.
int sample_categorical(const Eigen::VectorXd& probs, double u);

}  // namespace lddm
