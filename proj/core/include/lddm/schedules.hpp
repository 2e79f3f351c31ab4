#pragma once

#include <Eigen/Core>

#include "lddm/errors.hpp"

namespace lddm {

// Loss-weight selection shared by both channels: the per-step ELBO weight or
// a constant unit weight.
enum class WeightMode { kElbo, kUnit };

// Survival products gamma_bar[0..T] of the masked forward chain.
// gamma_bar[0] = 1, gamma_bar[T] = 0, non-increasing.
struct MaskSchedule {
  int T = 0;
  Eigen::VectorXd gamma_bar;
};

enum class ContinuousKind { kVpLinear, kVpCosine };

// Signal/noise products alpha_bar[t], sigma_bar[t] of the Gaussian chain,
// precomputed on the integer grid 0..T. Variance preserving:
// alpha_bar^2 + sigma_bar^2 = 1.
struct ContinuousSchedule {
  int T = 0;
  ContinuousKind kind = ContinuousKind::kVpLinear;
  double s_offset = 0.0;
  Eigen::VectorXd alpha_bar;
  Eigen::VectorXd sigma_bar;
};

// Posterior of y_s given (y_t, y_0) for a jump s -> t:
//   mean = mu_coef_yt * y_t + mu_coef_y0 * y_0,  covariance = var * I.
struct BridgeCoefficients {
  double mu_coef_yt = 0.0;
  double mu_coef_y0 = 0.0;
  double var = 0.0;
};

enum class MaskKind { kLinear };

// gamma_bar[t] = 1 - t/T.
MaskSchedule build_mask_schedule(int T, MaskKind kind = MaskKind::kLinear);

// alpha_bar^2 = 1 - tau (vp_linear) or cos^2(((tau+s)/(1+s)) pi/2) (vp_cosine),
// tau = t/T; sigma_bar^2 = 1 - alpha_bar^2. The cosine alpha_bar is clamped to
// [1e-12, 1] before deriving sigma_bar so cancellation near tau = 1 cannot
// produce negative variances.
ContinuousSchedule build_continuous_schedule(int T, ContinuousKind kind,
                                             double s_offset = 0.008);

// Closed-form coefficients of q(y_s | y_t, y_0) for 0 <= s < t <= T.
BridgeCoefficients bridge_coefficients(const ContinuousSchedule& cs, int s, int t);

// lambda^X_t = (gamma_bar[t] - gamma_bar[t-1]) / (1 - gamma_bar[t]).
// Negative for decreasing schedules; equals -1/t on the linear schedule.
double elbo_weight_discrete(const MaskSchedule& ms, int t);

// lambda^Y_t = alpha_bar[t-1]^2 sigma_{t|t-1}^2 / (2 sigma_bar[t-1]^2 sigma_bar[t]^2).
// Defined for t >= 2 (sigma_bar[0] = 0).
double elbo_weight_continuous(const ContinuousSchedule& cs, int t);

// Mode-dispatching helpers used by the loss builders. Unit mode is -1 for the
// discrete channel (so both modes yield a nonnegative data term) and +1 for
// the continuous one.
double data_weight(const MaskSchedule& ms, int t, WeightMode mode);
double latent_weight(const ContinuousSchedule& cs, int t, WeightMode mode);

}  // namespace lddm
