#include "lddm/schedules.hpp"

#include <cmath>

namespace lddm {

MaskSchedule build_mask_schedule(int T, MaskKind kind) {
  require(T >= 1, "build_mask_schedule: T must be >= 1");
  require(kind == MaskKind::kLinear, "build_mask_schedule: unknown kind");
  MaskSchedule ms;
  ms.T = T;
  ms.gamma_bar.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    ms.gamma_bar[t] = 1.0 - static_cast<double>(t) / T;
  }
  ms.gamma_bar[T] = 0.0;
  return ms;
}

ContinuousSchedule build_continuous_schedule(int T, ContinuousKind kind,
                                             double s_offset) {
  require(T >= 1, "build_continuous_schedule: T must be >= 1");
  if (kind == ContinuousKind::kVpCosine) {
    require(s_offset > 0.0, "build_continuous_schedule: s_offset must be > 0");
  }
  ContinuousSchedule cs;
  cs.T = T;
  cs.kind = kind;
  cs.s_offset = (kind == ContinuousKind::kVpCosine) ? s_offset : 0.0;
  cs.alpha_bar.resize(T + 1);
  cs.sigma_bar.resize(T + 1);
  constexpr double kHalfPi = 1.5707963267948966;
  for (int t = 0; t <= T; ++t) {
    double tau = static_cast<double>(t) / T;
    double a2;
    switch (kind) {
      case ContinuousKind::kVpLinear:
        a2 = 1.0 - tau;
        break;
      case ContinuousKind::kVpCosine: {
        double c = std::cos((tau + s_offset) / (1.0 + s_offset) * kHalfPi);
        a2 = c * c;
        break;
      }
      default:
        throw invalid_argument("build_continuous_schedule: unknown kind");
    }
    double a = std::sqrt(std::max(a2, 0.0));
    a = std::min(std::max(a, 1e-12), 1.0);
    if (t == 0) a = 1.0;
    cs.alpha_bar[t] = a;
    cs.sigma_bar[t] = (t == 0) ? 0.0 : std::sqrt(std::max(1.0 - a * a, 0.0));
  }
  return cs;
}

BridgeCoefficients bridge_coefficients(const ContinuousSchedule& cs, int s, int t) {
  require(0 <= s && t <= cs.T, "bridge_coefficients: steps out of range");
  if (s >= t) throw invalid_argument("bridge_coefficients: requires s < t");
  double abar_s = cs.alpha_bar[s];
  double abar_t = cs.alpha_bar[t];
  if (abar_s <= 0.0) {
    throw degenerate_error("bridge_coefficients: alpha_bar[s] = 0");
  }
  double sbar_s2 = cs.sigma_bar[s] * cs.sigma_bar[s];
  double sbar_t2 = cs.sigma_bar[t] * cs.sigma_bar[t];
  double a_ts = abar_t / abar_s;
  double s_ts2 = sbar_t2 - a_ts * a_ts * sbar_s2;

  BridgeCoefficients bc;
  if (s == 0) {
    // sigma_bar[0] = 0: the posterior collapses onto the clean point.
    bc.mu_coef_yt = 0.0;
    bc.mu_coef_y0 = abar_s;
    bc.var = 0.0;
    return bc;
  }
  bc.mu_coef_yt = a_ts * sbar_s2 / sbar_t2;
  bc.mu_coef_y0 = abar_s * s_ts2 / sbar_t2;
  bc.var = std::max(s_ts2 * sbar_s2 / sbar_t2, 0.0);
  return bc;
}

double elbo_weight_discrete(const MaskSchedule& ms, int t) {
  require(1 <= t && t <= ms.T, "elbo_weight_discrete: t out of range");
  double gt = ms.gamma_bar[t];
  double gtm1 = ms.gamma_bar[t - 1];
  if (gt >= 1.0) throw degenerate_error("elbo_weight_discrete: gamma_bar[t] = 1");
  return (gt - gtm1) / (1.0 - gt);
}

double elbo_weight_continuous(const ContinuousSchedule& cs, int t) {
  require(1 <= t && t <= cs.T, "elbo_weight_continuous: t out of range");
  double sbar_prev = cs.sigma_bar[t - 1];
  if (sbar_prev <= 0.0) {
    throw degenerate_error("elbo_weight_continuous: sigma_bar[t-1] = 0");
  }
  double abar_prev = cs.alpha_bar[t - 1];
  double sbar_prev2 = sbar_prev * sbar_prev;
  double sbar_t2 = cs.sigma_bar[t] * cs.sigma_bar[t];
  double a_ts = cs.alpha_bar[t] / abar_prev;
  double s_ts2 = sbar_t2 - a_ts * a_ts * sbar_prev2;
  return abar_prev * abar_prev * s_ts2 / (2.0 * sbar_prev2 * sbar_t2);
}

double data_weight(const MaskSchedule& ms, int t, WeightMode mode) {
  return mode == WeightMode::kElbo ? elbo_weight_discrete(ms, t) : -1.0;
}

double latent_weight(const ContinuousSchedule& cs, int t, WeightMode mode) {
  return mode == WeightMode::kElbo ? elbo_weight_continuous(cs, t) : 1.0;
}

}  // namespace lddm
