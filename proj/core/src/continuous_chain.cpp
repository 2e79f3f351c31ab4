#include "lddm/continuous_chain.hpp"

#include <cmath>

namespace lddm {

namespace {

RowMatrixXd normal_like(const RowMatrixXd& shape_ref, RngStream& rng) {
  RowMatrixXd eps(shape_ref.rows(), shape_ref.cols());
  for (Eigen::Index r = 0; r < eps.rows(); ++r) {
    for (Eigen::Index c = 0; c < eps.cols(); ++c) eps(r, c) = rng.normal();
  }
  return eps;
}

}  // namespace

LatentState gauss_forward_sample(const LatentState& y0, int t,
                                 const ContinuousSchedule& cs, RngStream& rng) {
  require(t >= 0 && t <= cs.T, "gauss_forward_sample: t out of range");
  LatentState yt = y0;
  double a = cs.alpha_bar[t];
  double s = cs.sigma_bar[t];
  yt.blocks = a * y0.blocks + s * normal_like(y0.blocks, rng);
  return yt;
}

LatentState gauss_ancestral_step(const LatentState& yt, const LatentState& y0_pred,
                                 int s, int t, const ContinuousSchedule& cs, RngStream& rng) {
  require(yt.blocks.rows() == y0_pred.blocks.rows() && yt.blocks.cols() == y0_pred.blocks.cols(),
          "gauss_ancestral_step: shape mismatch");
  BridgeCoefficients bc = bridge_coefficients(cs, s, t);
  LatentState ys = yt;
  ys.blocks = bc.mu_coef_yt * yt.blocks + bc.mu_coef_y0 * y0_pred.blocks;
  if (bc.var > 0.0) {
    ys.blocks += std::sqrt(bc.var) * normal_like(yt.blocks, rng);
  }
  return ys;
}

LatentState gauss_ddim_step(const LatentState& yt, const LatentState& y0_pred,
                            int s, int t, const ContinuousSchedule& cs, double eta,
                            RngStream& rng) {
  require(yt.blocks.rows() == y0_pred.blocks.rows() && yt.blocks.cols() == y0_pred.blocks.cols(),
          "gauss_ddim_step: shape mismatch");
  require(eta >= 0.0 && eta <= 1.0, "gauss_ddim_step: eta must lie in [0,1]");
  BridgeCoefficients bc = bridge_coefficients(cs, s, t);
  double abar_s = cs.alpha_bar[s];
  double abar_t = cs.alpha_bar[t];
  double sbar_s2 = cs.sigma_bar[s] * cs.sigma_bar[s];
  double sbar_t = cs.sigma_bar[t];
  if (sbar_t <= 0.0) throw degenerate_error("gauss_ddim_step: sigma_bar[t] = 0");
  double noise_var = eta * eta * bc.var;
  double dir_coef2 = sbar_s2 - noise_var;
  require(dir_coef2 >= -1e-15, "gauss_ddim_step: sigma_bar[s]^2 < eta^2 var");
  dir_coef2 = std::max(dir_coef2, 0.0);

  LatentState ys = yt;
  // eps_hat reconstructs the forward noise direction from the prediction.
  RowMatrixXd eps_hat = (yt.blocks - abar_t * y0_pred.blocks) / sbar_t;
  ys.blocks = abar_s * y0_pred.blocks + std::sqrt(dir_coef2) * eps_hat;
  if (noise_var > 0.0) {
    ys.blocks += std::sqrt(noise_var) * normal_like(yt.blocks, rng);
  }
  return ys;
}

double gauss_loss_term(const LatentState& y0, const LatentState& y0_pred, int t,
                       const ContinuousSchedule& cs, WeightMode weight_mode) {
  require(y0.blocks.rows() == y0_pred.blocks.rows() && y0.blocks.cols() == y0_pred.blocks.cols(),
          "gauss_loss_term: shape mismatch");
  double w = latent_weight(cs, t, weight_mode);
  return w * (y0.blocks - y0_pred.blocks).squaredNorm();
}

}  // namespace lddm
