#include "lddm/discrete_chain.hpp"

#include <cmath>

namespace lddm {

std::atomic<std::uint64_t>& floored_logprob_count() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}

int sample_categorical(const Eigen::VectorXd& probs, double u) {
  double acc = 0.0;
  int last = static_cast<int>(probs.size()) - 1;
  for (int k = 0; k <= last; ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return last;
}

TokenSequence mask_forward_sample(const TokenSequence& x0, int t,
                                  const MaskSchedule& ms, RngStream& rng) {
  require(t >= 0 && t <= ms.T, "mask_forward_sample: t out of range");
  if (x0.has_mask()) {
    throw invalid_argument("mask_forward_sample: x0 already contains mask tokens");
  }
  double keep = ms.gamma_bar[t];
  TokenSequence xt = x0;
  RngStream draw = rng.fork();
  for (int i = 0; i < xt.size(); ++i) {
    if (draw.substream(i).uniform() >= keep) xt.tokens[i] = x0.mask_id();
  }
  return xt;
}

Eigen::VectorXd mask_bridge_distribution(int xt_i, const Eigen::VectorXd& x0_prob_i,
                                         int s, int t, const MaskSchedule& ms) {
  require(0 <= s && s < t && t <= ms.T, "mask_bridge_distribution: requires 0 <= s < t <= T");
  int K = static_cast<int>(x0_prob_i.size());
  int mask = K - 1;
  require(xt_i >= 0 && xt_i < K, "mask_bridge_distribution: token out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(K);
  if (xt_i != mask) {
    out[xt_i] = 1.0;
    return out;
  }
  double gb_s = ms.gamma_bar[s];
  double gb_t = ms.gamma_bar[t];
  if (gb_t >= 1.0) {
    throw degenerate_error("mask_bridge_distribution: gamma_bar[t] = 1");
  }
  double stay = (1.0 - gb_s) / (1.0 - gb_t);
  double reveal = (gb_s - gb_t) / (1.0 - gb_t);
  out = reveal * x0_prob_i;
  out[mask] = stay;
  return out;
}

TokenSequence mask_reverse_step(const TokenSequence& xt, const CategoricalField& x0_probs,
                                int s, int t, const MaskSchedule& ms, RngStream& rng) {
  require(x0_probs.seq_len() == xt.size(), "mask_reverse_step: shape mismatch");
  require(x0_probs.vocab() == xt.vocab, "mask_reverse_step: vocab mismatch");
  TokenSequence xs = xt;
  RngStream draw = rng.fork();
  for (int i = 0; i < xt.size(); ++i) {
    if (xt.tokens[i] != xt.mask_id()) continue;  // carry-over
    Eigen::VectorXd bridge =
        mask_bridge_distribution(xt.tokens[i], x0_probs.probs.row(i).transpose(), s, t, ms);
    xs.tokens[i] = sample_categorical(bridge, draw.substream(i).uniform());
  }
  return xs;
}

double mask_nelbo_term(const TokenSequence& x0, const TokenSequence& xt,
                       const CategoricalField& x0_probs, int t,
                       const MaskSchedule& ms, WeightMode weight_mode) {
  require(x0.size() == xt.size() && x0.vocab == xt.vocab, "mask_nelbo_term: shape mismatch");
  require(x0_probs.seq_len() == x0.size() && x0_probs.vocab() == x0.vocab,
          "mask_nelbo_term: probs shape mismatch");
  double w = data_weight(ms, t, weight_mode);
  double acc = 0.0;
  for (int i = 0; i < x0.size(); ++i) {
    if (xt.tokens[i] != xt.mask_id()) {
      require(xt.tokens[i] == x0.tokens[i],
              "mask_nelbo_term: xt inconsistent with x0 at an unmasked position");
      continue;
    }
    double p = x0_probs.probs(i, x0.tokens[i]);
    if (p < kLogProbFloor) {
      p = kLogProbFloor;
      floored_logprob_count().fetch_add(1, std::memory_order_relaxed);
    }
    acc += w * std::log(p);
  }
  return acc;
}

}  // namespace lddm
