#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lddm/rng.hpp"
#include "lddm/sequences.hpp"

namespace lddm {

struct MetricReport {
  std::string run_id;
  std::string model;
  int budget = 0;
  long nfe = 0;
  double swd = 0.0;
  double entropy = 0.0;
  double nelbo_ppl = 0.0;
  double wall_seconds = 0.0;
};

// SWD_1 between the empirical measures of a and b: directions u ~ N(0, I_d)
// (unnormalized), 1-D W1 via sorted projections, averaged over n_dirs draws.
double sliced_wasserstein(const RowMatrixXd& a, const RowMatrixXd& b, int n_dirs, RngStream& rng);

// Mean per-position entropy (nats) of the empirical token frequencies,
// convention 0 log 0 = 0. Bounded by ln K.
double positional_entropy(const RowMatrixXi& samples, int K);

// exp(mean per-token data-channel NELBO); `nelbo_draw` returns one Monte
// Carlo draw of the full NELBO sum (in nats) for a clean sequence.
double validation_ppl_bound(
    const std::function<double(const TokenSequence&, RngStream&)>& nelbo_draw,
    const std::vector<TokenSequence>& dataset, int mc_draws, RngStream& rng);

// Token matrices enter SWD as raw token-id reals.
RowMatrixXd tokens_as_reals(const RowMatrixXi& tokens);

// Aggregate externally computed per-token log-probabilities (teacher-model
// scoring happens outside this artifact): exp(-mean).
double generative_ppl_from_logprobs(const std::string& path);

// Metric CSV rows: run_id,model,budget,nfe,swd,entropy,nelbo_ppl,wall_seconds.
void append_metrics_csv(const std::string& path, const MetricReport& row);

}  // namespace lddm
