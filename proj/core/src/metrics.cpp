#include "lddm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "lddm/errors.hpp"

namespace lddm {

double sliced_wasserstein(const RowMatrixXd& a, const RowMatrixXd& b, int n_dirs, RngStream& rng) {
  require(a.cols() == b.cols(), "sliced_wasserstein: dimension mismatch");
  require(a.rows() == b.rows(), "sliced_wasserstein: sample count mismatch");
  require(n_dirs >= 1, "sliced_wasserstein: need at least one direction");
  Eigen::Index n = a.rows(), d = a.cols();
  double acc = 0.0;
  std::vector<double> pa(n), pb(n);
  for (int k = 0; k < n_dirs; ++k) {
    RngStream dir_rng = rng.substream(k);
    Eigen::VectorXd u(d);
    for (Eigen::Index j = 0; j < d; ++j) u[j] = dir_rng.normal();
    Eigen::VectorXd proj_a = a * u;
    Eigen::VectorXd proj_b = b * u;
    for (Eigen::Index i = 0; i < n; ++i) {
      pa[i] = proj_a[i];
      pb[i] = proj_b[i];
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double w1 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) w1 += std::abs(pa[i] - pb[i]);
    acc += w1 / static_cast<double>(n);
  }
  return acc / n_dirs;
}

double positional_entropy(const RowMatrixXi& samples, int K) {
  require(samples.rows() >= 1, "positional_entropy: empty sample set");
  require(K >= 2, "positional_entropy: bad vocab");
  Eigen::Index m = samples.rows(), S = samples.cols();
  double total = 0.0;
  std::vector<double> counts(K);
  for (Eigen::Index i = 0; i < S; ++i) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (Eigen::Index r = 0; r < m; ++r) {
      int v = samples(r, i);
      require(v >= 0 && v < K, "positional_entropy: token out of range");
      counts[v] += 1.0;
    }
    double h = 0.0;
    for (int k = 0; k < K; ++k) {
      double p = counts[k] / static_cast<double>(m);
      if (p > 0.0) h -= p * std::log(p);
    }
    total += h;
  }
  return total / static_cast<double>(S);
}

double validation_ppl_bound(
    const std::function<double(const TokenSequence&, RngStream&)>& nelbo_draw,
    const std::vector<TokenSequence>& dataset, int mc_draws, RngStream& rng) {
  require(!dataset.empty(), "validation_ppl_bound: empty dataset");
  require(mc_draws >= 1, "validation_ppl_bound: mc_draws must be >= 1");
  double total_nats = 0.0;
  long total_tokens = 0;
  for (size_t m = 0; m < dataset.size(); ++m) {
    RngStream seq_rng = rng.substream(m);
    double acc = 0.0;
    for (int k = 0; k < mc_draws; ++k) acc += nelbo_draw(dataset[m], seq_rng);
    total_nats += acc / mc_draws;
    total_tokens += dataset[m].size();
  }
  return std::exp(total_nats / static_cast<double>(total_tokens));
}

RowMatrixXd tokens_as_reals(const RowMatrixXi& tokens) {
  return tokens.cast<double>();
}

double generative_ppl_from_logprobs(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw invalid_argument("generative_ppl_from_logprobs: cannot open " + path);
  double acc = 0.0;
  long n = 0;
  double lp;
  while (f >> lp) {
    acc += lp;
    ++n;
  }
  require(n > 0, "generative_ppl_from_logprobs: no values in " + path);
  return std::exp(-acc / static_cast<double>(n));
}

void append_metrics_csv(const std::string& path, const MetricReport& row) {
  bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream f(path, std::ios::app);
  if (!f) throw invalid_argument("append_metrics_csv: cannot open " + path);
  if (fresh) f << "run_id,model,budget,nfe,swd,entropy,nelbo_ppl,wall_seconds\n";
  f << row.run_id << ',' << row.model << ',' << row.budget << ',' << row.nfe << ',' << row.swd
    << ',' << row.entropy << ',' << row.nelbo_ppl << ',' << row.wall_seconds << '\n';
}

}  // namespace lddm
