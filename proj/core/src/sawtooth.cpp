#include "lddm/sawtooth.hpp"

#include <cmath>
#include <fstream>

namespace lddm {

double sawtooth_prob(int i, double y, const SawtoothConfig& cfg) {
  require(i >= 1 && i <= cfg.seq_len, "sawtooth_prob: position out of range");
  double phase = cfg.periods * (static_cast<double>(i - 1) / cfg.seq_len + y);
  // value - floor(value) keeps the fractional part in [0,1) for negative phases.
  double frac = phase - std::floor(phase);
  double tri = 1.0 - std::abs(2.0 * frac - 1.0);
  return cfg.floor + (1.0 - 2.0 * cfg.floor) * tri;
}

SawtoothBatch sample_sawtooth_batch(int n, const SawtoothConfig& cfg, RngStream& rng) {
  require(n >= 1, "sample_sawtooth_batch: n must be >= 1");
  cfg.validate();
  SawtoothBatch out;
  out.bits.resize(n, cfg.seq_len);
  out.shifts.resize(n);
  for (int r = 0; r < n; ++r) {
    double y = rng.uniform();
    out.shifts[r] = y;
    for (int i = 0; i < cfg.seq_len; ++i) {
      out.bits(r, i) = rng.uniform() < sawtooth_prob(i + 1, y, cfg) ? 1 : 0;
    }
  }
  return out;
}

void write_bit_matrix(const std::string& path, const RowMatrixXi& bits) {
  std::ofstream f(path);
  if (!f) throw invalid_argument("write_bit_matrix: cannot open " + path);
  f << bits.rows() << " " << bits.cols() << "\n";
  for (Eigen::Index r = 0; r < bits.rows(); ++r) {
    for (Eigen::Index c = 0; c < bits.cols(); ++c) {
      f << bits(r, c) << (c + 1 == bits.cols() ? '\n' : ' ');
    }
  }
}

RowMatrixXi read_bit_matrix(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw invalid_argument("read_bit_matrix: cannot open " + path);
  Eigen::Index n = 0, s = 0;
  f >> n >> s;
  if (!f || n < 1 || s < 1) throw invalid_argument("read_bit_matrix: bad header in " + path);
  RowMatrixXi bits(n, s);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < s; ++c) {
      int v = 0;
      f >> v;
      if (!f) throw invalid_argument("read_bit_matrix: truncated file " + path);
      bits(r, c) = v;
    }
  }
  return bits;
}

}  // namespace lddm
