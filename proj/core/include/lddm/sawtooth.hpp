#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lddm/rng.hpp"
#include "lddm/sequences.hpp"

namespace lddm {

// Binary sawtooth benchmark: bits are independent Bernoulli given a shared
// uniform shift y, with per-position rate given by a 1-periodic ramp.
struct SawtoothConfig {
  int seq_len = 128;
  int periods = 2;
  double floor = 0.01;  // minimum probability of the wave

  void validate() const {
    require(seq_len >= 1, "SawtoothConfig: seq_len must be >= 1");
    require(periods >= 1, "SawtoothConfig: periods must be >= 1");
    require(floor >= 0.0 && floor <= 0.5, "SawtoothConfig: floor must lie in [0, 0.5]");
  }
};

// P(bit = 1 at position i | shift y), i in 1..S. 1-periodic in y.
double sawtooth_prob(int i, double y, const SawtoothConfig& cfg);

struct SawtoothBatch {
  RowMatrixXi bits;            // n x S in {0,1}
  std::vector<double> shifts;  // n draws of y ~ U[0,1)
};

// Fresh draws on every call: y uniform, bits Bernoulli(sawtooth_prob(i, y)).
SawtoothBatch sample_sawtooth_batch(int n, const SawtoothConfig& cfg, RngStream& rng);

// Binary-matrix dump with a one-line "n S" header; used for reproducible
// evaluation splits.
void write_bit_matrix(const std::string& path, const RowMatrixXi& bits);
RowMatrixXi read_bit_matrix(const std::string& path);

}  // namespace lddm
