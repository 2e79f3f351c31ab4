#pragma once

#include <Eigen/Core>
#include <vector>

#include "lddm/errors.hpp"

namespace lddm {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXi = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Length-S sequence over {0..K-1}; the mask state is the last id K-1.
struct TokenSequence {
  std::vector<int> tokens;
  int vocab = 2;  // K, mask included

  TokenSequence() = default;
  TokenSequence(std::vector<int> toks, int K) : tokens(std::move(toks)), vocab(K) {
    require(vocab >= 2, "TokenSequence: vocab must be >= 2");
    for (int v : tokens) {
      require(v >= 0 && v < vocab, "TokenSequence: token out of range");
    }
  }

  int mask_id() const { return vocab - 1; }
  int size() const { return static_cast<int>(tokens.size()); }

  bool has_mask() const {
    for (int v : tokens) {
      if (v == mask_id()) return true;
    }
    return false;
  }
  int mask_count() const {
    int n = 0;
    for (int v : tokens) n += (v == mask_id());
    return n;
  }
};

// Batch of token sequences, one row per sequence.
struct TokenBatch {
  RowMatrixXi tokens;  // B x S
  int vocab = 2;

  int batch() const { return static_cast<int>(tokens.rows()); }
  int seq_len() const { return static_cast<int>(tokens.cols()); }
  int mask_id() const { return vocab - 1; }

  TokenSequence row(int b) const {
    std::vector<int> v(tokens.cols());
    for (int i = 0; i < tokens.cols(); ++i) v[i] = tokens(b, i);
    return TokenSequence(std::move(v), vocab);
  }
};

// Per-position categoricals over K, rows summing to 1. Denoiser heads place
// zero mass on the mask column.
struct CategoricalField {
  RowMatrixXd probs;  // S x K

  int seq_len() const { return static_cast<int>(probs.rows()); }
  int vocab() const { return static_cast<int>(probs.cols()); }
};

// S' blocks of d' reals; flat dimension d = S' * d'. One row per block.
struct LatentState {
  RowMatrixXd blocks;  // S' x d'

  LatentState() = default;
  LatentState(int s_prime, int d_prime) : blocks(RowMatrixXd::Zero(s_prime, d_prime)) {}

  int num_blocks() const { return static_cast<int>(blocks.rows()); }
  int block_dim() const { return static_cast<int>(blocks.cols()); }
  int dim() const { return num_blocks() * block_dim(); }

  Eigen::Map<Eigen::VectorXd> flat() {
    return Eigen::Map<Eigen::VectorXd>(blocks.data(), dim());
  }
  Eigen::Map<const Eigen::VectorXd> flat() const {
    return Eigen::Map<const Eigen::VectorXd>(blocks.data(), dim());
  }
};

}  // namespace lddm
