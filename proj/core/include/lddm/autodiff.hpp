#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "lddm/errors.hpp"
#include "lddm/rng.hpp"

namespace lddm::ad {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Eager reverse-mode tape over dense row-major matrices. Values are computed
// at op-creation time; backward() replays the recorded closures in reverse.
// The row dimension carries (batch x positions), the column dimension carries
// features, so every op below is a plain 2-D matrix operation.
template <class S>
class Tape {
 public:
  struct Node {
    Mat<S> val;
    Mat<S> grad;  // allocated on first touch during backward
    bool needs_grad = false;
    std::function<void(Tape&)> backward;
  };

  int size() const { return static_cast<int>(nodes_.size()); }
  const Mat<S>& val(int id) const { return nodes_[id].val; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  Mat<S>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat<S>::Zero(n.val.rows(), n.val.cols());
    return n.grad;
  }
  bool grad_touched(int id) const { return nodes_[id].grad.size() != 0; }

  // Constant input; never receives a gradient.
  int constant(Mat<S> v) { return push(std::move(v), false, nullptr); }

  // Differentiable leaf (parameters).
  int leaf(Mat<S> v) { return push(std::move(v), true, nullptr); }

  int add(int a, int b) {
    check_same_shape(a, b, "add");
    Mat<S> v = val(a) + val(b);
    return unary_or_binary(std::move(v), a, b, [a, b](Tape& t, const Mat<S>& g) {
      if (t.needs_grad(a)) t.grad(a) += g;
      if (t.needs_grad(b)) t.grad(b) += g;
    });
  }

  int sub(int a, int b) {
    check_same_shape(a, b, "sub");
    Mat<S> v = val(a) - val(b);
    return unary_or_binary(std::move(v), a, b, [a, b](Tape& t, const Mat<S>& g) {
      if (t.needs_grad(a)) t.grad(a) += g;
      if (t.needs_grad(b)) t.grad(b) -= g;
    });
  }

  int scale(int a, S c) {
    Mat<S> v = val(a) * c;
    return unary(std::move(v), a, [a, c](Tape& t, const Mat<S>& g) { t.grad(a) += c * g; });
  }

  int hadamard(int a, int b) {
    check_same_shape(a, b, "hadamard");
    Mat<S> v = val(a).cwiseProduct(val(b));
    return unary_or_binary(std::move(v), a, b, [a, b](Tape& t, const Mat<S>& g) {
      if (t.needs_grad(a)) t.grad(a) += g.cwiseProduct(t.val(b));
      if (t.needs_grad(b)) t.grad(b) += g.cwiseProduct(t.val(a));
    });
  }

  // C = A * B.
  int matmul(int a, int b) {
    require(val(a).cols() == val(b).rows(), "matmul: inner dimensions differ");
    Mat<S> v = val(a) * val(b);
    return unary_or_binary(std::move(v), a, b, [a, b](Tape& t, const Mat<S>& g) {
      if (t.needs_grad(a)) t.grad(a).noalias() += g * t.val(b).transpose();
      if (t.needs_grad(b)) t.grad(b).noalias() += t.val(a).transpose() * g;
    });
  }

  // Broadcast a 1 x m bias over every row.
  int add_rowvec(int a, int bias) {
    require(val(bias).rows() == 1 && val(bias).cols() == val(a).cols(),
            "add_rowvec: bias must be 1 x cols(a)");
    Mat<S> v = val(a).rowwise() + val(bias).row(0);
    return unary_or_binary(std::move(v), a, bias, [a, bias](Tape& t, const Mat<S>& g) {
      if (t.needs_grad(a)) t.grad(a) += g;
      if (t.needs_grad(bias)) t.grad(bias).row(0) += g.colwise().sum();
    });
  }

  // out.row(i) = in.row(idx[i]); duplicate indices accumulate in backward.
  int gather_rows(int a, std::vector<int> idx) {
    const Mat<S>& in = val(a);
    Mat<S> v(static_cast<Eigen::Index>(idx.size()), in.cols());
    for (size_t i = 0; i < idx.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = in.row(idx[i]);
    return unary(std::move(v), a, [a, idx = std::move(idx)](Tape& t, const Mat<S>& g) {
      Mat<S>& da = t.grad(a);
      for (size_t i = 0; i < idx.size(); ++i) da.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    });
  }

  // Rows of a and b grouped per batch entry: out = [a_0; b_0; a_1; b_1; ...].
  int interleave_rows(int a, int b, int batch, int rows_a, int rows_b) {
    const Mat<S>& va = val(a);
    const Mat<S>& vb = val(b);
    require(va.cols() == vb.cols(), "interleave_rows: column mismatch");
    require(va.rows() == static_cast<Eigen::Index>(batch) * rows_a &&
                vb.rows() == static_cast<Eigen::Index>(batch) * rows_b,
            "interleave_rows: row mismatch");
    int stride = rows_a + rows_b;
    Mat<S> v(static_cast<Eigen::Index>(batch) * stride, va.cols());
    for (int q = 0; q < batch; ++q) {
      v.middleRows(q * stride, rows_a) = va.middleRows(q * rows_a, rows_a);
      v.middleRows(q * stride + rows_a, rows_b) = vb.middleRows(q * rows_b, rows_b);
    }
    return unary_or_binary(std::move(v), a, b,
                           [a, b, batch, rows_a, rows_b, stride](Tape& t, const Mat<S>& g) {
                             if (t.needs_grad(a)) {
                               Mat<S>& da = t.grad(a);
                               for (int q = 0; q < batch; ++q)
                                 da.middleRows(q * rows_a, rows_a) += g.middleRows(q * stride, rows_a);
                             }
                             if (t.needs_grad(b)) {
                               Mat<S>& db = t.grad(b);
                               for (int q = 0; q < batch; ++q)
                                 db.middleRows(q * rows_b, rows_b) +=
                                     g.middleRows(q * stride + rows_a, rows_b);
                             }
                           });
  }

  // Reinterpret the (row-major contiguous) buffer with a new shape.
  int reshape(int a, int rows, int cols) {
    const Mat<S>& in = val(a);
    require(in.size() == static_cast<Eigen::Index>(rows) * cols, "reshape: size mismatch");
    Mat<S> v = Eigen::Map<const Mat<S>>(in.data(), rows, cols);
    Eigen::Index r0 = in.rows(), c0 = in.cols();
    return unary(std::move(v), a, [a, r0, c0](Tape& t, const Mat<S>& g) {
      t.grad(a) += Eigen::Map<const Mat<S>>(g.data(), r0, c0);
    });
  }

  int slice_cols(int a, int start, int len) {
    require(start >= 0 && start + len <= val(a).cols(), "slice_cols: out of range");
    Mat<S> v = val(a).middleCols(start, len);
    return unary(std::move(v), a, [a, start, len](Tape& t, const Mat<S>& g) {
      t.grad(a).middleCols(start, len) += g;
    });
  }

  // Row-wise standardization (x - mean) / sqrt(var + eps), no affine part.
  int layernorm(int a, S eps = S(1e-6)) {
    const Mat<S>& x = val(a);
    Eigen::Index n = x.cols();
    Mat<S> y(x.rows(), n);
    Vec<S> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      S mean = x.row(r).mean();
      S var = (x.row(r).array() - mean).square().sum() / static_cast<S>(n);
      S is = S(1) / std::sqrt(var + eps);
      inv_std[r] = is;
      y.row(r) = (x.row(r).array() - mean) * is;
    }
    int out = unary(std::move(y), a,
                    [a, self = size(), inv_std = std::move(inv_std)](Tape& t, const Mat<S>& g) {
                      const Mat<S>& yv = t.val(self);
                      Mat<S>& da = t.grad(a);
                      Eigen::Index n = yv.cols();
                      for (Eigen::Index r = 0; r < yv.rows(); ++r) {
                        S gmean = g.row(r).mean();
                        S gydot = g.row(r).cwiseProduct(yv.row(r)).mean();
                        da.row(r) += ((g.row(r).array() - gmean) -
                                      yv.row(r).array() * gydot) *
                                     inv_std[r];
                      }
                    });
    return out;
  }

  // Exact GELU x * Phi(x).
  int gelu(int a) {
    const Mat<S>& x = val(a);
    Mat<S> v = x.unaryExpr([](S u) {
      return S(0.5) * u * (S(1) + std::erf(u * S(0.7071067811865475)));
    });
    return unary(std::move(v), a, [a](Tape& t, const Mat<S>& g) {
      constexpr S inv_sqrt2 = S(0.7071067811865475);
      constexpr S inv_sqrt2pi = S(0.3989422804014327);
      const Mat<S>& x = t.val(a);
      t.grad(a) += g.cwiseProduct(x.unaryExpr([](S u) {
        S phi = S(0.5) * (S(1) + std::erf(u * inv_sqrt2));
        S pdf = inv_sqrt2pi * std::exp(S(-0.5) * u * u);
        return phi + u * pdf;
      }));
    });
  }

  int silu(int a) {
    const Mat<S>& x = val(a);
    Mat<S> v = x.unaryExpr([](S u) { return u / (S(1) + std::exp(-u)); });
    return unary(std::move(v), a, [a](Tape& t, const Mat<S>& g) {
      const Mat<S>& x = t.val(a);
      t.grad(a) += g.cwiseProduct(x.unaryExpr([](S u) {
        S s = S(1) / (S(1) + std::exp(-u));
        return s * (S(1) + u * (S(1) - s));
      }));
    });
  }

  // x * (1 + scale) + shift, all three the same shape.
  int modulate(int x, int scale_rows, int shift_rows) {
    check_same_shape(x, scale_rows, "modulate");
    check_same_shape(x, shift_rows, "modulate");
    Mat<S> v = val(x).cwiseProduct(val(scale_rows).array() + S(1)) + val(shift_rows);
    int out = push(std::move(v), needs_grad(x) || needs_grad(scale_rows) || needs_grad(shift_rows),
                   nullptr);
    nodes_[out].backward = [out, x, scale_rows, shift_rows](Tape& t) {
      const Mat<S>& g = t.grad(out);
      if (t.needs_grad(x)) t.grad(x) += g.cwiseProduct(t.val(scale_rows).array() + S(1));
      if (t.needs_grad(scale_rows)) t.grad(scale_rows) += g.cwiseProduct(t.val(x));
      if (t.needs_grad(shift_rows)) t.grad(shift_rows) += g;
    };
    return out;
  }

  // Per-row constant scaling (schedule coefficients); no gradient to weights.
  int rowwise_scale(int a, Vec<S> w) {
    const Mat<S>& x = val(a);
    require(w.size() == x.rows(), "rowwise_scale: weight length mismatch");
    Mat<S> v = w.asDiagonal() * x;
    return unary(std::move(v), a, [a, w = std::move(w)](Tape& t, const Mat<S>& g) {
      t.grad(a) += w.asDiagonal() * g;
    });
  }

  // Inverted dropout with the mask drawn from rng at op creation.
  int dropout(int a, S rate, RngStream& rng) {
    require(rate >= S(0) && rate < S(1), "dropout: rate must lie in [0,1)");
    if (rate == S(0)) return a;
    const Mat<S>& x = val(a);
    Mat<S> mask(x.rows(), x.cols());
    S keep = S(1) - rate;
    S inv = S(1) / keep;
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
      for (Eigen::Index c = 0; c < mask.cols(); ++c) {
        mask(r, c) = rng.uniform() < static_cast<double>(rate) ? S(0) : inv;
      }
    }
    Mat<S> v = x.cwiseProduct(mask);
    return unary(std::move(v), a, [a, mask = std::move(mask)](Tape& t, const Mat<S>& g) {
      t.grad(a) += g.cwiseProduct(mask);
    });
  }

  // Row-wise y = x / ||x||. Rows with near-zero norm are rejected.
  int row_l2_normalize(int a, S min_norm = S(1e-12)) {
    const Mat<S>& x = val(a);
    Mat<S> v(x.rows(), x.cols());
    Vec<S> inv_norm(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      S n = x.row(r).norm();
      if (!(n > min_norm)) {
        throw degenerate_error("row_l2_normalize: zero block cannot be normalized");
      }
      inv_norm[r] = S(1) / n;
      v.row(r) = x.row(r) * inv_norm[r];
    }
    return unary(std::move(v), a,
                 [a, self = size(), inv_norm = std::move(inv_norm)](Tape& t, const Mat<S>& g) {
                   const Mat<S>& y = t.val(self);
                   Mat<S>& da = t.grad(a);
                   for (Eigen::Index r = 0; r < y.rows(); ++r) {
                     S dot = g.row(r).dot(y.row(r));
                     da.row(r) += (g.row(r) - dot * y.row(r)) * inv_norm[r];
                   }
                 });
  }

  // Joint multi-head self-attention over rows grouped as `batch` blocks of
  // `len` rows. q, k, v: (batch*len) x (heads*head_dim).
  int attention(int q, int k, int v, int batch, int len, int heads);

  // sum_r w_r * (logits[r, target_r] - logsumexp(logits.row(r))); rows with
  // w_r = 0 are skipped. Returns a 1x1 node.
  int weighted_logprob(int logits, std::vector<int> targets, Vec<S> row_weights);

  // sum_r w_r * ||x.row(r)||^2 as a 1x1 node.
  int weighted_rowsq(int a, Vec<S> row_weights) {
    const Mat<S>& x = val(a);
    require(row_weights.size() == x.rows(), "weighted_rowsq: weight length mismatch");
    S acc = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) acc += row_weights[r] * x.row(r).squaredNorm();
    Mat<S> v(1, 1);
    v(0, 0) = acc;
    return unary(std::move(v), a, [a, w = std::move(row_weights)](Tape& t, const Mat<S>& g) {
      S gs = g(0, 0);
      Mat<S>& da = t.grad(a);
      const Mat<S>& x = t.val(a);
      for (Eigen::Index r = 0; r < x.rows(); ++r) da.row(r) += (S(2) * gs * w[r]) * x.row(r);
    });
  }

  void backward(int root) {
    require(val(root).rows() == 1 && val(root).cols() == 1, "backward: root must be scalar");
    grad(root)(0, 0) = S(1);
    for (int id = root; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
      n.backward(*this);
    }
  }

 private:
  std::vector<Node> nodes_;

  int push(Mat<S> v, bool needs, std::function<void(Tape&)> bw) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = needs;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  template <class F>
  int unary(Mat<S> v, int a, F&& fn) {
    int out = push(std::move(v), needs_grad(a), nullptr);
    if (needs_grad(a)) {
      nodes_[out].backward = [out, fn = std::forward<F>(fn)](Tape& t) { fn(t, t.grad(out)); };
    }
    return out;
  }

  template <class F>
  int unary_or_binary(Mat<S> v, int a, int b, F&& fn) {
    bool needs = needs_grad(a) || needs_grad(b);
    int out = push(std::move(v), needs, nullptr);
    if (needs) {
      nodes_[out].backward = [out, fn = std::forward<F>(fn)](Tape& t) { fn(t, t.grad(out)); };
    }
    return out;
  }

  void check_same_shape(int a, int b, const char* what) {
    require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
            std::string(what) + ": shape mismatch");
  }
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace lddm::ad
