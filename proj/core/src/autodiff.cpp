#include "lddm/autodiff.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lddm::ad {

namespace {

// Cache of the per-(batch, head) softmax matrices needed for the backward pass.
template <class S>
struct AttnCtx {
  std::vector<Mat<S>> probs;  // batch*heads entries, each len x len
  int batch = 0, len = 0, heads = 0, head_dim = 0;
};

}  // namespace

template <class S>
int Tape<S>::attention(int q, int k, int v, int batch, int len, int heads) {
  const Mat<S>& Q = val(q);
  const Mat<S>& K = val(k);
  const Mat<S>& V = val(v);
  require(Q.rows() == K.rows() && Q.rows() == V.rows() && Q.cols() == K.cols() &&
              Q.cols() == V.cols(),
          "attention: q/k/v shape mismatch");
  require(Q.rows() == static_cast<Eigen::Index>(batch) * len, "attention: row count mismatch");
  require(Q.cols() % heads == 0, "attention: hidden not divisible by heads");
  int hd = static_cast<int>(Q.cols()) / heads;
  S inv_sqrt = S(1) / std::sqrt(static_cast<S>(hd));

  auto ctx = std::make_shared<AttnCtx<S>>();
  ctx->probs.resize(static_cast<size_t>(batch) * heads);
  ctx->batch = batch;
  ctx->len = len;
  ctx->heads = heads;
  ctx->head_dim = hd;

  Mat<S> out(Q.rows(), Q.cols());
#pragma omp parallel for schedule(static)
  for (int bh = 0; bh < batch * heads; ++bh) {
    int b = bh / heads;
    int h = bh % heads;
    auto Qb = Q.block(b * len, h * hd, len, hd);
    auto Kb = K.block(b * len, h * hd, len, hd);
    auto Vb = V.block(b * len, h * hd, len, hd);
    Mat<S> scores = (Qb * Kb.transpose()) * inv_sqrt;
    for (int r = 0; r < len; ++r) {
      S m = scores.row(r).maxCoeff();
      scores.row(r) = (scores.row(r).array() - m).exp();
      scores.row(r) /= scores.row(r).sum();
    }
    out.block(b * len, h * hd, len, hd).noalias() = scores * Vb;
    ctx->probs[bh] = std::move(scores);
  }

  bool needs = needs_grad(q) || needs_grad(k) || needs_grad(v);
  int id = constant(Mat<S>());
  nodes_[id].val = std::move(out);
  nodes_[id].needs_grad = needs;
  if (needs) {
    nodes_[id].backward = [id, q, k, v, ctx, inv_sqrt](Tape& t) {
      const Mat<S>& g = t.grad(id);
      const Mat<S>& Q = t.val(q);
      const Mat<S>& K = t.val(k);
      const Mat<S>& V = t.val(v);
      Mat<S>& dQ = t.grad(q);
      Mat<S>& dK = t.grad(k);
      Mat<S>& dV = t.grad(v);
      int batch = ctx->batch, len = ctx->len, heads = ctx->heads, hd = ctx->head_dim;
#pragma omp parallel for schedule(static)
      for (int bh = 0; bh < batch * heads; ++bh) {
        int b = bh / heads;
        int h = bh % heads;
        const Mat<S>& P = ctx->probs[bh];
        auto Qb = Q.block(b * len, h * hd, len, hd);
        auto Kb = K.block(b * len, h * hd, len, hd);
        auto Vb = V.block(b * len, h * hd, len, hd);
        auto Gb = g.block(b * len, h * hd, len, hd);
        Mat<S> dP = Gb * Vb.transpose();
        // softmax backward: dS_ij = P_ij (dP_ij - sum_k dP_ik P_ik)
        Mat<S> dSc(len, len);
        for (int r = 0; r < len; ++r) {
          S dot = dP.row(r).dot(P.row(r));
          dSc.row(r) = P.row(r).cwiseProduct(dP.row(r).array() - dot);
        }
        dSc *= inv_sqrt;
        dV.block(b * len, h * hd, len, hd).noalias() += P.transpose() * Gb;
        dQ.block(b * len, h * hd, len, hd).noalias() += dSc * Kb;
        dK.block(b * len, h * hd, len, hd).noalias() += dSc.transpose() * Qb;
      }
    };
  }
  return id;
}

template <class S>
int Tape<S>::weighted_logprob(int logits, std::vector<int> targets, Vec<S> row_weights) {
  const Mat<S>& L = val(logits);
  require(static_cast<Eigen::Index>(targets.size()) == L.rows(),
          "weighted_logprob: target count mismatch");
  require(row_weights.size() == L.rows(), "weighted_logprob: weight count mismatch");

  S acc = 0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    if (row_weights[r] == S(0)) continue;
    require(targets[r] >= 0 && targets[r] < L.cols(), "weighted_logprob: target out of range");
    S m = L.row(r).maxCoeff();
    S lse = m + std::log((L.row(r).array() - m).exp().sum());
    acc += row_weights[r] * (L(r, targets[r]) - lse);
  }
  Mat<S> v(1, 1);
  v(0, 0) = acc;
  int id = constant(Mat<S>());
  nodes_[id].val = std::move(v);
  nodes_[id].needs_grad = needs_grad(logits);
  if (nodes_[id].needs_grad) {
    nodes_[id].backward = [id, logits, targets = std::move(targets),
                           w = std::move(row_weights)](Tape& t) {
      S gs = t.grad(id)(0, 0);
      const Mat<S>& L = t.val(logits);
      Mat<S>& dL = t.grad(logits);
      for (Eigen::Index r = 0; r < L.rows(); ++r) {
        if (w[r] == S(0)) continue;
        S m = L.row(r).maxCoeff();
        Eigen::Array<S, 1, Eigen::Dynamic> e = (L.row(r).array() - m).exp();
        e /= e.sum();
        dL.row(r) -= (gs * w[r]) * e.matrix();
        dL(r, targets[r]) += gs * w[r];
      }
    };
  }
  return id;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace lddm::ad
