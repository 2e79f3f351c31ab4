#include "lddm/encoder.hpp"

#include <cmath>

namespace lddm {

EncoderConfig make_encoder_config(int vocab, int seq_len, int latent_blocks, int latent_dim,
                                  int hidden, int layers, int heads, double dropout,
                                  double sigma_lat_sq) {
  EncoderConfig cfg;
  cfg.sigma_lat_sq = sigma_lat_sq;
  cfg.backbone.vocab = vocab;
  cfg.backbone.seq_len = seq_len;
  cfg.backbone.latent_blocks = latent_blocks;
  cfg.backbone.latent_dim = latent_dim;
  cfg.backbone.hidden = hidden;
  cfg.backbone.layers = layers;
  cfg.backbone.heads = heads;
  cfg.backbone.dropout = dropout;
  cfg.backbone.time_conditioned = false;
  cfg.backbone.latent_stream = true;
  cfg.backbone.latent_input_proj = false;
  cfg.validate();
  return cfg;
}

template <class S>
ParameterStore<S> init_encoder_params(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return init_transformer_params<S>(cfg.backbone, seed);
}

LatentState unit_normalize_blocks(const LatentState& y) {
  LatentState out = y;
  for (int b = 0; b < y.num_blocks(); ++b) {
    double n = y.blocks.row(b).norm();
    if (!(n > 1e-12)) throw degenerate_error("unit_normalize_blocks: zero block");
    out.blocks.row(b) /= n;
  }
  return out;
}

template <class S>
int encode_apply(ad::Tape<S>& tape, const std::function<int(const std::string&)>& p,
                 const EncoderConfig& cfg, const TokenBatch& x0, bool train_mode, RngStream& rng) {
  cfg.validate();
  int mask = x0.mask_id();
  for (int b = 0; b < x0.batch(); ++b) {
    for (int i = 0; i < x0.seq_len(); ++i) {
      require(x0.tokens(b, i) != mask, "encode: x0 must be mask-free");
    }
  }
  std::vector<double> t_norm(x0.batch(), 0.0);
  TransformerNodes nodes = transformer_apply<S>(tape, p, cfg.backbone, x0, -1, t_norm, train_mode,
                                                train_mode ? &rng : nullptr);
  int mu = tape.row_l2_normalize(nodes.lat_head);
  double sigma = std::sqrt(cfg.sigma_lat_sq);
  ad::Mat<S> eps(static_cast<Eigen::Index>(x0.batch()) * cfg.backbone.latent_blocks,
                 cfg.backbone.latent_dim);
  for (Eigen::Index r = 0; r < eps.rows(); ++r) {
    for (Eigen::Index c = 0; c < eps.cols(); ++c) {
      eps(r, c) = static_cast<S>(sigma * rng.normal());
    }
  }
  int noisy = tape.add(mu, tape.constant(std::move(eps)));
  return tape.row_l2_normalize(noisy);
}

template <class S>
RowMatrixXd encode_eval_batch(const ParameterStore<S>& params_phi, const EncoderConfig& cfg,
                              const TokenBatch& x0, RngStream& rng) {
  ad::Tape<S> tape;
  auto p = const_binder(tape, params_phi);
  int y0 = encode_apply<S>(tape, p, cfg, x0, false, rng);
  RowMatrixXd out = tape.val(y0).template cast<double>();
  if (!out.allFinite()) throw numerical_error("encode: non-finite output");
  return out;
}

LatentState encode(const ParameterStore<double>& params_phi, const EncoderConfig& cfg,
                   const TokenSequence& x0, RngStream& rng) {
  TokenBatch tb;
  tb.vocab = x0.vocab;
  tb.tokens.resize(1, x0.size());
  for (int i = 0; i < x0.size(); ++i) tb.tokens(0, i) = x0.tokens[i];
  RowMatrixXd rows = encode_eval_batch(params_phi, cfg, tb, rng);
  LatentState y(cfg.backbone.latent_blocks, cfg.backbone.latent_dim);
  y.blocks = rows;
  return y;
}

template ParameterStore<float> init_encoder_params<float>(const EncoderConfig&, std::uint64_t);
template ParameterStore<double> init_encoder_params<double>(const EncoderConfig&, std::uint64_t);
template int encode_apply<float>(ad::Tape<float>&, const std::function<int(const std::string&)>&,
                                 const EncoderConfig&, const TokenBatch&, bool, RngStream&);
template int encode_apply<double>(ad::Tape<double>&, const std::function<int(const std::string&)>&,
                                  const EncoderConfig&, const TokenBatch&, bool, RngStream&);
template RowMatrixXd encode_eval_batch<float>(const ParameterStore<float>&, const EncoderConfig&,
                                              const TokenBatch&, RngStream&);
template RowMatrixXd encode_eval_batch<double>(const ParameterStore<double>&, const EncoderConfig&,
                                               const TokenBatch&, RngStream&);

}  // namespace lddm
