#include "lddm/models.hpp"

#include <algorithm>
#include <cmath>

namespace lddm {

TimeGrid make_time_grid(int T, int budget) {
  require(T >= 1, "make_time_grid: T must be >= 1");
  if (budget < 1 || budget > T) {
    throw invalid_argument("make_time_grid: budget must lie in [1, T]");
  }
  std::vector<int> ascending;
  for (int k = 0; k <= budget; ++k) {
    int t = static_cast<int>(std::llround(static_cast<double>(k) * T / budget));
    if (ascending.empty() || t > ascending.back()) ascending.push_back(t);
  }
  ascending.front() = 0;
  ascending.back() = T;
  TimeGrid grid;
  grid.steps.assign(ascending.rbegin(), ascending.rend());
  return grid;
}

namespace {

std::vector<int> draw_timesteps(int batch, int T, RngStream& rng, const std::vector<int>* fixed) {
  if (fixed != nullptr) {
    require(static_cast<int>(fixed->size()) == batch, "fixed t vector has wrong length");
    for (int t : *fixed) require(t >= 1 && t <= T, "fixed t out of range");
    return *fixed;
  }
  std::vector<int> t(batch);
  for (int b = 0; b < batch; ++b) t[b] = 1 + static_cast<int>(rng.below(T));
  return t;
}

TokenBatch mask_forward_batch(const TokenBatch& x0, const std::vector<int>& t,
                              const MaskSchedule& ms, RngStream& rng) {
  TokenBatch xt = x0;
  for (int b = 0; b < x0.batch(); ++b) {
    TokenSequence seq = mask_forward_sample(x0.row(b), t[b], ms, rng);
    for (int i = 0; i < x0.seq_len(); ++i) xt.tokens(b, i) = seq.tokens[i];
  }
  return xt;
}

std::vector<double> normalized(const std::vector<int>& t, int T) {
  std::vector<double> out(t.size());
  for (size_t i = 0; i < t.size(); ++i) out[i] = static_cast<double>(t[i]) / T;
  return out;
}

// Per-row weights of the discrete term: lambda_t / B on masked rows, 0 else.
template <class S>
ad::Vec<S> data_row_weights(const TokenBatch& xt, const std::vector<int>& t,
                            const MaskSchedule& ms, WeightMode wx) {
  int B = xt.batch(), Sq = xt.seq_len();
  ad::Vec<S> w = ad::Vec<S>::Zero(static_cast<Eigen::Index>(B) * Sq);
  for (int b = 0; b < B; ++b) {
    double wb = data_weight(ms, t[b], wx) / B;
    for (int i = 0; i < Sq; ++i) {
      if (xt.tokens(b, i) == xt.mask_id()) w[b * Sq + i] = static_cast<S>(wb);
    }
  }
  return w;
}

std::vector<int> flat_targets(const TokenBatch& x0) {
  std::vector<int> targets(static_cast<size_t>(x0.batch()) * x0.seq_len());
  for (int b = 0; b < x0.batch(); ++b) {
    for (int i = 0; i < x0.seq_len(); ++i) targets[b * x0.seq_len() + i] = x0.tokens(b, i);
  }
  return targets;
}

// Forward-noise a latent node row-block-wise: alpha_bar[t_b] y0 + sigma_bar[t_b] eps.
template <class S>
int noisy_latent_node(ad::Tape<S>& tape, int y0, const std::vector<int>& t,
                      const ContinuousSchedule& cs, int rows_per_sample, RngStream& rng) {
  Eigen::Index rows = tape.val(y0).rows();
  Eigen::Index cols = tape.val(y0).cols();
  ad::Vec<S> a(rows);
  ad::Mat<S> noise(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    int b = static_cast<int>(r) / rows_per_sample;
    a[r] = static_cast<S>(cs.alpha_bar[t[b]]);
    double sig = cs.sigma_bar[t[b]];
    for (Eigen::Index c = 0; c < cols; ++c) noise(r, c) = static_cast<S>(sig * rng.normal());
  }
  return tape.add(tape.rowwise_scale(y0, std::move(a)), tape.constant(std::move(noise)));
}

// Latent-term row weights; the t = 1 term has no ELBO weight and is dropped
// in that mode (the objective's sum starts at t = 2).
template <class S>
ad::Vec<S> latent_row_weights(const std::vector<int>& t, const ContinuousSchedule& cs,
                              WeightMode wy, int rows_per_sample, int batch) {
  ad::Vec<S> w = ad::Vec<S>::Zero(static_cast<Eigen::Index>(batch) * rows_per_sample);
  for (int b = 0; b < batch; ++b) {
    double wb = 0.0;
    if (!(wy == WeightMode::kElbo && t[b] == 1)) wb = latent_weight(cs, t[b], wy) / batch;
    for (int j = 0; j < rows_per_sample; ++j) {
      w[b * rows_per_sample + j] = static_cast<S>(wb);
    }
  }
  return w;
}

}  // namespace

// --- factories ---

template <class S>
MdlmModel<S> make_mdlm_model(int vocab, int seq_len, int hidden, int layers, int heads,
                             double dropout, std::uint64_t seed) {
  MdlmModel<S> m;
  m.cfg.vocab = vocab;
  m.cfg.seq_len = seq_len;
  m.cfg.hidden = hidden;
  m.cfg.layers = layers;
  m.cfg.heads = heads;
  m.cfg.dropout = dropout;
  m.cfg.latent_stream = false;
  m.cfg.time_conditioned = true;
  m.params = init_transformer_params<S>(m.cfg, seed);
  return m;
}

template <class S>
FujiModel<S> make_fuji_model(int vocab, int seq_len, int latent_blocks, int latent_dim, int hidden,
                             int layers, int heads, double dropout, double sigma_lat_sq,
                             std::uint64_t seed) {
  FujiModel<S> m;
  m.cfg.vocab = vocab;
  m.cfg.seq_len = seq_len;
  m.cfg.latent_blocks = latent_blocks;
  m.cfg.latent_dim = latent_dim;
  m.cfg.hidden = hidden;
  m.cfg.layers = layers;
  m.cfg.heads = heads;
  m.cfg.dropout = dropout;
  m.cfg.latent_stream = latent_blocks >= 1 && latent_dim >= 1;
  m.cfg.latent_input_proj = true;
  m.cfg.time_conditioned = true;
  m.theta = init_transformer_params<S>(m.cfg, seed);
  if (m.cfg.latent_stream) {
    m.enc_cfg = make_encoder_config(vocab, seq_len, latent_blocks, latent_dim, hidden, layers,
                                    heads, dropout, sigma_lat_sq);
    m.phi = init_encoder_params<S>(m.enc_cfg, seed + 1);
  }
  return m;
}

template <class S>
SeqModel<S> make_seq_model(int vocab, int seq_len, int latent_blocks, int latent_dim, int hidden,
                           int layers, int heads, double dropout, double sigma_lat_sq,
                           int mlp_width, std::uint64_t seed) {
  SeqModel<S> m;
  m.mlp_cfg.input_dim = latent_blocks * latent_dim;
  m.mlp_cfg.width = mlp_width;
  m.mlp_cfg.time_conditioned = true;
  m.data_cfg.vocab = vocab;
  m.data_cfg.seq_len = seq_len;
  m.data_cfg.latent_blocks = latent_blocks;
  m.data_cfg.latent_dim = latent_dim;
  m.data_cfg.hidden = hidden;
  m.data_cfg.layers = layers;
  m.data_cfg.heads = heads;
  m.data_cfg.dropout = dropout;
  m.data_cfg.latent_stream = true;
  m.data_cfg.latent_input_proj = true;
  m.data_cfg.time_conditioned = false;  // conditions on the clean latent only
  m.enc_cfg = make_encoder_config(vocab, seq_len, latent_blocks, latent_dim, hidden, layers, heads,
                                  dropout, sigma_lat_sq);
  m.latent = init_latent_mlp_params<S>(m.mlp_cfg, seed);
  m.data = init_transformer_params<S>(m.data_cfg, seed + 1);
  m.phi = init_encoder_params<S>(m.enc_cfg, seed + 2);
  return m;
}

// --- losses ---

template <class S>
LossNodes<S> mdlm_loss_build(ModelGraph<S>& g, MdlmModel<S>& model, const TokenBatch& x0,
                             const MaskSchedule& ms, WeightMode wx, bool train_mode,
                             RngStream& rng, const std::vector<int>* fixed_t) {
  require(!model.cfg.latent_stream, "mdlm_loss: backbone must be single-modality");
  std::vector<int> t = draw_timesteps(x0.batch(), ms.T, rng, fixed_t);
  TokenBatch xt = mask_forward_batch(x0, t, ms, rng);
  TransformerNodes nodes = transformer_apply<S>(g.tape, g.binder(model.params), model.cfg, xt, -1,
                                                normalized(t, ms.T), train_mode, &rng);
  int data = g.tape.weighted_logprob(nodes.txt_logits, flat_targets(x0),
                                     data_row_weights<S>(xt, t, ms, wx));
  LossNodes<S> out;
  out.total = data;
  out.values.data_term = g.scalar(data);
  out.values.latent_term = 0.0;
  out.values.lambda_latent = 0.0;
  out.values.total = out.values.data_term;
  return out;
}

template <class S>
LossNodes<S> fuji_loss_build(ModelGraph<S>& g, FujiModel<S>& model, const TokenBatch& x0,
                             const MaskSchedule& ms, const ContinuousSchedule& cs, WeightMode wx,
                             WeightMode wy, double lambda_latent, bool train_mode, RngStream& rng,
                             const std::vector<int>* fixed_t) {
  require(ms.T == cs.T, "fuji_loss: schedules must share T");
  // One t per element, shared by both channels.
  std::vector<int> t = draw_timesteps(x0.batch(), ms.T, rng, fixed_t);
  TokenBatch xt = mask_forward_batch(x0, t, ms, rng);

  int y0 = -1, yt = -1;
  if (model.cfg.latent_stream) {
    y0 = encode_apply<S>(g.tape, g.binder(model.phi), model.enc_cfg, x0, train_mode, rng);
    yt = noisy_latent_node<S>(g.tape, y0, t, cs, model.cfg.latent_blocks, rng);
  }
  TransformerNodes nodes = transformer_apply<S>(g.tape, g.binder(model.theta), model.cfg, xt, yt,
                                                normalized(t, ms.T), train_mode, &rng);
  int data = g.tape.weighted_logprob(nodes.txt_logits, flat_targets(x0),
                                     data_row_weights<S>(xt, t, ms, wx));
  LossNodes<S> out;
  out.values.lambda_latent = lambda_latent;
  if (model.cfg.latent_stream) {
    int diff = g.tape.sub(nodes.lat_head, y0);
    int latent = g.tape.weighted_rowsq(
        diff, latent_row_weights<S>(t, cs, wy, model.cfg.latent_blocks, x0.batch()));
    out.total = g.tape.add(data, g.tape.scale(latent, static_cast<S>(lambda_latent)));
    out.values.data_term = g.scalar(data);
    out.values.latent_term = g.scalar(latent);
  } else {
    out.total = data;
    out.values.data_term = g.scalar(data);
    out.values.latent_term = 0.0;
  }
  out.values.total = out.values.data_term + lambda_latent * out.values.latent_term;
  return out;
}

template <class S>
LossNodes<S> seq_loss_build(ModelGraph<S>& g, SeqModel<S>& model, const TokenBatch& x0,
                            const MaskSchedule& ms, const ContinuousSchedule& cs, WeightMode wx,
                            WeightMode wy, double lambda_latent, bool train_mode, RngStream& rng,
                            const std::vector<int>* fixed_t_data,
                            const std::vector<int>* fixed_t_latent) {
  require(ms.T == cs.T, "seq_loss: schedules must share T");
  int B = x0.batch();
  // The SEQ objective decouples the channels, so t is drawn per channel.
  std::vector<int> t_data = draw_timesteps(B, ms.T, rng, fixed_t_data);
  std::vector<int> t_lat = draw_timesteps(B, cs.T, rng, fixed_t_latent);
  TokenBatch xt = mask_forward_batch(x0, t_data, ms, rng);

  int y0 = encode_apply<S>(g.tape, g.binder(model.phi), model.enc_cfg, x0, train_mode, rng);
  int d = model.mlp_cfg.input_dim;
  int y0_flat = g.tape.reshape(y0, B, d);
  int yt = noisy_latent_node<S>(g.tape, y0_flat, t_lat, cs, 1, rng);
  int pred = latent_mlp_apply<S>(g.tape, g.binder(model.latent), model.mlp_cfg, yt,
                                 normalized(t_lat, cs.T), train_mode, &rng);
  int latent = g.tape.weighted_rowsq(g.tape.sub(pred, y0_flat),
                                     latent_row_weights<S>(t_lat, cs, wy, 1, B));

  std::vector<double> zeros(B, 0.0);
  TransformerNodes nodes = transformer_apply<S>(g.tape, g.binder(model.data), model.data_cfg, xt,
                                                y0, zeros, train_mode, &rng);
  int data = g.tape.weighted_logprob(nodes.txt_logits, flat_targets(x0),
                                     data_row_weights<S>(xt, t_data, ms, wx));

  LossNodes<S> out;
  out.total = g.tape.add(data, g.tape.scale(latent, static_cast<S>(lambda_latent)));
  out.values.data_term = g.scalar(data);
  out.values.latent_term = g.scalar(latent);
  out.values.lambda_latent = lambda_latent;
  out.values.total = out.values.data_term + lambda_latent * out.values.latent_term;
  return out;
}

template <class S>
LossBreakdown mdlm_loss(MdlmModel<S>& model, const TokenBatch& x0, const MaskSchedule& ms,
                        WeightMode wx, bool train_mode, RngStream& rng) {
  ModelGraph<S> g;
  return mdlm_loss_build(g, model, x0, ms, wx, train_mode, rng).values;
}

template <class S>
LossBreakdown fuji_loss(FujiModel<S>& model, const TokenBatch& x0, const MaskSchedule& ms,
                        const ContinuousSchedule& cs, WeightMode wx, WeightMode wy,
                        double lambda_latent, bool train_mode, RngStream& rng) {
  ModelGraph<S> g;
  return fuji_loss_build(g, model, x0, ms, cs, wx, wy, lambda_latent, train_mode, rng).values;
}

template <class S>
LossBreakdown seq_loss(SeqModel<S>& model, const TokenBatch& x0, const MaskSchedule& ms,
                       const ContinuousSchedule& cs, WeightMode wx, WeightMode wy,
                       double lambda_latent, bool train_mode, RngStream& rng) {
  ModelGraph<S> g;
  return seq_loss_build(g, model, x0, ms, cs, wx, wy, lambda_latent, train_mode, rng).values;
}

// --- samplers ---

namespace {

TokenBatch all_mask_batch(int n, int S, int K) {
  TokenBatch xt;
  xt.vocab = K;
  xt.tokens = RowMatrixXi::Constant(n, S, K - 1);
  return xt;
}

int batch_mask_count(const TokenBatch& xt) {
  int n = 0;
  for (int b = 0; b < xt.batch(); ++b) {
    for (int i = 0; i < xt.seq_len(); ++i) n += (xt.tokens(b, i) == xt.mask_id());
  }
  return n;
}

// One discrete reverse step applied to every row, with the carry-over and
// monotone-reveal invariants checked.
void reverse_step_batch(TokenBatch& xt, const RowMatrixXd& probs, int s, int t,
                        const MaskSchedule& ms, RngStream& rng) {
  int S = xt.seq_len();
  int before = batch_mask_count(xt);
  for (int b = 0; b < xt.batch(); ++b) {
    TokenSequence row = xt.row(b);
    CategoricalField field;
    field.probs = probs.middleRows(static_cast<Eigen::Index>(b) * S, S);
    TokenSequence next = mask_reverse_step(row, field, s, t, ms, rng);
    for (int i = 0; i < S; ++i) {
      if (row.tokens[i] != row.mask_id() && next.tokens[i] != row.tokens[i]) {
        throw std::logic_error("sampler: carry-over violated");
      }
      xt.tokens(b, i) = next.tokens[i];
    }
  }
  if (batch_mask_count(xt) > before) {
    throw std::logic_error("sampler: masked count increased");
  }
}

void check_fully_unmasked(const TokenBatch& xt) {
  if (batch_mask_count(xt) != 0) {
    throw std::logic_error("sampler: residual mask at t = 0");
  }
}

RowMatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double scale, RngStream& rng) {
  RowMatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

}  // namespace

TokenBatch mdlm_sample_batch(const DataPredictFn& predict, const TimeGrid& grid, int n, int S,
                             int K, const MaskSchedule& ms, RngStream& rng, long* nfe) {
  require(n >= 1, "mdlm_sample: n must be >= 1");
  TokenBatch xt = all_mask_batch(n, S, K);
  for (int k = 0; k < grid.intervals(); ++k) {
    int t = grid.steps[k], s = grid.steps[k + 1];
    RowMatrixXd probs = predict(xt, std::vector<int>(n, t));
    reverse_step_batch(xt, probs, s, t, ms, rng);
  }
  check_fully_unmasked(xt);
  if (nfe) *nfe = grid.intervals();
  return xt;
}

FujiSampleResult fuji_sample_batch(const JointPredictFn& predict, const TimeGrid& grid, int n,
                                   int S, int K, int latent_blocks, int latent_dim,
                                   const ContinuousSchedule& cs, const MaskSchedule& ms,
                                   RngStream& rng, bool use_ddim, double eta) {
  require(n >= 1, "fuji_sample: n must be >= 1");
  bool has_latent = latent_blocks >= 1 && latent_dim >= 1;
  FujiSampleResult out;
  out.tokens = all_mask_batch(n, S, K);
  RowMatrixXd y;
  if (has_latent) {
    y = gaussian_matrix(static_cast<Eigen::Index>(n) * latent_blocks, latent_dim,
                        cs.sigma_bar[cs.T], rng);
  } else {
    y.resize(0, 0);
  }
  for (int k = 0; k < grid.intervals(); ++k) {
    int t = grid.steps[k], s = grid.steps[k + 1];
    auto [probs, y0p] = predict(out.tokens, y, std::vector<int>(n, t));
    reverse_step_batch(out.tokens, probs, s, t, ms, rng);
    if (has_latent) {
      for (int b = 0; b < n; ++b) {
        LatentState yb(latent_blocks, latent_dim), pb(latent_blocks, latent_dim);
        yb.blocks = y.middleRows(static_cast<Eigen::Index>(b) * latent_blocks, latent_blocks);
        pb.blocks = y0p.middleRows(static_cast<Eigen::Index>(b) * latent_blocks, latent_blocks);
        LatentState ys = use_ddim ? gauss_ddim_step(yb, pb, s, t, cs, eta, rng)
                                  : gauss_ancestral_step(yb, pb, s, t, cs, rng);
        y.middleRows(static_cast<Eigen::Index>(b) * latent_blocks, latent_blocks) = ys.blocks;
      }
    }
  }
  check_fully_unmasked(out.tokens);
  out.latents = std::move(y);
  out.nfe = grid.intervals();
  return out;
}

SeqSampleResult seq_sample_batch(const LatentPredictFn& latent_predict,
                                 const CondDataPredictFn& data_predict,
                                 const TimeGrid& latent_grid, const TimeGrid& data_grid, int n,
                                 int S, int K, int latent_blocks, int latent_dim,
                                 const ContinuousSchedule& cs, const MaskSchedule& ms,
                                 RngStream& rng, bool use_ddim, double eta) {
  require(n >= 1, "seq_sample: n must be >= 1");
  int d = latent_blocks * latent_dim;
  RowMatrixXd y = gaussian_matrix(n, d, cs.sigma_bar[cs.T], rng);
  for (int k = 0; k < latent_grid.intervals(); ++k) {
    int t = latent_grid.steps[k], s = latent_grid.steps[k + 1];
    RowMatrixXd y0p = latent_predict(y, std::vector<int>(n, t));
    for (int b = 0; b < n; ++b) {
      LatentState yb(1, d), pb(1, d);
      yb.blocks.row(0) = y.row(b);
      pb.blocks.row(0) = y0p.row(b);
      LatentState ys = use_ddim ? gauss_ddim_step(yb, pb, s, t, cs, eta, rng)
                                : gauss_ancestral_step(yb, pb, s, t, cs, rng);
      y.row(b) = ys.blocks.row(0);
    }
  }
  // Block-renormalize the resolved latent before conditioning the data chain,
  // matching the training-time latent support.
  RowMatrixXd y0_rows(static_cast<Eigen::Index>(n) * latent_blocks, latent_dim);
  for (int b = 0; b < n; ++b) {
    LatentState state(latent_blocks, latent_dim);
    state.flat() = y.row(b).transpose();
    state = unit_normalize_blocks(state);
    y0_rows.middleRows(static_cast<Eigen::Index>(b) * latent_blocks, latent_blocks) = state.blocks;
  }

  SeqSampleResult out;
  out.tokens = all_mask_batch(n, S, K);
  for (int k = 0; k < data_grid.intervals(); ++k) {
    int t = data_grid.steps[k], s = data_grid.steps[k + 1];
    RowMatrixXd probs = data_predict(out.tokens, y0_rows);
    reverse_step_batch(out.tokens, probs, s, t, ms, rng);
  }
  check_fully_unmasked(out.tokens);
  out.latents = std::move(y0_rows);
  out.nfe_latent = latent_grid.intervals();
  out.nfe_data = data_grid.intervals();
  return out;
}

// --- parameter-backed predictors ---

template <class S>
DataPredictFn make_mdlm_predictor(const MdlmModel<S>& model, int T) {
  const MdlmModel<S>* m = &model;
  return [m, T](const TokenBatch& xt, const std::vector<int>& t) {
    auto [probs, lat] = transformer_eval(m->params, m->cfg, xt, nullptr, normalized(t, T));
    return probs;
  };
}

template <class S>
JointPredictFn make_fuji_predictor(const FujiModel<S>& model, int T) {
  const FujiModel<S>* m = &model;
  return [m, T](const TokenBatch& xt, const RowMatrixXd& yt, const std::vector<int>& t) {
    return transformer_eval(m->theta, m->cfg, xt, m->cfg.latent_stream ? &yt : nullptr,
                            normalized(t, T));
  };
}

template <class S>
LatentPredictFn make_seq_latent_predictor(const SeqModel<S>& model, int T, long* call_count) {
  const SeqModel<S>* m = &model;
  return [m, T, call_count](const RowMatrixXd& yt, const std::vector<int>& t) {
    if (call_count) ++*call_count;
    return latent_mlp_eval(m->latent, m->mlp_cfg, yt, normalized(t, T));
  };
}

template <class S>
CondDataPredictFn make_seq_data_predictor(const SeqModel<S>& model) {
  const SeqModel<S>* m = &model;
  return [m](const TokenBatch& xt, const RowMatrixXd& y0) {
    std::vector<double> zeros(xt.batch(), 0.0);
    auto [probs, lat] = transformer_eval(m->data, m->data_cfg, xt, &y0, zeros);
    return probs;
  };
}

template <class S>
TokenSequence mdlm_sample(const MdlmModel<S>& model, const TimeGrid& grid, const MaskSchedule& ms,
                          RngStream& rng, long* nfe) {
  TokenBatch out = mdlm_sample_batch(make_mdlm_predictor(model, ms.T), grid, 1,
                                     model.cfg.seq_len, model.cfg.vocab, ms, rng, nfe);
  return out.row(0);
}

template <class S>
std::pair<TokenSequence, LatentState> fuji_sample(const FujiModel<S>& model, const TimeGrid& grid,
                                                  const ContinuousSchedule& cs,
                                                  const MaskSchedule& ms, RngStream& rng,
                                                  long* nfe) {
  FujiSampleResult res = fuji_sample_batch(make_fuji_predictor(model, ms.T), grid, 1,
                                           model.cfg.seq_len, model.cfg.vocab,
                                           model.cfg.latent_blocks, model.cfg.latent_dim, cs, ms,
                                           rng);
  if (nfe) *nfe = res.nfe;
  LatentState y(model.cfg.latent_blocks, model.cfg.latent_dim);
  if (res.latents.size() > 0) y.blocks = res.latents;
  return {res.tokens.row(0), std::move(y)};
}

template <class S>
TokenSequence seq_sample(const SeqModel<S>& model, const TimeGrid& latent_grid,
                         const TimeGrid& data_grid, const ContinuousSchedule& cs,
                         const MaskSchedule& ms, RngStream& rng, long* nfe_latent,
                         long* nfe_data) {
  SeqSampleResult res = seq_sample_batch(
      make_seq_latent_predictor(model, cs.T), make_seq_data_predictor(model), latent_grid,
      data_grid, 1, model.data_cfg.seq_len, model.data_cfg.vocab, model.data_cfg.latent_blocks,
      model.data_cfg.latent_dim, cs, ms, rng);
  if (nfe_latent) *nfe_latent = res.nfe_latent;
  if (nfe_data) *nfe_data = res.nfe_data;
  return res.tokens.row(0);
}

// --- validation NELBO draws ---

namespace {

TokenBatch single_row_batch(const TokenSequence& x) {
  TokenBatch tb;
  tb.vocab = x.vocab;
  tb.tokens.resize(1, x.size());
  for (int i = 0; i < x.size(); ++i) tb.tokens(0, i) = x.tokens[i];
  return tb;
}

CategoricalField field_from_rows(const RowMatrixXd& probs) {
  CategoricalField f;
  f.probs = probs;
  return f;
}

}  // namespace

template <class S>
double mdlm_nelbo_draw(const MdlmModel<S>& model, const MaskSchedule& ms, const TokenSequence& x0,
                       RngStream& rng) {
  int t = 1 + static_cast<int>(rng.below(ms.T));
  TokenSequence xt = mask_forward_sample(x0, t, ms, rng);
  auto [probs, lat] = transformer_eval(model.params, model.cfg, single_row_batch(xt), nullptr,
                                       {static_cast<double>(t) / ms.T});
  return ms.T * mask_nelbo_term(x0, xt, field_from_rows(probs), t, ms, WeightMode::kElbo);
}

template <class S>
double fuji_nelbo_draw(const FujiModel<S>& model, const MaskSchedule& ms,
                       const ContinuousSchedule& cs, const TokenSequence& x0, RngStream& rng) {
  int t = 1 + static_cast<int>(rng.below(ms.T));
  TokenSequence xt = mask_forward_sample(x0, t, ms, rng);
  const RowMatrixXd* yt_ptr = nullptr;
  RowMatrixXd yt_rows;
  if (model.cfg.latent_stream) {
    LatentState y0(model.cfg.latent_blocks, model.cfg.latent_dim);
    y0.blocks = encode_eval_batch(model.phi, model.enc_cfg, single_row_batch(x0), rng);
    LatentState yt = gauss_forward_sample(y0, t, cs, rng);
    yt_rows = yt.blocks;
    yt_ptr = &yt_rows;
  }
  auto [probs, lat] = transformer_eval(model.theta, model.cfg, single_row_batch(xt), yt_ptr,
                                       {static_cast<double>(t) / ms.T});
  return ms.T * mask_nelbo_term(x0, xt, field_from_rows(probs), t, ms, WeightMode::kElbo);
}

template <class S>
double seq_nelbo_draw(const SeqModel<S>& model, const MaskSchedule& ms, const TokenSequence& x0,
                      RngStream& rng) {
  int t = 1 + static_cast<int>(rng.below(ms.T));
  TokenSequence xt = mask_forward_sample(x0, t, ms, rng);
  RowMatrixXd y0 = encode_eval_batch(model.phi, model.enc_cfg, single_row_batch(x0), rng);
  auto [probs, lat] = transformer_eval(model.data, model.data_cfg, single_row_batch(xt), &y0,
                                       {0.0});
  return ms.T * mask_nelbo_term(x0, xt, field_from_rows(probs), t, ms, WeightMode::kElbo);
}

#define LDDM_INSTANTIATE_MODELS(S)                                                                \
  template MdlmModel<S> make_mdlm_model<S>(int, int, int, int, int, double, std::uint64_t);       \
  template FujiModel<S> make_fuji_model<S>(int, int, int, int, int, int, int, double, double,     \
                                           std::uint64_t);                                        \
  template SeqModel<S> make_seq_model<S>(int, int, int, int, int, int, int, double, double, int,  \
                                         std::uint64_t);                                          \
  template LossNodes<S> mdlm_loss_build<S>(ModelGraph<S>&, MdlmModel<S>&, const TokenBatch&,      \
                                           const MaskSchedule&, WeightMode, bool, RngStream&,     \
                                           const std::vector<int>*);                              \
  template LossNodes<S> fuji_loss_build<S>(ModelGraph<S>&, FujiModel<S>&, const TokenBatch&,      \
                                           const MaskSchedule&, const ContinuousSchedule&,        \
                                           WeightMode, WeightMode, double, bool, RngStream&,      \
                                           const std::vector<int>*);                              \
  template LossNodes<S> seq_loss_build<S>(ModelGraph<S>&, SeqModel<S>&, const TokenBatch&,        \
                                          const MaskSchedule&, const ContinuousSchedule&,         \
                                          WeightMode, WeightMode, double, bool, RngStream&,       \
                                          const std::vector<int>*, const std::vector<int>*);      \
  template LossBreakdown mdlm_loss<S>(MdlmModel<S>&, const TokenBatch&, const MaskSchedule&,      \
                                      WeightMode, bool, RngStream&);                              \
  template LossBreakdown fuji_loss<S>(FujiModel<S>&, const TokenBatch&, const MaskSchedule&,      \
                                      const ContinuousSchedule&, WeightMode, WeightMode, double,  \
                                      bool, RngStream&);                                          \
  template LossBreakdown seq_loss<S>(SeqModel<S>&, const TokenBatch&, const MaskSchedule&,        \
                                     const ContinuousSchedule&, WeightMode, WeightMode, double,   \
                                     bool, RngStream&);                                           \
  template DataPredictFn make_mdlm_predictor<S>(const MdlmModel<S>&, int);                        \
  template JointPredictFn make_fuji_predictor<S>(const FujiModel<S>&, int);                       \
  template LatentPredictFn make_seq_latent_predictor<S>(const SeqModel<S>&, int, long*);          \
  template CondDataPredictFn make_seq_data_predictor<S>(const SeqModel<S>&);                      \
  template TokenSequence mdlm_sample<S>(const MdlmModel<S>&, const TimeGrid&,                     \
                                        const MaskSchedule&, RngStream&, long*);                  \
  template std::pair<TokenSequence, LatentState> fuji_sample<S>(                                  \
      const FujiModel<S>&, const TimeGrid&, const ContinuousSchedule&, const MaskSchedule&,       \
      RngStream&, long*);                                                                         \
  template TokenSequence seq_sample<S>(const SeqModel<S>&, const TimeGrid&, const TimeGrid&,      \
                                       const ContinuousSchedule&, const MaskSchedule&,            \
                                       RngStream&, long*, long*);                                 \
  template double mdlm_nelbo_draw<S>(const MdlmModel<S>&, const MaskSchedule&,                    \
                                     const TokenSequence&, RngStream&);                           \
  template double fuji_nelbo_draw<S>(const FujiModel<S>&, const MaskSchedule&,                    \
                                     const ContinuousSchedule&, const TokenSequence&,             \
                                     RngStream&);                                                 \
  template double seq_nelbo_draw<S>(const SeqModel<S>&, const MaskSchedule&,                      \
                                    const TokenSequence&, RngStream&);

LDDM_INSTANTIATE_MODELS(float)
LDDM_INSTANTIATE_MODELS(double)
#undef LDDM_INSTANTIATE_MODELS

}  // namespace lddm
