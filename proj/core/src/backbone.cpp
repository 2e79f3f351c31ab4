#include "lddm/backbone.hpp"

#include <cmath>

namespace lddm {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

enum class Init { kTruncNormal, kZero };

template <class S>
void add_tensor(ParameterStore<S>& ps, std::uint64_t seed, const std::string& name, int rows,
                int cols, Init kind) {
  ad::Mat<S> m = ad::Mat<S>::Zero(rows, cols);
  if (kind == Init::kTruncNormal) {
    fill_trunc_normal(m, 0.02, RngStream(seed).substream(fnv1a(name)));
  }
  ps.tensors.emplace(name, std::move(m));
}

std::string block_name(int i, const char* modality, const char* leaf) {
  return "blocks." + std::to_string(i) + "." + modality + "." + leaf;
}

}  // namespace

template <class S>
void fill_trunc_normal(ad::Mat<S>& m, double std_dev, RngStream rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double x = rng.normal();
      while (std::abs(x) > 2.0) x = rng.normal();
      m(r, c) = static_cast<S>(x * std_dev);
    }
  }
}

RowMatrixXd timestep_features(const std::vector<double>& t_norm, int dim) {
  require(dim % 2 == 0, "timestep_features: dim must be even");
  int half = dim / 2;
  RowMatrixXd out(static_cast<Eigen::Index>(t_norm.size()), dim);
  for (size_t b = 0; b < t_norm.size(); ++b) {
    double t = t_norm[b] * 1000.0;
    for (int j = 0; j < half; ++j) {
      double freq = std::exp(-std::log(10000.0) * j / half);
      out(static_cast<Eigen::Index>(b), j) = std::cos(t * freq);
      out(static_cast<Eigen::Index>(b), half + j) = std::sin(t * freq);
    }
  }
  return out;
}

template <class S>
ParameterStore<S> init_transformer_params(const BackboneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  int H = cfg.hidden;
  ParameterStore<S> ps;
  add_tensor(ps, seed, "txt.embed", cfg.vocab, H, Init::kTruncNormal);
  add_tensor(ps, seed, "txt.pos", cfg.seq_len, H, Init::kTruncNormal);
  if (cfg.latent_stream) {
    add_tensor(ps, seed, "lat.pos", cfg.latent_blocks, H, Init::kTruncNormal);
    if (cfg.latent_input_proj) {
      add_tensor(ps, seed, "lat.in.w", cfg.latent_dim, H, Init::kTruncNormal);
      add_tensor(ps, seed, "lat.in.b", 1, H, Init::kZero);
    } else {
      add_tensor(ps, seed, "lat.slots", cfg.latent_blocks, H, Init::kTruncNormal);
    }
  }
  if (cfg.time_conditioned) {
    add_tensor(ps, seed, "time.mlp1.w", H, H, Init::kTruncNormal);
    add_tensor(ps, seed, "time.mlp1.b", 1, H, Init::kZero);
    add_tensor(ps, seed, "time.mlp2.w", H, H, Init::kTruncNormal);
    add_tensor(ps, seed, "time.mlp2.b", 1, H, Init::kZero);
  }
  std::vector<const char*> modalities = {"txt"};
  if (cfg.latent_stream) modalities.push_back("lat");
  for (int i = 0; i < cfg.layers; ++i) {
    for (const char* m : modalities) {
      add_tensor(ps, seed, block_name(i, m, "adaln.w"), H, 6 * H, Init::kZero);
      add_tensor(ps, seed, block_name(i, m, "adaln.b"), 1, 6 * H, Init::kZero);
      add_tensor(ps, seed, block_name(i, m, "attn.wq"), H, H, Init::kTruncNormal);
      add_tensor(ps, seed, block_name(i, m, "attn.bq"), 1, H, Init::kZero);
      add_tensor(ps, seed, block_name(i, m, "attn.wk"), H, H, Init::kTruncNormal);
      add_tensor(ps, seed, block_name(i, m, "attn.bk"), 1, H, Init::kZero);
      add_tensor(ps, seed, block_name(i, m, "attn.wv"), H, H, Init::kTruncNormal);
      add_tensor(ps, seed, block_name(i, m, "attn.bv"), 1, H, Init::kZero);
      add_tensor(ps, seed, block_name(i, m, "attn.wo"), H, H, Init::kTruncNormal);
      add_tensor(ps, seed, block_name(i, m, "attn.bo"), 1, H, Init::kZero);
      add_tensor(ps, seed, block_name(i, m, "mlp.w1"), H, 4 * H, Init::kTruncNormal);
      add_tensor(ps, seed, block_name(i, m, "mlp.b1"), 1, 4 * H, Init::kZero);
      add_tensor(ps, seed, block_name(i, m, "mlp.w2"), 4 * H, H, Init::kTruncNormal);
      add_tensor(ps, seed, block_name(i, m, "mlp.b2"), 1, H, Init::kZero);
    }
  }
  for (const char* m : modalities) {
    add_tensor(ps, seed, std::string("final.") + m + ".adaln.w", H, 2 * H, Init::kZero);
    add_tensor(ps, seed, std::string("final.") + m + ".adaln.b", 1, 2 * H, Init::kZero);
  }
  add_tensor(ps, seed, "head.txt.w", H, cfg.vocab - 1, Init::kZero);
  add_tensor(ps, seed, "head.txt.b", 1, cfg.vocab - 1, Init::kZero);
  if (cfg.latent_stream) {
    // The encoder head cannot start at zero: its output is normalized per
    // block. Denoiser heads start at zero like the text head.
    add_tensor(ps, seed, "head.lat.w", H, cfg.latent_dim,
               cfg.latent_input_proj ? Init::kZero : Init::kTruncNormal);
    add_tensor(ps, seed, "head.lat.b", 1, cfg.latent_dim, Init::kZero);
  }
  return ps;
}

template <class S>
ParameterStore<S> init_latent_mlp_params(const LatentMlpConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  int W = cfg.width;
  ParameterStore<S> ps;
  add_tensor(ps, seed, "in.w", cfg.input_dim, W, Init::kTruncNormal);
  add_tensor(ps, seed, "in.b", 1, W, Init::kZero);
  if (cfg.time_conditioned) {
    add_tensor(ps, seed, "time.mlp1.w", W, W, Init::kTruncNormal);
    add_tensor(ps, seed, "time.mlp1.b", 1, W, Init::kZero);
    add_tensor(ps, seed, "time.mlp2.w", W, W, Init::kTruncNormal);
    add_tensor(ps, seed, "time.mlp2.b", 1, W, Init::kZero);
  }
  for (int i = 0; i < cfg.depth; ++i) {
    std::string base = "res." + std::to_string(i) + ".";
    add_tensor(ps, seed, base + "w1", W, W, Init::kTruncNormal);
    add_tensor(ps, seed, base + "b1", 1, W, Init::kZero);
    add_tensor(ps, seed, base + "w2", W, W, Init::kTruncNormal);
    add_tensor(ps, seed, base + "b2", 1, W, Init::kZero);
  }
  add_tensor(ps, seed, "out.w", W, cfg.input_dim, Init::kZero);
  add_tensor(ps, seed, "out.b", 1, cfg.input_dim, Init::kZero);
  return ps;
}

namespace {

// Timestep conditioning vector c and its SiLU image, one row per batch entry.
template <class S>
int conditioning_vector(ad::Tape<S>& tape, const std::function<int(const std::string&)>& p,
                        bool time_conditioned, const std::vector<double>& t_norm, int width) {
  if (!time_conditioned) {
    return tape.constant(ad::Mat<S>::Zero(static_cast<Eigen::Index>(t_norm.size()), width));
  }
  int tf = tape.constant(timestep_features(t_norm, width).cast<S>().eval());
  int c = tape.add_rowvec(tape.matmul(tf, p("time.mlp1.w")), p("time.mlp1.b"));
  c = tape.silu(c);
  c = tape.add_rowvec(tape.matmul(c, p("time.mlp2.w")), p("time.mlp2.b"));
  return tape.silu(c);
}

// One modality's slice of a block: attention inputs are prepared per modality,
// joined for attention, and the result is folded back here.
template <class S>
struct StreamState {
  int x = -1;                     // (B*L_m) x H features
  std::vector<int> batch_of_row;  // r -> batch index
  int rows = 0;
};

template <class S>
int broadcast_to_rows(ad::Tape<S>& tape, int per_sample, const StreamState<S>& st) {
  return tape.gather_rows(per_sample, st.batch_of_row);
}

}  // namespace

template <class S>
TransformerNodes transformer_apply(ad::Tape<S>& tape,
                                   const std::function<int(const std::string&)>& p,
                                   const BackboneConfig& cfg, const TokenBatch& tokens,
                                   int latent_in, const std::vector<double>& t_norm,
                                   bool train_mode, RngStream* rng) {
  cfg.validate();
  int B = tokens.batch();
  require(B >= 1, "transformer_apply: empty batch");
  require(tokens.seq_len() == cfg.seq_len, "transformer_apply: sequence length mismatch");
  require(tokens.vocab == cfg.vocab, "transformer_apply: vocab mismatch");
  require(static_cast<int>(t_norm.size()) == B, "transformer_apply: t_norm size mismatch");
  bool use_dropout = train_mode && cfg.dropout > 0.0;
  require(!use_dropout || rng != nullptr, "transformer_apply: dropout requires an rng");
  int H = cfg.hidden;
  int Sq = cfg.seq_len;
  int Sp = cfg.latent_blocks;

  StreamState<S> txt;
  txt.rows = B * Sq;
  txt.batch_of_row.resize(txt.rows);
  std::vector<int> tok_idx(txt.rows), pos_idx(txt.rows);
  for (int r = 0; r < txt.rows; ++r) {
    txt.batch_of_row[r] = r / Sq;
    pos_idx[r] = r % Sq;
    tok_idx[r] = tokens.tokens(r / Sq, r % Sq);
  }
  txt.x = tape.add(tape.gather_rows(p("txt.embed"), tok_idx),
                   tape.gather_rows(p("txt.pos"), pos_idx));

  StreamState<S> lat;
  if (cfg.latent_stream) {
    lat.rows = B * Sp;
    lat.batch_of_row.resize(lat.rows);
    std::vector<int> slot_idx(lat.rows);
    for (int r = 0; r < lat.rows; ++r) {
      lat.batch_of_row[r] = r / Sp;
      slot_idx[r] = r % Sp;
    }
    int base;
    if (cfg.latent_input_proj) {
      require(latent_in >= 0, "transformer_apply: latent input node required");
      require(tape.val(latent_in).rows() == lat.rows &&
                  tape.val(latent_in).cols() == cfg.latent_dim,
              "transformer_apply: latent input shape mismatch");
      base = tape.add_rowvec(tape.matmul(latent_in, p("lat.in.w")), p("lat.in.b"));
    } else {
      base = tape.gather_rows(p("lat.slots"), slot_idx);
    }
    lat.x = tape.add(base, tape.gather_rows(p("lat.pos"), slot_idx));
  }

  int ca = conditioning_vector(tape, p, cfg.time_conditioned, t_norm, H);
  int L = cfg.joint_len();

  // Row selections mapping modality rows into the joint attention layout.
  std::vector<int> txt_sel(txt.rows), lat_sel(lat.rows);
  for (int r = 0; r < txt.rows; ++r) txt_sel[r] = (r / Sq) * L + (r % Sq);
  for (int r = 0; r < lat.rows; ++r) lat_sel[r] = (r / Sp) * L + Sq + (r % Sp);

  for (int i = 0; i < cfg.layers; ++i) {
    struct Prepared {
      int q, k, v;
      int gate1, shift2, scale2, gate2;
    };
    auto prepare = [&](StreamState<S>& st, const char* m) -> Prepared {
      int mod = tape.add_rowvec(tape.matmul(ca, p(block_name(i, m, "adaln.w"))),
                                p(block_name(i, m, "adaln.b")));
      auto chunk = [&](int j) {
        return broadcast_to_rows(tape, tape.slice_cols(mod, j * H, H), st);
      };
      int shift1 = chunk(0), scale1 = chunk(1), gate1 = chunk(2);
      int shift2 = chunk(3), scale2 = chunk(4), gate2 = chunk(5);
      int h = tape.modulate(tape.layernorm(st.x), scale1, shift1);
      Prepared out;
      out.q = tape.add_rowvec(tape.matmul(h, p(block_name(i, m, "attn.wq"))),
                              p(block_name(i, m, "attn.bq")));
      out.k = tape.add_rowvec(tape.matmul(h, p(block_name(i, m, "attn.wk"))),
                              p(block_name(i, m, "attn.bk")));
      out.v = tape.add_rowvec(tape.matmul(h, p(block_name(i, m, "attn.wv"))),
                              p(block_name(i, m, "attn.bv")));
      out.gate1 = gate1;
      out.shift2 = shift2;
      out.scale2 = scale2;
      out.gate2 = gate2;
      return out;
    };

    Prepared pt = prepare(txt, "txt");
    Prepared pl{};
    int q = pt.q, k = pt.k, v = pt.v;
    if (cfg.latent_stream) {
      pl = prepare(lat, "lat");
      q = tape.interleave_rows(pt.q, pl.q, B, Sq, Sp);
      k = tape.interleave_rows(pt.k, pl.k, B, Sq, Sp);
      v = tape.interleave_rows(pt.v, pl.v, B, Sq, Sp);
    }
    int attn = tape.attention(q, k, v, B, L, cfg.heads);

    auto fold = [&](StreamState<S>& st, const Prepared& pr, const std::vector<int>& sel,
                    const char* m) {
      int o = tape.gather_rows(attn, sel);
      o = tape.add_rowvec(tape.matmul(o, p(block_name(i, m, "attn.wo"))),
                          p(block_name(i, m, "attn.bo")));
      if (use_dropout) o = tape.dropout(o, static_cast<S>(cfg.dropout), *rng);
      st.x = tape.add(st.x, tape.hadamard(pr.gate1, o));
      int h = tape.modulate(tape.layernorm(st.x), pr.scale2, pr.shift2);
      h = tape.gelu(tape.add_rowvec(tape.matmul(h, p(block_name(i, m, "mlp.w1"))),
                                    p(block_name(i, m, "mlp.b1"))));
      h = tape.add_rowvec(tape.matmul(h, p(block_name(i, m, "mlp.w2"))),
                          p(block_name(i, m, "mlp.b2")));
      if (use_dropout) h = tape.dropout(h, static_cast<S>(cfg.dropout), *rng);
      st.x = tape.add(st.x, tape.hadamard(pr.gate2, h));
    };
    fold(txt, pt, txt_sel, "txt");
    if (cfg.latent_stream) fold(lat, pl, lat_sel, "lat");
  }

  auto head = [&](StreamState<S>& st, const char* m, const char* head_name) {
    int fm = tape.add_rowvec(tape.matmul(ca, p(std::string("final.") + m + ".adaln.w")),
                             p(std::string("final.") + m + ".adaln.b"));
    int shift = broadcast_to_rows(tape, tape.slice_cols(fm, 0, H), st);
    int scale = broadcast_to_rows(tape, tape.slice_cols(fm, H, H), st);
    int h = tape.modulate(tape.layernorm(st.x), scale, shift);
    return tape.add_rowvec(tape.matmul(h, p(std::string(head_name) + ".w")),
                           p(std::string(head_name) + ".b"));
  };

  TransformerNodes out;
  out.txt_logits = head(txt, "txt", "head.txt");
  if (cfg.latent_stream) out.lat_head = head(lat, "lat", "head.lat");
  return out;
}

template <class S>
int latent_mlp_apply(ad::Tape<S>& tape, const std::function<int(const std::string&)>& p,
                     const LatentMlpConfig& cfg, int y_in, const std::vector<double>& t_norm,
                     bool train_mode, RngStream* rng) {
  (void)train_mode;
  (void)rng;
  cfg.validate();
  require(tape.val(y_in).cols() == cfg.input_dim, "latent_mlp_apply: input dim mismatch");
  require(tape.val(y_in).rows() == static_cast<Eigen::Index>(t_norm.size()),
          "latent_mlp_apply: t_norm size mismatch");
  int h = tape.add_rowvec(tape.matmul(y_in, p("in.w")), p("in.b"));
  if (cfg.time_conditioned) {
    int c = conditioning_vector(tape, p, true, t_norm, cfg.width);
    h = tape.add(h, c);
  }
  for (int i = 0; i < cfg.depth; ++i) {
    std::string base = "res." + std::to_string(i) + ".";
    int u = tape.layernorm(h);
    u = tape.silu(tape.add_rowvec(tape.matmul(u, p(base + "w1")), p(base + "b1")));
    u = tape.add_rowvec(tape.matmul(u, p(base + "w2")), p(base + "b2"));
    h = tape.add(h, u);
  }
  return tape.add_rowvec(tape.matmul(tape.layernorm(h), p("out.w")), p("out.b"));
}

template <class S>
std::function<int(const std::string&)> const_binder(ad::Tape<S>& tape,
                                                    const ParameterStore<S>& ps) {
  auto cache = std::make_shared<std::map<std::string, int>>();
  return [&tape, &ps, cache](const std::string& name) {
    auto it = cache->find(name);
    if (it != cache->end()) return it->second;
    int id = tape.constant(ps.at(name));
    cache->emplace(name, id);
    return id;
  };
}

RowMatrixXd probs_with_zero_mask(const RowMatrixXd& logits) {
  RowMatrixXd probs(logits.rows(), logits.cols() + 1);
  probs.setZero();
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double m = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
    probs.row(r).head(logits.cols()) = (e / e.sum()).matrix();
  }
  return probs;
}

template <class S>
std::pair<RowMatrixXd, RowMatrixXd> transformer_eval(const ParameterStore<S>& params,
                                                     const BackboneConfig& cfg,
                                                     const TokenBatch& tokens,
                                                     const RowMatrixXd* latents,
                                                     const std::vector<double>& t_norm) {
  ad::Tape<S> tape;
  auto p = const_binder(tape, params);
  int latent_in = -1;
  if (cfg.latent_stream && cfg.latent_input_proj) {
    require(latents != nullptr, "transformer_eval: latents required");
    latent_in = tape.constant(latents->cast<S>().eval());
  }
  TransformerNodes nodes =
      transformer_apply<S>(tape, p, cfg, tokens, latent_in, t_norm, false, nullptr);
  RowMatrixXd logits = tape.val(nodes.txt_logits).template cast<double>();
  if (!logits.allFinite()) throw numerical_error("transformer_eval: non-finite activations");
  RowMatrixXd lat;
  if (nodes.lat_head >= 0) {
    lat = tape.val(nodes.lat_head).template cast<double>();
    if (!lat.allFinite()) throw numerical_error("transformer_eval: non-finite latent head");
  }
  return {probs_with_zero_mask(logits), lat};
}

template <class S>
RowMatrixXd latent_mlp_eval(const ParameterStore<S>& params, const LatentMlpConfig& cfg,
                            const RowMatrixXd& y, const std::vector<double>& t_norm) {
  ad::Tape<S> tape;
  auto p = const_binder(tape, params);
  int y_in = tape.constant(y.cast<S>().eval());
  int out = latent_mlp_apply<S>(tape, p, cfg, y_in, t_norm, false, nullptr);
  RowMatrixXd v = tape.val(out).template cast<double>();
  if (!v.allFinite()) throw numerical_error("latent_mlp_eval: non-finite activations");
  return v;
}

std::pair<CategoricalField, LatentState> mmdit_forward(const ParameterStore<double>& params,
                                                       const BackboneConfig& cfg,
                                                       const TokenSequence& tokens,
                                                       const LatentState& latents, double t_norm,
                                                       bool train_mode, RngStream& rng) {
  require(tokens.size() == cfg.seq_len, "mmdit_forward: sequence length mismatch");
  TokenBatch tb;
  tb.vocab = tokens.vocab;
  tb.tokens.resize(1, tokens.size());
  for (int i = 0; i < tokens.size(); ++i) tb.tokens(0, i) = tokens.tokens[i];

  ad::Tape<double> tape;
  auto p = const_binder(tape, params);
  int latent_in = -1;
  if (cfg.latent_stream && cfg.latent_input_proj) {
    require(latents.num_blocks() == cfg.latent_blocks && latents.block_dim() == cfg.latent_dim,
            "mmdit_forward: latent shape mismatch");
    latent_in = tape.constant(latents.blocks);
  }
  TransformerNodes nodes = transformer_apply<double>(tape, p, cfg, tb, latent_in, {t_norm},
                                                     train_mode, train_mode ? &rng : nullptr);
  RowMatrixXd logits = tape.val(nodes.txt_logits);
  if (!logits.allFinite()) throw numerical_error("mmdit_forward: non-finite activations");
  CategoricalField field;
  field.probs = probs_with_zero_mask(logits);
  LatentState lat_out(cfg.latent_blocks, cfg.latent_dim);
  if (nodes.lat_head >= 0) {
    lat_out.blocks = tape.val(nodes.lat_head);
    if (!lat_out.blocks.allFinite()) throw numerical_error("mmdit_forward: non-finite latent");
  }
  return {std::move(field), std::move(lat_out)};
}

LatentState latent_denoiser_forward(const ParameterStore<double>& params,
                                    const LatentMlpConfig& cfg, const LatentState& latents,
                                    double t_norm, bool train_mode, RngStream& rng) {
  (void)train_mode;
  (void)rng;
  require(latents.dim() == cfg.input_dim, "latent_denoiser_forward: dim mismatch");
  RowMatrixXd flat(1, latents.dim());
  flat.row(0) = latents.flat().transpose();
  RowMatrixXd out = latent_mlp_eval(params, cfg, flat, {t_norm});
  LatentState y(latents.num_blocks(), latents.block_dim());
  y.flat() = out.row(0).transpose();
  return y;
}

template <class S>
GradientStore<S> zero_like(const ParameterStore<S>& ps) {
  GradientStore<S> out;
  for (const auto& [k, v] : ps.tensors) {
    out.tensors.emplace(k, ad::Mat<S>::Zero(v.rows(), v.cols()));
  }
  return out;
}

template <class S>
std::pair<double, GradientStore<S>> loss_gradients(
    ParameterStore<S>& params,
    const std::function<int(ModelGraph<S>&, ParameterStore<S>&)>& loss_closure) {
  ModelGraph<S> g;
  int node = loss_closure(g, params);
  double value = g.scalar(node);
  if (!std::isfinite(value)) throw numerical_error("loss_gradients: non-finite loss");
  g.tape.backward(node);
  GradientStore<S> grads = zero_like(params);
  g.export_grads(params, grads);
  return {value, std::move(grads)};
}

#define LDDM_INSTANTIATE(S)                                                                       \
  template void fill_trunc_normal<S>(ad::Mat<S>&, double, RngStream);                             \
  template ParameterStore<S> init_transformer_params<S>(const BackboneConfig&, std::uint64_t);    \
  template ParameterStore<S> init_latent_mlp_params<S>(const LatentMlpConfig&, std::uint64_t);    \
  template TransformerNodes transformer_apply<S>(                                                 \
      ad::Tape<S>&, const std::function<int(const std::string&)>&, const BackboneConfig&,         \
      const TokenBatch&, int, const std::vector<double>&, bool, RngStream*);                      \
  template int latent_mlp_apply<S>(ad::Tape<S>&, const std::function<int(const std::string&)>&,   \
                                   const LatentMlpConfig&, int, const std::vector<double>&, bool, \
                                   RngStream*);                                                   \
  template std::function<int(const std::string&)> const_binder<S>(ad::Tape<S>&,                   \
                                                                  const ParameterStore<S>&);      \
  template std::pair<RowMatrixXd, RowMatrixXd> transformer_eval<S>(                               \
      const ParameterStore<S>&, const BackboneConfig&, const TokenBatch&, const RowMatrixXd*,     \
      const std::vector<double>&);                                                                \
  template RowMatrixXd latent_mlp_eval<S>(const ParameterStore<S>&, const LatentMlpConfig&,       \
                                          const RowMatrixXd&, const std::vector<double>&);        \
  template GradientStore<S> zero_like<S>(const ParameterStore<S>&);                               \
  template std::pair<double, GradientStore<S>> loss_gradients<S>(                                 \
      ParameterStore<S>&, const std::function<int(ModelGraph<S>&, ParameterStore<S>&)>&);

LDDM_INSTANTIATE(float)
LDDM_INSTANTIATE(double)
#undef LDDM_INSTANTIATE

}  // namespace lddm
