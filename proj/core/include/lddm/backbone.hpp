#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lddm/autodiff.hpp"
#include "lddm/sequences.hpp"

namespace lddm {

// Widths and wiring shared by the DiT / MM-DiT denoisers and the encoder.
// latent_stream selects between the single-modality transformer (tokens only)
// and the joint one; latent_input_proj distinguishes denoisers (project a
// noisy latent into the stream) from the encoder (learnable latent slots).
struct BackboneConfig {
  int hidden = 64;
  int layers = 4;
  int heads = 4;
  double dropout = 0.1;
  int vocab = 3;  // K, mask included
  int seq_len = 128;
  int latent_blocks = 1;  // S'
  int latent_dim = 32;    // d'
  bool time_conditioned = true;
  bool latent_stream = true;
  bool latent_input_proj = true;

  void validate() const {
    require(hidden >= 1 && layers >= 1 && heads >= 1, "BackboneConfig: bad sizes");
    require(hidden % heads == 0, "BackboneConfig: hidden must be divisible by heads");
    require(dropout >= 0.0 && dropout < 1.0, "BackboneConfig: dropout must lie in [0,1)");
    require(vocab >= 2 && seq_len >= 1, "BackboneConfig: bad vocab/seq_len");
    if (latent_stream) {
      require(latent_blocks >= 1 && latent_dim >= 1, "BackboneConfig: bad latent shape");
    }
  }
  int joint_len() const { return seq_len + (latent_stream ? latent_blocks : 0); }
};

// Residual MLP used as the SEQ latent denoiser.
struct LatentMlpConfig {
  int input_dim = 32;  // S' * d'
  int width = 64;
  int depth = 3;
  bool time_conditioned = true;

  void validate() const {
    require(input_dim >= 1 && width >= 1 && depth >= 1, "LatentMlpConfig: bad sizes");
  }
};

// Named dense tensors. std::map keeps iteration deterministic, which the
// optimizer, checkpointing and gradient clipping all rely on.
template <class S>
struct ParameterStore {
  std::map<std::string, ad::Mat<S>> tensors;

  ad::Mat<S>& at(const std::string& name) {
    auto it = tensors.find(name);
    require(it != tensors.end(), "ParameterStore: unknown tensor " + name);
    return it->second;
  }
  const ad::Mat<S>& at(const std::string& name) const {
    auto it = tensors.find(name);
    require(it != tensors.end(), "ParameterStore: unknown tensor " + name);
    return it->second;
  }

  long param_count() const {
    long n = 0;
    for (const auto& [k, v] : tensors) n += static_cast<long>(v.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& [k, v] : tensors) {
      if (!v.allFinite()) return false;
    }
    return true;
  }

  template <class T>
  ParameterStore<T> cast() const {
    ParameterStore<T> out;
    for (const auto& [k, v] : tensors) out.tensors[k] = v.template cast<T>();
    return out;
  }
};

template <class S>
using GradientStore = ParameterStore<S>;

// Truncated normal (resample beyond two standard deviations).
template <class S>
void fill_trunc_normal(ad::Mat<S>& m, double std_dev, RngStream rng);

// Every tensor is seeded from a substream keyed by its name, so shared names
// initialize identically across architectures that contain them.
template <class S>
ParameterStore<S> init_transformer_params(const BackboneConfig& cfg, std::uint64_t seed);
template <class S>
ParameterStore<S> init_latent_mlp_params(const LatentMlpConfig& cfg, std::uint64_t seed);

// Binds parameter tensors to tape nodes, one leaf per (store, name), and
// exports accumulated gradients after backward().
template <class S>
class ModelGraph {
 public:
  ad::Tape<S> tape;

  int param(ParameterStore<S>& ps, const std::string& name) {
    auto key = std::make_pair(static_cast<const void*>(&ps), name);
    auto it = bound_.find(key);
    if (it != bound_.end()) return it->second;
    int id = tape.leaf(ps.at(name));
    bound_.emplace(std::move(key), id);
    return id;
  }

  std::function<int(const std::string&)> binder(ParameterStore<S>& ps) {
    return [this, &ps](const std::string& name) { return param(ps, name); };
  }

  // Sum the tape gradients of this store's bound tensors into `out` (which
  // must already mirror the store's shapes).
  void export_grads(const ParameterStore<S>& ps, GradientStore<S>& out) {
    for (const auto& [key, id] : bound_) {
      if (key.first != static_cast<const void*>(&ps)) continue;
      if (!tape.grad_touched(id)) continue;
      out.at(key.second) += tape.grad(id);
    }
  }

  double scalar(int node) const { return static_cast<double>(tape.val(node)(0, 0)); }

 private:
  std::map<std::pair<const void*, std::string>, int> bound_;
};

// Read-only binder for inference passes: parameters enter the tape as
// constants and no gradient state is kept.
template <class S>
std::function<int(const std::string&)> const_binder(ad::Tape<S>& tape,
                                                    const ParameterStore<S>& ps);

struct TransformerNodes {
  int txt_logits = -1;  // (B*S) x (K-1)
  int lat_head = -1;    // (B*S') x d', -1 without a latent stream
};

// Graph-building forward pass. latent_in is a (B*S') x d' node (or -1 when the
// config uses learnable slots / has no latent stream). t_norm holds one t/T
// per batch element.
template <class S>
TransformerNodes transformer_apply(ad::Tape<S>& tape,
                                   const std::function<int(const std::string&)>& p,
                                   const BackboneConfig& cfg, const TokenBatch& tokens,
                                   int latent_in, const std::vector<double>& t_norm,
                                   bool train_mode, RngStream* rng);

// Latent MLP forward; input/output node shape (B) x (S'*d').
template <class S>
int latent_mlp_apply(ad::Tape<S>& tape, const std::function<int(const std::string&)>& p,
                     const LatentMlpConfig& cfg, int y_in, const std::vector<double>& t_norm,
                     bool train_mode, RngStream* rng);

// --- batched inference wrappers (double precision outputs) ---

// Token probabilities (B*S) x K with zero mask column, plus the latent head
// (B*S') x d' when present.
template <class S>
std::pair<RowMatrixXd, RowMatrixXd> transformer_eval(const ParameterStore<S>& params,
                                                     const BackboneConfig& cfg,
                                                     const TokenBatch& tokens,
                                                     const RowMatrixXd* latents,
                                                     const std::vector<double>& t_norm);

template <class S>
RowMatrixXd latent_mlp_eval(const ParameterStore<S>& params, const LatentMlpConfig& cfg,
                            const RowMatrixXd& y, const std::vector<double>& t_norm);

// --- spec-level single-sequence ops ---

std::pair<CategoricalField, LatentState> mmdit_forward(const ParameterStore<double>& params,
                                                       const BackboneConfig& cfg,
                                                       const TokenSequence& tokens,
                                                       const LatentState& latents, double t_norm,
                                                       bool train_mode, RngStream& rng);

LatentState latent_denoiser_forward(const ParameterStore<double>& params,
                                    const LatentMlpConfig& cfg, const LatentState& latents,
                                    double t_norm, bool train_mode, RngStream& rng);

// Evaluates the closure (which must build a scalar 1x1 node), backpropagates,
// and returns {loss value, gradients}. Throws numerical_error on a non-finite
// loss.
template <class S>
std::pair<double, GradientStore<S>> loss_gradients(
    ParameterStore<S>& params,
    const std::function<int(ModelGraph<S>&, ParameterStore<S>&)>& loss_closure);

// Softmax over the K-1 non-mask logits, placed into K columns with an exactly
// zero mask column.
RowMatrixXd probs_with_zero_mask(const RowMatrixXd& logits);

// Sinusoidal features of t/T (half cosines, half sines).
RowMatrixXd timestep_features(const std::vector<double>& t_norm, int dim);

template <class S>
GradientStore<S> zero_like(const ParameterStore<S>& ps);

}  // namespace lddm
