#pragma once

#include "lddm/backbone.hpp"

namespace lddm {

// Stochastic Gaussian encoder: tokens -> S' unit-norm latent blocks.
// The mean is the latent head of a joint transformer fed the tokens plus S'
// learnable latent slots; a fixed-variance Gaussian perturbation is applied
// and each block renormalized, so block norms are exactly 1 while the
// Gaussian-encoder form holds to first order in sigma_lat.
struct EncoderConfig {
  double sigma_lat_sq = 1e-4;
  BackboneConfig backbone;  // latent_stream on, slots instead of input proj, no time input

  void validate() const {
    require(sigma_lat_sq > 0.0, "EncoderConfig: sigma_lat_sq must be > 0");
    backbone.validate();
    require(backbone.latent_stream && !backbone.latent_input_proj,
            "EncoderConfig: encoder backbone must use latent slots");
    require(!backbone.time_conditioned, "EncoderConfig: encoder takes no timestep");
  }
};

// Canonical encoder backbone for a given data/latent geometry.
EncoderConfig make_encoder_config(int vocab, int seq_len, int latent_blocks, int latent_dim,
                                  int hidden, int layers, int heads, double dropout,
                                  double sigma_lat_sq = 1e-4);

template <class S>
ParameterStore<S> init_encoder_params(const EncoderConfig& cfg, std::uint64_t seed);

// Scale every d'-block to unit Euclidean norm. Zero blocks are rejected.
LatentState unit_normalize_blocks(const LatentState& y);

// Graph-building encode of a clean batch; returns a (B*S') x d' node carrying
// gradients into the encoder parameters. The same draw must be reused as both
// the forward-chain input and the loss target within one training step.
template <class S>
int encode_apply(ad::Tape<S>& tape, const std::function<int(const std::string&)>& p,
                 const EncoderConfig& cfg, const TokenBatch& x0, bool train_mode, RngStream& rng);

// Inference wrappers.
template <class S>
RowMatrixXd encode_eval_batch(const ParameterStore<S>& params_phi, const EncoderConfig& cfg,
                              const TokenBatch& x0, RngStream& rng);

LatentState encode(const ParameterStore<double>& params_phi, const EncoderConfig& cfg,
                   const TokenSequence& x0, RngStream& rng);

}  // namespace lddm
