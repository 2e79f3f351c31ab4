#pragma once

#include "lddm/continuous_chain.hpp"
#include "lddm/discrete_chain.hpp"
#include "lddm/encoder.hpp"

namespace lddm {

// Strictly decreasing sampling grid steps[0] = T > ... > steps.back() = 0.
struct TimeGrid {
  std::vector<int> steps;
  int intervals() const { return static_cast<int>(steps.size()) - 1; }
};

// t_k = round(k T / B), de-duplicated, endpoints pinned.
TimeGrid make_time_grid(int T, int budget);

struct LossBreakdown {
  double data_term = 0.0;
  double latent_term = 0.0;
  double total = 0.0;
  double lambda_latent = 0.0;
};

// --- model bundles ---

template <class S>
struct MdlmModel {
  BackboneConfig cfg;  // latent_stream = false
  ParameterStore<S> params;
};

template <class S>
struct FujiModel {
  BackboneConfig cfg;  // joint denoiser
  EncoderConfig enc_cfg;
  ParameterStore<S> theta;  // denoiser
  ParameterStore<S> phi;    // encoder
};

template <class S>
struct SeqModel {
  LatentMlpConfig mlp_cfg;
  BackboneConfig data_cfg;  // latent-conditioned, not time-conditioned
  EncoderConfig enc_cfg;
  ParameterStore<S> latent;
  ParameterStore<S> data;
  ParameterStore<S> phi;
};

template <class S>
MdlmModel<S> make_mdlm_model(int vocab, int seq_len, int hidden, int layers, int heads,
                             double dropout, std::uint64_t seed);
template <class S>
FujiModel<S> make_fuji_model(int vocab, int seq_len, int latent_blocks, int latent_dim, int hidden,
                             int layers, int heads, double dropout, double sigma_lat_sq,
                             std::uint64_t seed);
template <class S>
SeqModel<S> make_seq_model(int vocab, int seq_len, int latent_blocks, int latent_dim, int hidden,
                           int layers, int heads, double dropout, double sigma_lat_sq,
                           int mlp_width, std::uint64_t seed);

// --- training losses (graph-building; values are eager) ---
//
// Each builder returns the assembled scalar node plus the evaluated breakdown
// satisfying total = data_term + lambda_latent * latent_term. `fixed_t`
// overrides the uniform draw of t per element (tests, gradient checks).

template <class S>
struct LossNodes {
  int total = -1;
  LossBreakdown values;
};

template <class S>
LossNodes<S> mdlm_loss_build(ModelGraph<S>& g, MdlmModel<S>& model, const TokenBatch& x0,
                             const MaskSchedule& ms, WeightMode wx, bool train_mode,
                             RngStream& rng, const std::vector<int>* fixed_t = nullptr);

template <class S>
LossNodes<S> fuji_loss_build(ModelGraph<S>& g, FujiModel<S>& model, const TokenBatch& x0,
                             const MaskSchedule& ms, const ContinuousSchedule& cs, WeightMode wx,
                             WeightMode wy, double lambda_latent, bool train_mode, RngStream& rng,
                             const std::vector<int>* fixed_t = nullptr);

template <class S>
LossNodes<S> seq_loss_build(ModelGraph<S>& g, SeqModel<S>& model, const TokenBatch& x0,
                            const MaskSchedule& ms, const ContinuousSchedule& cs, WeightMode wx,
                            WeightMode wy, double lambda_latent, bool train_mode, RngStream& rng,
                            const std::vector<int>* fixed_t_data = nullptr,
                            const std::vector<int>* fixed_t_latent = nullptr);

// Value-only wrappers.
template <class S>
LossBreakdown mdlm_loss(MdlmModel<S>& model, const TokenBatch& x0, const MaskSchedule& ms,
                        WeightMode wx, bool train_mode, RngStream& rng);
template <class S>
LossBreakdown fuji_loss(FujiModel<S>& model, const TokenBatch& x0, const MaskSchedule& ms,
                        const ContinuousSchedule& cs, WeightMode wx, WeightMode wy,
                        double lambda_latent, bool train_mode, RngStream& rng);
template <class S>
LossBreakdown seq_loss(SeqModel<S>& model, const TokenBatch& x0, const MaskSchedule& ms,
                       const ContinuousSchedule& cs, WeightMode wx, WeightMode wy,
                       double lambda_latent, bool train_mode, RngStream& rng);

// --- samplers ---
//
// Samplers consume predictor callbacks so tests can plug exact posteriors in
// place of a network. `t` arrives as integer schedule steps.

using DataPredictFn =
    std::function<RowMatrixXd(const TokenBatch& xt, const std::vector<int>& t)>;
using JointPredictFn = std::function<std::pair<RowMatrixXd, RowMatrixXd>(
    const TokenBatch& xt, const RowMatrixXd& yt, const std::vector<int>& t)>;
using LatentPredictFn =
    std::function<RowMatrixXd(const RowMatrixXd& yt, const std::vector<int>& t)>;
using CondDataPredictFn =
    std::function<RowMatrixXd(const TokenBatch& xt, const RowMatrixXd& y0)>;

TokenBatch mdlm_sample_batch(const DataPredictFn& predict, const TimeGrid& grid, int n, int S,
                             int K, const MaskSchedule& ms, RngStream& rng, long* nfe = nullptr);

struct FujiSampleResult {
  TokenBatch tokens;
  RowMatrixXd latents;  // (n*S') x d'
  long nfe = 0;
};
// eta/use_ddim switch the latent channel to the DDIM kernel; the default is
// the ancestral step (eta = 1).
FujiSampleResult fuji_sample_batch(const JointPredictFn& predict, const TimeGrid& grid, int n,
                                   int S, int K, int latent_blocks, int latent_dim,
                                   const ContinuousSchedule& cs, const MaskSchedule& ms,
                                   RngStream& rng, bool use_ddim = false, double eta = 1.0);

struct SeqSampleResult {
  TokenBatch tokens;
  RowMatrixXd latents;  // block-renormalized y0 used for conditioning
  long nfe_latent = 0;
  long nfe_data = 0;
};
SeqSampleResult seq_sample_batch(const LatentPredictFn& latent_predict,
                                 const CondDataPredictFn& data_predict,
                                 const TimeGrid& latent_grid, const TimeGrid& data_grid, int n,
                                 int S, int K, int latent_blocks, int latent_dim,
                                 const ContinuousSchedule& cs, const MaskSchedule& ms,
                                 RngStream& rng, bool use_ddim = false, double eta = 1.0);

// Predictors over trained parameters (eval mode, outputs cast to double).
template <class S>
DataPredictFn make_mdlm_predictor(const MdlmModel<S>& model, int T);
template <class S>
JointPredictFn make_fuji_predictor(const FujiModel<S>& model, int T);
template <class S>
LatentPredictFn make_seq_latent_predictor(const SeqModel<S>& model, int T,
                                          long* call_count = nullptr);
template <class S>
CondDataPredictFn make_seq_data_predictor(const SeqModel<S>& model);

// Single-sequence convenience wrappers.
template <class S>
TokenSequence mdlm_sample(const MdlmModel<S>& model, const TimeGrid& grid, const MaskSchedule& ms,
                          RngStream& rng, long* nfe = nullptr);
template <class S>
std::pair<TokenSequence, LatentState> fuji_sample(const FujiModel<S>& model, const TimeGrid& grid,
                                                  const ContinuousSchedule& cs,
                                                  const MaskSchedule& ms, RngStream& rng,
                                                  long* nfe = nullptr);
template <class S>
TokenSequence seq_sample(const SeqModel<S>& model, const TimeGrid& latent_grid,
                         const TimeGrid& data_grid, const ContinuousSchedule& cs,
                         const MaskSchedule& ms, RngStream& rng, long* nfe_latent = nullptr,
                         long* nfe_data = nullptr);

// --- data-channel NELBO (validation) ---
//
// One Monte Carlo draw of the full discrete NELBO sum for a clean sequence:
// T * mask_nelbo_term at a uniformly drawn t, ELBO weights. Averaged over
// draws and sequences this estimates the data-channel negative ELBO in nats.

template <class S>
double mdlm_nelbo_draw(const MdlmModel<S>& model, const MaskSchedule& ms, const TokenSequence& x0,
                       RngStream& rng);
template <class S>
double fuji_nelbo_draw(const FujiModel<S>& model, const MaskSchedule& ms,
                       const ContinuousSchedule& cs, const TokenSequence& x0, RngStream& rng);
template <class S>
double seq_nelbo_draw(const SeqModel<S>& model, const MaskSchedule& ms, const TokenSequence& x0,
                      RngStream& rng);

}  // namespace lddm
