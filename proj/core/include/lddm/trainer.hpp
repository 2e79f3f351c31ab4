#pragma once

#include "lddm/checkpoint.hpp"
#include "lddm/config.hpp"
#include "lddm/metrics.hpp"
#include "lddm/models.hpp"
#include "lddm/oracle.hpp"

namespace lddm {

enum class Family { kMdlm, kFuji, kSeq };

Family parse_family(const std::string& s);
std::string family_name(Family f);
WeightMode parse_weight_mode(const std::string& s);

struct TrainConfig {
  Family family = Family::kMdlm;
  std::string run_id = "run";
  std::string out_dir = ".";
  std::uint64_t seed = 0;

  // data source: "sawtooth" or "target:<builtin-name>"
  std::string dataset = "sawtooth";
  SawtoothConfig data;
  int vocab = 3;

  // schedules (data channel linear, latent channel VP)
  int T = 1000;
  ContinuousKind cont_kind = ContinuousKind::kVpCosine;
  double s_offset = 0.008;

  // backbones
  int hidden = 64;
  int layers = 4;
  int heads = 4;
  double dropout = 0.1;
  int latent_blocks = 1;
  int latent_dim = 32;
  int mlp_width = 64;
  double sigma_lat_sq = 1e-4;

  // loss
  WeightMode weight_mode_x = WeightMode::kElbo;
  WeightMode weight_mode_y = WeightMode::kUnit;

  // optimization
  long steps = 5000;
  long stage1_steps = 500;
  long ramp_end_step = 2500;
  int batch = 256;
  double lr = 1e-3;
  double weight_decay = 0.01;
  long warmup_steps = 200;
  bool cosine_lr_decay = false;
  double ema_decay = 0.99;
  double grad_clip = 1.0;
  long enc_freeze_start = -1;  // optional encoder learning-rate ramp-down
  long enc_freeze_end = -1;

  // evaluation / checkpointing
  long eval_every = 500;
  long ckpt_every = 1000;
  int eval_sequences = 64;
  int eval_mc_draws = 16;
  int seq_latent_steps = 64;  // T_Y at sampling time

  std::string precision = "f32";  // f32 | f64

  void validate() const;
  static TrainConfig from_kv(const KvConfig& kv);
  KvConfig to_kv() const;
};

// 0 before stage1, linear to 1 on [stage1, ramp_end], then 1.
double lambda_latent_schedule(long step, const TrainConfig& cfg);

// Linear warmup to the peak rate, then constant or cosine decay to zero at
// the final step.
double lr_at_step(long step, const TrainConfig& cfg);

// 1 everywhere unless the optional encoder freeze window is set, in which
// case the encoder group's rate ramps linearly to 0 across it.
double encoder_lr_multiplier(long step, const TrainConfig& cfg);

// ema <- decay * ema + (1 - decay) * live, element-wise.
template <class S>
void ema_update(ParameterStore<S>& ema, const ParameterStore<S>& live, double decay);

struct TrainResult {
  std::string checkpoint_path;
  std::string manifest_path;
  std::string metrics_path;
  double final_loss = 0.0;
  long steps = 0;
  std::uint64_t checkpoint_hash = 0;
};

// Full training loop: batch draw, family loss, backprop, global-norm clip,
// AdamW with decoupled weight decay, EMA, periodic EMA-weight evaluation,
// checkpointing. Deterministic given the seed.
TrainResult train_run(const TrainConfig& cfg);

// Rebuild a model from a checkpoint archive for sampling/evaluation
// (EMA weights by default).
struct EvalBundle {
  Family family = Family::kMdlm;
  TrainConfig cfg;
  MdlmModel<float> mdlm;
  FujiModel<float> fuji;
  SeqModel<float> seq;
};

EvalBundle load_eval_bundle(const TrainConfig& cfg, const std::string& ckpt_path,
                            bool use_ema = true);

// Batched sampling through the bundle at the given data-channel budget.
// SEQ consumes cfg.seq_latent_steps latent evaluations first. Returns tokens
// and reports per-sample NFE.
TokenBatch sample_bundle(const EvalBundle& bundle, int budget, int n, RngStream& rng, long* nfe,
                         bool latent_ddim = false, double eta = 1.0);

// One Monte Carlo draw of the data-channel NELBO for the bundle's family.
double bundle_nelbo_draw(const EvalBundle& bundle, const TokenSequence& x0, RngStream& rng);

// Manifest written next to every run artifact: config snapshot, seed, and
// content hashes of the binary outputs.
void write_manifest(const std::string& path, const KvConfig& cfg_snapshot, std::uint64_t seed,
                    const std::vector<std::pair<std::string, std::uint64_t>>& hashes);

}  // namespace lddm
