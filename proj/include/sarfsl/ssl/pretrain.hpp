#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sarfsl/augment/transforms.hpp"
#include "sarfsl/data_io/chip.hpp"
#include "sarfsl/ssl/encoder.hpp"

namespace sarfsl::ssl {

struct SSLConfig {
  std::string algorithm = "simclr";  // or "byol"
  double nt_xent_temperature = 0.01;
  double byol_ema_momentum = 0.9995;
  int epochs = 200;
  int batch_size = 1024;
  double learning_rate = 3e-4;
  double weight_decay = 1e-4;
  std::string lr_schedule = "cosine";  // or "constant"
  std::uint64_t seed = 0;
  EncoderSpec encoder;
  int proj_dim = 128;
  int projector_hidden = 0;  // 0: same as the encoder feature dimension
  bool projector_batchnorm = false;
  int predictor_hidden = 512;  // BYOL only

  void validate() const;
  double lr_at(std::int64_t step, std::int64_t total_steps) const;
};

Json to_json(const SSLConfig& cfg);
SSLConfig ssl_config_from_json(const Json& j, const std::string& path);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;  // learning rate of the epoch's first step
};
using TrainingLog = std::vector<EpochRecord>;

/// One JSON object per line: {"epoch":..,"mean_loss":..,"lr":..}.
std::string training_log_jsonl(const TrainingLog& log);

struct PretrainResult {
  Encoder encoder;
  nn::Sequential<float> projector;
  TrainingLog log;
};

/// Linear(feat, hidden) [BN] ReLU Linear(hidden, hidden) [BN] ReLU Linear(hidden, proj).
nn::Sequential<float> build_projector(int feat_dim, const SSLConfig& cfg, Rng& rng);
/// Linear(proj, hidden) [BN] ReLU Linear(hidden, proj).
nn::Sequential<float> build_predictor(const SSLConfig& cfg, Rng& rng);

/// target <- m * target + (1 - m) * online, for every parameter including
/// running statistics. Networks must share a structure.
void ema_update(nn::Sequential<float>& target, const nn::Sequential<float>& online, double momentum);

struct ByolNetworks {
  const nn::Sequential<float>& online_encoder;
  const nn::Sequential<float>& online_projector;
  const nn::Sequential<float>& target_encoder;
  const nn::Sequential<float>& target_projector;
};
/// Called after every optimizer step and its EMA update; `step` counts from 1.
using ByolObserver = std::function<void(std::int64_t step, const ByolNetworks& nets)>;

/// SimCLR: each batch chip becomes a view pair, views are encoded and
/// projected, and NT-Xent is minimised with Adam under the configured
/// schedule. Labels, if present, are ignored. The last partial batch of each
/// epoch is dropped.
PretrainResult pretrain_simclr(const DatasetPool& pool, const augment::AugmentationConfig& aug,
                               const SSLConfig& cfg);
/// BYOL: the online encoder/projector/predictor regresses an EMA target.
PretrainResult pretrain_byol(const DatasetPool& pool, const augment::AugmentationConfig& aug,
                             const SSLConfig& cfg, const ByolObserver& observer = {});
/// Dispatches on cfg.algorithm.
PretrainResult pretrain(const DatasetPool& pool, const augment::AugmentationConfig& aug,
                        const SSLConfig& cfg);

}  // namespace sarfsl::ssl
