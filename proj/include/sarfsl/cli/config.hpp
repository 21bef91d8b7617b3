#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sarfsl/augment/transforms.hpp"
#include "sarfsl/core/json.hpp"
#include "sarfsl/data_io/chip.hpp"
#include "sarfsl/data_io/synthetic.hpp"
#include "sarfsl/fsl/classifier.hpp"
#include "sarfsl/ood/detector.hpp"
#include "sarfsl/ssl/pretrain.hpp"

namespace sarfsl::cli {

/// A pool is either a manifest file or a synthetic spec plus seed.
struct PoolSource {
  std::string manifest;  // relative paths resolve against the config directory
  std::optional<SyntheticSpec> synthetic;
  std::uint64_t seed = 0;
};

/// Labeled task pool. For synthetic pools, eoc_shift > 0 appends a shifted
/// copy (same class templates) whose chips are tagged EOC-test.
struct TaskPoolConfig {
  PoolSource source;
  double eoc_shift = 0.0;
  int eoc_chips_per_class = 0;  // 0: as the task pool
  std::uint64_t eoc_seed = 1;
};

struct OODSetConfig {
  std::string name;
  PoolSource source;
};

struct EvaluateGrid {
  std::vector<int> ways{5};
  std::vector<int> shots{1, 5, 10, 25};
  std::vector<std::string> methods{"scratch-small_conv", "scratch-deep_conv", "ssl+basic", "ssl+oe"};
  int num_runs = 250;
  int query_per_class = 0;
  bool eoc = false;
};

struct OODGrid {
  int ways = 7;
  std::vector<int> shots{1, 5, 25};
  int num_runs = 250;
  int holdout_count = 3;
  int query_per_class = 0;
  bool fake_data = true;
  int fake_data_count = 500;
  std::uint64_t fake_data_seed = 1;
  std::vector<OODSetConfig> sets;
  bool score_eoc = true;  // score EOC-tagged ID chips when the task pool has them
};

struct PlotConfig {
  int bins = 30;
  std::vector<double> tpr_targets{0.8};
};

struct RunConfig {
  std::filesystem::path base_dir;
  TaskPoolConfig task_pool;
  std::optional<PoolSource> pretrain_pool;
  augment::AugmentationConfig augment;
  ssl::SSLConfig ssl;
  fsl::FSLTrainConfig fsl;
  fsl::FSLTrainConfig scratch;
  ood::DetectorConfig detector;
  std::uint64_t master_seed = 0;
  int workers = 1;
  EvaluateGrid evaluate;
  OODGrid ood;
  PlotConfig plot;

  /// Structural checks shared by every command; config errors only.
  void validate() const;
};

inline constexpr const char* kFakeDataSet = "FakeData";

Json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir);

/// Reads and parses the file, applies "dotted.key=value" overrides, then
/// decodes and validates. Config-not-found when the file is missing.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

std::filesystem::path resolve_path(const RunConfig& cfg, const std::string& path);
DatasetPool load_pool(const RunConfig& cfg, const PoolSource& source);
/// Task pool including the optional EOC chips.
DatasetPool load_task_pool(const RunConfig& cfg);
/// Unlabeled; config error when the config has no pretraining pool.
DatasetPool load_pretrain_pool(const RunConfig& cfg);

}  // namespace sarfsl::cli
