#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sarfsl/data_io/chip.hpp"
#include "sarfsl/fsl/classifier.hpp"
#include "sarfsl/fsl/episode.hpp"
#include "sarfsl/ood/detector.hpp"
#include "sarfsl/ssl/encoder.hpp"

namespace sarfsl::eval {

using ssl::FeatureMatrix;

/// Encoder outputs for every chip of a pool, computed once. `views` holds
/// feature_views matrices: view 0 is the clean chip, the others are
/// stage2_augment draws, so heads see augmented support features without
/// re-running the encoder every step.
struct FeatureBank {
  std::vector<FeatureMatrix> views;

  const FeatureMatrix& clean() const { return views.front(); }
  int num_views() const { return static_cast<int>(views.size()); }
};

FeatureBank build_feature_bank(const ssl::Encoder& encoder, const DatasetPool& pool, int views,
                               double noise_std, double flip_prob, std::uint64_t seed);

/// Seed experiments use when they build the bank themselves.
std::uint64_t feature_bank_seed(std::uint64_t master_seed);

/// Rows of `bank` for the given pool indices, stacked view-major (row
/// v * n + i is view v of index i) as the head trainers expect.
FeatureMatrix gather_views(const FeatureBank& bank, const std::vector<std::size_t>& indices);
FeatureMatrix gather_rows(const FeatureMatrix& features, const std::vector<std::size_t>& indices);

enum class Method { kScratchSmall, kScratchDeep, kSslBasic, kSslOE };
std::string method_name(Method m);
Method method_from_name(const std::string& name);  // config error when unknown

struct RunOptions {
  int num_runs = 250;
  std::uint64_t master_seed = 0;
  int query_per_class = 0;  // 0: the full query split
  int workers = 1;
  std::string support_condition = tags::kSocTrain;
  std::string query_condition = tags::kSocTest;
};

/// Inputs shared by every run. Pointers are borrowed and must outlive the
/// call. `bank` belongs to `pool`; OE inputs are needed for Method::kSslOE and
/// for OOD experiments.
struct Context {
  const DatasetPool* pool = nullptr;
  const ssl::Encoder* encoder = nullptr;
  const FeatureBank* bank = nullptr;
  const DatasetPool* oe_pool = nullptr;
  const FeatureMatrix* oe_features = nullptr;
};

struct AccuracySummary {
  int ways = 0;
  int shots = 0;
  std::string method;
  std::string condition;  // query condition tag
  double mean_accuracy = 0.0;
  double ci95_halfwidth = 0.0;
  int num_runs = 0;
  std::vector<double> per_run;
};

struct MeanCI {
  double mean = 0.0;
  double ci95 = 0.0;
};
/// Mean and 1.96 * sample-stdev / sqrt(n); halfwidth 0 for a single value.
MeanCI mean_ci95(const std::vector<double>& values);

/// Seed of run r; episodes depend only on it, so every method sees the same
/// episodes for a given master seed.
std::uint64_t run_seed(std::uint64_t master_seed, int run);

/// Per run: sample an episode, train the method (`scratch_cfg` for scratch
/// baselines, `fsl_cfg` otherwise) and score the query set.
AccuracySummary run_accuracy_experiment(const Context& ctx, Method method, int ways, int shots,
                                        const RunOptions& options, const fsl::FSLTrainConfig& fsl_cfg,
                                        const fsl::FSLTrainConfig& scratch_cfg);
/// Same protocol with the query drawn from `eoc_condition` chips.
AccuracySummary run_eoc_experiment(const Context& ctx, Method method, int ways, int shots,
                                   RunOptions options, const fsl::FSLTrainConfig& fsl_cfg,
                                   const fsl::FSLTrainConfig& scratch_cfg,
                                   const std::string& eoc_condition = tags::kEocTest);

struct OODSet {
  std::string name;
  const DatasetPool* pool = nullptr;
  const FeatureMatrix* features = nullptr;  // clean encoder features of `pool`
};

inline constexpr const char* kHoldoutSet = "Holdout";
inline constexpr const char* kGroupSocId = "SOC-ID";
inline constexpr const char* kGroupEocId = "EOC-ID";
inline constexpr const char* kGroupHoldout = "Holdout-OOD";

struct OODOptions {
  RunOptions runs;
  int holdout_count = 3;
  ood::DetectorConfig detector;
  bool collect_scores = false;
  /// When nonempty, ID chips of this condition are scored too (group EOC-ID).
  std::string eoc_condition;
};

struct OODRow {
  std::string set;
  double basic = 0.0;  // mean AUROC %
  double oe = 0.0;
  std::vector<double> basic_per_run;
  std::vector<double> oe_per_run;
};

struct OODReport {
  int ways = 0;
  int shots = 0;
  int num_runs = 0;
  std::vector<OODRow> rows;  // Holdout first (when requested), then the sets in given order
  double basic_accuracy = 0.0;  // mean SOC query accuracy of the heads
  double oe_accuracy = 0.0;
  std::vector<ood::ScoreSet> basic_scores;  // filled when collect_scores
  std::vector<ood::ScoreSet> oe_scores;
};

/// Per run: one episode with holdout classes; basic and OE heads trained on
/// the same support rows with the same seed; ID query and every OOD set scored
/// with the MSP detector. OOD sets are subsampled to the ID query count.
/// Protocol-violation error when any OOD set or task chip also appears in the
/// OE pool.
OODReport run_ood_experiment(const Context& ctx, const std::vector<OODSet>& ood_sets, int ways, int shots,
                             const OODOptions& options, const fsl::FSLTrainConfig& fsl_cfg);

}  // namespace sarfsl::eval
