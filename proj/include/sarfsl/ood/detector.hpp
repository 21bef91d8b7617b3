#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sarfsl/core/json.hpp"
#include "sarfsl/ssl/encoder.hpp"

namespace sarfsl::ood {

struct DetectorConfig {
  double temperature = 100.0;
  std::optional<double> threshold;

  void validate() const;
};

Json to_json(const DetectorConfig& cfg);
DetectorConfig detector_config_from_json(const Json& j, const std::string& path);

/// max_k softmax(logits / tau)_k, evaluated as 1 / sum_k exp((z_k - z_max) / tau)
/// so the result lies in [1/M, 1] without overflow.
double msp_score(const std::vector<double>& logits, double temperature);
/// One score per row of a (inputs x M) logit matrix.
std::vector<double> msp_scores(const ssl::FeatureMatrix& logits, double temperature);

enum class Decision { kAcceptId, kRejectOod };
/// Accept iff score >= threshold.
Decision decide(double score, double threshold);

/// Percentage of (ID, OOD) pairs where the ID score is higher, ties counting
/// one half. Sort-based, exact. Metric error if either list is empty or holds
/// a NaN.
double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores);

/// Largest beta with fraction(id_scores >= beta) >= target_tpr: the k-th
/// largest score for the smallest k with k / n >= target_tpr.
double tpr_threshold(const std::vector<double>& id_scores, double target_tpr);

/// AUROC at each temperature of a grid, for manual temperature selection.
std::vector<std::pair<double, double>> sweep_temperature(const ssl::FeatureMatrix& id_logits,
                                                         const ssl::FeatureMatrix& ood_logits,
                                                         const std::vector<double>& temperatures);

struct ScoreSet {
  std::string group;
  std::vector<double> scores;
};

// Score files: "#ways=<M>" comment line, header "group<TAB>score", then one
// record per score, scores printed with 17 significant digits.
std::string format_score_file(const std::vector<ScoreSet>& sets, int ways);
void write_score_file(const std::filesystem::path& path, const std::vector<ScoreSet>& sets, int ways);

struct ScoreFile {
  int ways = 0;  // 0 when the file carries no #ways line
  std::vector<ScoreSet> sets;  // groups in first-appearance order
};
/// Empty-scores error when the file holds no records.
ScoreFile read_score_file(const std::filesystem::path& path);

}  // namespace sarfsl::ood
