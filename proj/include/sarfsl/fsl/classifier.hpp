#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sarfsl/core/json.hpp"
#include "sarfsl/nn/sequential.hpp"
#include "sarfsl/ssl/encoder.hpp"

namespace sarfsl::fsl {

using ssl::FeatureMatrix;

struct FSLTrainConfig {
  int iterations = 500;
  double learning_rate = 1e-3;  // cosine-decayed over `iterations`
  double label_smoothing = 0.1;
  double lambda_oe = 0.5;
  int id_batch_size = 64;  // the full support set is used when it is smaller
  int oe_batch_size = 64;
  double stage2_noise_std = 0.05;
  double flip_prob = 0.5;
  std::uint64_t seed = 0;
  int hidden = 256;
  bool l2_normalize = false;  // feature preprocessing before the head
  int feature_views = 4;      // precomputed Stage-2 views per support chip (1: clean only)
  double weight_decay = 0.0;

  void validate() const;
};

Json to_json(const FSLTrainConfig& cfg);
FSLTrainConfig fsl_config_from_json(const Json& j, const std::string& path);

enum class TrainMode { kBasic, kOE };
std::string to_string(TrainMode mode);

/// Linear(feat_dim, hidden) ReLU Linear(hidden, ways).
template <typename T>
nn::Sequential<T> build_head(int feat_dim, int hidden, int ways, Rng& rng);

struct Classifier {
  nn::Sequential<float> net;
  TrainMode mode = TrainMode::kBasic;
  FSLTrainConfig config;
  int ways = 0;
  int feat_dim = 0;
  std::vector<int> class_map;  // episode label -> pool class id, when known
  double temperature = 100.0;  // detector temperature used with this head
};

/// Fresh head initialised from cfg.seed.
Classifier make_classifier(int feat_dim, int ways, const FSLTrainConfig& cfg);

// Support features may carry several precomputed augmented views: with
// n = labels.size(), the matrix has n * V rows and row v * n + i is view v of
// sample i. Each step picks one view per sampled row uniformly at random.

/// Minimises the label-smoothed cross-entropy on the support set for
/// cfg.iterations Adam steps.
Classifier train_classifier_basic(const FeatureMatrix& support, const std::vector<int>& labels,
                                  const FSLTrainConfig& cfg);
/// Adds lambda_oe times the cross-entropy of an OE feature batch against the
/// uniform target. The OE batch comes from its own random stream, so with
/// lambda_oe = 0 the trajectory equals train_classifier_basic exactly.
Classifier train_classifier_oe(const FeatureMatrix& support, const std::vector<int>& labels,
                               const FeatureMatrix& oe_pool, const FSLTrainConfig& cfg);

/// Observer for tests: called after each optimizer step with 1-based index.
using HeadObserver = std::function<void(int iteration, const nn::Sequential<float>& net, double loss)>;
Classifier train_classifier(const FeatureMatrix& support, const std::vector<int>& labels,
                            const FeatureMatrix* oe_pool, const FSLTrainConfig& cfg,
                            const HeadObserver& observer = {});

struct OEObjective {
  double total = 0.0;
  double id_term = 0.0;
  double oe_term = 0.0;
};
/// Objective value of a head on fixed batches (no parameter change).
OEObjective evaluate_oe_objective(const Classifier& clf, const FeatureMatrix& id_features,
                                  const std::vector<int>& labels, const FeatureMatrix& oe_features,
                                  double label_smoothing, double lambda_oe);

/// Logits, rows = inputs, cols = ways. Shape error on feature-dimension mismatch.
FeatureMatrix predict(const Classifier& clf, const FeatureMatrix& features);

/// Row-wise argmax.
std::vector<int> argmax_rows(const FeatureMatrix& logits);
double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth);

void save_classifier(const std::filesystem::path& path, const Classifier& clf);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace sarfsl::fsl
