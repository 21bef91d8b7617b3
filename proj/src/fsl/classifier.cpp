#include "sarfsl/fsl/classifier.hpp"

#include <algorithm>
#include <set>

#include "sarfsl/core/container.hpp"
#include "sarfsl/core/io.hpp"
#include "sarfsl/nn/loss.hpp"
#include "sarfsl/nn/optim.hpp"

namespace sarfsl::fsl {

using nn::Matrix;

void FSLTrainConfig::validate() const {
  require(iterations >= 0, ErrorKind::kConfig, "fsl.iterations must be >= 0");
  require(learning_rate > 0.0, ErrorKind::kConfig, "fsl.learning_rate must be positive");
  require(label_smoothing >= 0.0 && label_smoothing < 1.0, ErrorKind::kConfig,
          "fsl.label_smoothing must lie in [0, 1)");
  require(lambda_oe >= 0.0, ErrorKind::kConfig, "fsl.lambda_oe must be >= 0");
  require(id_batch_size >= 1 && oe_batch_size >= 1, ErrorKind::kConfig, "fsl batch sizes must be positive");
  require(stage2_noise_std >= 0.0, ErrorKind::kConfig, "fsl.stage2_noise_std must be >= 0");
  require(flip_prob >= 0.0 && flip_prob <= 1.0, ErrorKind::kConfig, "fsl.flip_prob must lie in [0, 1]");
  require(hidden >= 1, ErrorKind::kConfig, "fsl.hidden must be positive");
  require(feature_views >= 1, ErrorKind::kConfig, "fsl.feature_views must be >= 1");
  require(weight_decay >= 0.0, ErrorKind::kConfig, "fsl.weight_decay must be >= 0");
}

Json to_json(const FSLTrainConfig& c) {
  return Json{{"iterations", c.iterations},       {"learning_rate", c.learning_rate},
              {"label_smoothing", c.label_smoothing}, {"lambda_oe", c.lambda_oe},
              {"id_batch_size", c.id_batch_size}, {"oe_batch_size", c.oe_batch_size},
              {"stage2_noise_std", c.stage2_noise_std}, {"flip_prob", c.flip_prob},
              {"seed", c.seed},                   {"hidden", c.hidden},
              {"l2_normalize", c.l2_normalize},   {"feature_views", c.feature_views},
              {"weight_decay", c.weight_decay}};
}

FSLTrainConfig fsl_config_from_json(const Json& j, const std::string& path) {
  FSLTrainConfig c;
  JsonReader r(j, path);
  r.get("iterations", c.iterations);
  r.get("learning_rate", c.learning_rate);
  r.get("label_smoothing", c.label_smoothing);
  r.get("lambda_oe", c.lambda_oe);
  r.get("id_batch_size", c.id_batch_size);
  r.get("oe_batch_size", c.oe_batch_size);
  r.get("stage2_noise_std", c.stage2_noise_std);
  r.get("flip_prob", c.flip_prob);
  r.get("seed", c.seed);
  r.get("hidden", c.hidden);
  r.get("l2_normalize", c.l2_normalize);
  r.get("feature_views", c.feature_views);
  r.get("weight_decay", c.weight_decay);
  r.finish();
  return c;
}

std::string to_string(TrainMode mode) { return mode == TrainMode::kOE ? "oe" : "basic"; }

template <typename T>
nn::Sequential<T> build_head(int feat_dim, int hidden, int ways, Rng& rng) {
  require(feat_dim >= 1 && hidden >= 1 && ways >= 2, ErrorKind::kParameter, "head: invalid dimensions");
  nn::Sequential<T> net(nn::Shape{feat_dim, 1, 1});
  net.template add<nn::Linear>(hidden, rng);
  net.template add<nn::ReLU>();
  net.template add<nn::Linear>(ways, rng);
  net.set_input_grad_required(false);
  return net;
}

template nn::Sequential<float> build_head<float>(int, int, int, Rng&);
template nn::Sequential<double> build_head<double>(int, int, int, Rng&);

Classifier make_classifier(int feat_dim, int ways, const FSLTrainConfig& cfg) {
  Classifier clf;
  Rng rng(derive_seed(cfg.seed, 10));
  clf.net = build_head<float>(feat_dim, cfg.hidden, ways, rng);
  clf.config = cfg;
  clf.ways = ways;
  clf.feat_dim = feat_dim;
  return clf;
}

namespace {

void normalize_columns(Matrix<float>& x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const float n = x.col(j).norm();
    if (n > 0.0f) x.col(j) /= n;
  }
}

// (features, batch) matrix from the given rows.
Matrix<float> gather(const FeatureMatrix& features, const std::vector<std::size_t>& rows, bool l2) {
  Matrix<float> x(features.cols(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t b = 0; b < rows.size(); ++b) {
    x.col(static_cast<Eigen::Index>(b)) = features.row(static_cast<Eigen::Index>(rows[b])).transpose();
  }
  if (l2) normalize_columns(x);
  return x;
}

int check_labels(const std::vector<int>& labels) {
  require(!labels.empty(), ErrorKind::kParameter, "classifier: empty support set");
  int ways = 0;
  std::set<int> distinct;
  for (int l : labels) {
    require(l >= 0, ErrorKind::kParameter, "classifier: negative label");
    ways = std::max(ways, l + 1);
    distinct.insert(l);
  }
  require(distinct.size() >= 2, ErrorKind::kParameter,
          "classifier: degenerate labels, the support set holds a single class");
  return ways;
}

}  // namespace

Classifier train_classifier(const FeatureMatrix& support, const std::vector<int>& labels,
                            const FeatureMatrix* oe_pool, const FSLTrainConfig& cfg,
                            const HeadObserver& observer) {
  cfg.validate();
  const int ways = check_labels(labels);
  const std::size_t n = labels.size();
  require(support.rows() > 0 && static_cast<std::size_t>(support.rows()) % n == 0, ErrorKind::kShape,
          "classifier: support row count " + std::to_string(support.rows()) +
              " is not a multiple of the label count " + std::to_string(n));
  const std::size_t views = static_cast<std::size_t>(support.rows()) / n;
  if (oe_pool != nullptr) {
    require(oe_pool->rows() > 0, ErrorKind::kConfig, "outlier exposure needs a nonempty OE feature pool");
    require(oe_pool->cols() == support.cols(), ErrorKind::kShape,
            "classifier: OE features and support features differ in dimension");
  }

  Classifier clf = make_classifier(static_cast<int>(support.cols()), ways, cfg);
  clf.mode = oe_pool != nullptr ? TrainMode::kOE : TrainMode::kBasic;
  nn::Sequential<float>& net = clf.net;
  const auto params = net.parameters();
  nn::Adam<float> opt(nn::AdamOptions{.weight_decay = cfg.weight_decay});
  Rng id_rng(derive_seed(cfg.seed, 11));
  Rng oe_rng(derive_seed(cfg.seed, 12));
  const bool full_batch = n <= static_cast<std::size_t>(cfg.id_batch_size);
  const float lambda = static_cast<float>(cfg.lambda_oe);

  std::vector<std::size_t> rows;
  std::vector<int> batch_labels;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> idx(n);
    if (full_batch) {
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    } else {
      idx = sample_without_replacement(n, static_cast<std::size_t>(cfg.id_batch_size), id_rng);
    }
    rows.clear();
    batch_labels.clear();
    for (std::size_t i : idx) {
      const std::size_t v = views > 1 ? static_cast<std::size_t>(id_rng.below(views)) : 0;
      rows.push_back(v * n + i);
      batch_labels.push_back(labels[i]);
    }

    net.zero_grad();
    const Matrix<float> logits = net.forward(gather(support, rows, cfg.l2_normalize));
    const auto id = nn::soft_cross_entropy<float>(
        logits, nn::smoothed_targets<float>(batch_labels, ways, cfg.label_smoothing));
    net.backward(id.grad);
    double loss = id.loss;

    if (oe_pool != nullptr) {
      const std::size_t m = static_cast<std::size_t>(oe_pool->rows());
      const auto oe_idx =
          sample_without_replacement(m, std::min(m, static_cast<std::size_t>(cfg.oe_batch_size)), oe_rng);
      const Matrix<float> oe_logits = net.forward(gather(*oe_pool, oe_idx, cfg.l2_normalize));
      const auto oe = nn::soft_cross_entropy<float>(
          oe_logits, nn::uniform_targets<float>(ways, static_cast<int>(oe_idx.size())));
      net.backward(lambda * oe.grad);
      loss += cfg.lambda_oe * oe.loss;
    }

    opt.step(params, nn::cosine_lr(cfg.learning_rate, it, cfg.iterations));
    if (observer) observer(it + 1, net, loss);
  }
  return clf;
}

Classifier train_classifier_basic(const FeatureMatrix& support, const std::vector<int>& labels,
                                  const FSLTrainConfig& cfg) {
  return train_classifier(support, labels, nullptr, cfg);
}

Classifier train_classifier_oe(const FeatureMatrix& support, const std::vector<int>& labels,
                               const FeatureMatrix& oe_pool, const FSLTrainConfig& cfg) {
  return train_classifier(support, labels, &oe_pool, cfg);
}

OEObjective evaluate_oe_objective(const Classifier& clf, const FeatureMatrix& id_features,
                                  const std::vector<int>& labels, const FeatureMatrix& oe_features,
                                  double label_smoothing, double lambda_oe) {
  require(static_cast<std::size_t>(id_features.rows()) == labels.size(), ErrorKind::kShape,
          "objective: feature rows and labels differ");
  const Matrix<float> id_logits = predict(clf, id_features).transpose();
  const Matrix<float> oe_logits = predict(clf, oe_features).transpose();
  OEObjective out;
  out.id_term = nn::soft_cross_entropy<float>(
                    id_logits, nn::smoothed_targets<float>(labels, clf.ways, label_smoothing))
                    .loss;
  out.oe_term = nn::soft_cross_entropy<float>(
                    oe_logits, nn::uniform_targets<float>(clf.ways, static_cast<int>(oe_features.rows())))
                    .loss;
  out.total = out.id_term + lambda_oe * out.oe_term;
  return out;
}

FeatureMatrix predict(const Classifier& clf, const FeatureMatrix& features) {
  require(features.cols() == clf.feat_dim, ErrorKind::kShape,
          "predict: features have dimension " + std::to_string(features.cols()) + ", head expects " +
              std::to_string(clf.feat_dim));
  Matrix<float> x = features.transpose();
  if (clf.config.l2_normalize) normalize_columns(x);
  return clf.net.infer(x).transpose();
}

std::vector<int> argmax_rows(const FeatureMatrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best;
    logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth) {
  require(predicted.size() == truth.size() && !truth.empty(), ErrorKind::kShape,
          "accuracy: prediction and label lists differ or are empty");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
}

void save_classifier(const std::filesystem::path& path, const Classifier& clf) {
  Container c;
  c.kind = "classifier";
  c.header = {{"mode", to_string(clf.mode)},
              {"ways", clf.ways},
              {"feat_dim", clf.feat_dim},
              {"class_map", clf.class_map},
              {"temperature", clf.temperature},
              {"config", to_json(clf.config)},
              {"arch_descriptor", clf.net.describe()},
              {"param_checksum", hex64(nn::parameter_checksum(clf.net))}};
  c.values = nn::flatten_parameters(clf.net);
  save_container(path, c);
}

Classifier load_classifier(const std::filesystem::path& path) {
  const Container c = load_container(path, "classifier");
  const std::string origin = path.string();
  try {
    const Json& h = c.header;
    const FSLTrainConfig cfg = fsl_config_from_json(h.at("config"), "config");
    Classifier clf = make_classifier(h.at("feat_dim").get<int>(), h.at("ways").get<int>(), cfg);
    const std::string mode = h.at("mode").get<std::string>();
    require(mode == "basic" || mode == "oe", ErrorKind::kSchema, origin + ": unknown head mode " + mode);
    clf.mode = mode == "oe" ? TrainMode::kOE : TrainMode::kBasic;
    h.at("class_map").get_to(clf.class_map);
    clf.temperature = h.at("temperature").get<double>();
    require(clf.net.describe() == h.at("arch_descriptor").get<std::string>(), ErrorKind::kSchema,
            origin + ": head architecture mismatch");
    require(c.values.size() == clf.net.num_parameters(), ErrorKind::kSchema,
            origin + ": parameter data size mismatch");
    nn::assign_parameters(clf.net, c.values);
    require(hex64(nn::parameter_checksum(clf.net)) == h.at("param_checksum").get<std::string>(),
            ErrorKind::kSchema, origin + ": parameter checksum mismatch");
    return clf;
  } catch (const Json::exception& e) {
    fail(ErrorKind::kSchema, origin + ": malformed classifier header: " + e.what());
  }
}

}  // namespace sarfsl::fsl
