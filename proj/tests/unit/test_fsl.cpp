#include <map>
#include <set>

#include "criteria.hpp"
#include "sarfsl/data_io/synthetic.hpp"
#include "sarfsl/fsl/classifier.hpp"
#include "sarfsl/fsl/episode.hpp"
#include "sarfsl/fsl/scratch.hpp"
#include "sarfsl/nn/loss.hpp"
#include "test_util.hpp"

namespace sarfsl::fsl {
namespace {

using testing::error_kind_of;

DatasetPool task_pool(int classes = 10, int per_class = 20) {
  SyntheticSpec s;
  s.num_classes = classes;
  s.chips_per_class = per_class;
  s.chip_size = 16;
  return generate_synthetic_pool(s, 1);
}

TEST(Episode, StructuralInvariants) {
  const DatasetPool pool = task_pool();
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    EpisodeSpec spec;
    spec.ways = 2 + static_cast<int>(rng.below(5));
    spec.shots = 1 + static_cast<int>(rng.below(10));
    spec.query_per_class = static_cast<int>(rng.below(6));
    spec.holdout_count = static_cast<int>(rng.below(4));
    const Episode ep = sample_episode(pool, spec, rng);
    ASSERT_EQ(ep.support.size(), static_cast<std::size_t>(spec.ways * spec.shots));
    ASSERT_EQ(ep.class_map.size(), static_cast<std::size_t>(spec.ways));
    ASSERT_EQ(ep.holdout_classes.size(), static_cast<std::size_t>(spec.holdout_count));
    std::set<int> classes(ep.class_map.begin(), ep.class_map.end());
    EXPECT_EQ(classes.size(), ep.class_map.size());
    for (int h : ep.holdout_classes) EXPECT_FALSE(classes.count(h));
    std::set<std::size_t> used;
    for (std::size_t k = 0; k < ep.support.size(); ++k) {
      const std::size_t i = ep.support[k];
      EXPECT_EQ(ep.support_labels[k], static_cast<int>(k) / spec.shots);  // class-major
      EXPECT_EQ((*pool.labels)[i], ep.class_map[static_cast<std::size_t>(ep.support_labels[k])]);
      EXPECT_EQ(pool.tag(i, tags::kCondition), tags::kSocTrain);
      EXPECT_TRUE(used.insert(i).second);
    }
    const std::size_t per_class_query = spec.query_per_class > 0 ? static_cast<std::size_t>(spec.query_per_class) : 10;
    EXPECT_EQ(ep.query.size(), per_class_query * static_cast<std::size_t>(spec.ways));
    for (std::size_t k = 0; k < ep.query.size(); ++k) {
      const std::size_t i = ep.query[k];
      EXPECT_EQ((*pool.labels)[i], ep.class_map[static_cast<std::size_t>(ep.query_labels[k])]);
      EXPECT_EQ(pool.tag(i, tags::kCondition), tags::kSocTest);
      EXPECT_TRUE(used.insert(i).second);
    }
    for (std::size_t i : ep.holdout_query) {
      const int c = (*pool.labels)[i];
      EXPECT_TRUE(std::find(ep.holdout_classes.begin(), ep.holdout_classes.end(), c) != ep.holdout_classes.end());
      EXPECT_EQ(pool.tag(i, tags::kCondition), tags::kSocTest);
    }
    if (spec.holdout_count > 0) {
      EXPECT_EQ(ep.holdout_query.size(), static_cast<std::size_t>(spec.holdout_count) * per_class_query);
    }
  }
}

TEST(Episode, ClassAndChipFrequenciesAreUniform) {
  const DatasetPool pool = task_pool(10, 20);
  Rng rng(7);
  const int trials = 4000;
  std::map<int, int> class_hits;
  std::map<std::size_t, int> chip_hits;
  for (int t = 0; t < trials; ++t) {
    const Episode ep = sample_episode(pool, 3, 2, 1, 0, rng);
    for (int c : ep.class_map) ++class_hits[c];
    for (std::size_t i : ep.support) ++chip_hits[i];
  }
  // Each class appears with probability 3/10; each SOC-train chip of a chosen
  // class with probability 2/10, i.e. 0.06 overall. 5-sigma binomial bounds.
  for (int c = 0; c < 10; ++c) {
    const double p = 0.3;
    EXPECT_NEAR(class_hits[c], trials * p, 5.0 * std::sqrt(trials * p * (1 - p))) << "class " << c;
  }
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool.tag(i, tags::kCondition) != tags::kSocTrain) {
      EXPECT_EQ(chip_hits.count(i), 0u);
      continue;
    }
    const double p = 0.06;
    EXPECT_NEAR(chip_hits[i], trials * p, 5.0 * std::sqrt(trials * p * (1 - p))) << "chip " << i;
  }
}

TEST(Episode, SharedConditionSplitsOneList) {
  const DatasetPool pool = task_pool(4, 10);
  EpisodeSpec spec;
  spec.ways = 4;
  spec.shots = 3;
  spec.support_condition = "";
  spec.query_condition = "";
  Rng rng(1);
  const Episode ep = sample_episode(pool, spec, rng);
  EXPECT_EQ(ep.query.size(), 4u * 7u);
  std::set<std::size_t> all(ep.support.begin(), ep.support.end());
  for (std::size_t i : ep.query) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), pool.size());
}

TEST(Episode, DeficitsAreSamplingErrors) {
  const DatasetPool pool = task_pool(5, 10);
  Rng rng(1);
  EXPECT_EQ(error_kind_of([&] { sample_episode(pool, 6, 1, 1, 0, rng); }), ErrorKind::kSampling);
  EXPECT_EQ(error_kind_of([&] { sample_episode(pool, 5, 1, 1, 1, rng); }), ErrorKind::kSampling);
  EXPECT_EQ(error_kind_of([&] { sample_episode(pool, 2, 6, 1, 0, rng); }), ErrorKind::kSampling);
  EXPECT_EQ(error_kind_of([&] { sample_episode(pool, 2, 1, 6, 0, rng); }), ErrorKind::kSampling);
  EXPECT_EQ(error_kind_of([&] { sample_episode(strip_labels(pool), 2, 1, 1, 0, rng); }), ErrorKind::kSampling);
}

TEST(Episode, DeterministicAndReplayable) {
  const DatasetPool pool = task_pool();
  Rng a(9), b(9);
  const Episode x = sample_episode(pool, 5, 5, 3, 2, a);
  const Episode y = sample_episode(pool, 5, 5, 3, 2, b);
  EXPECT_EQ(to_json(x), to_json(y));
  const Episode z = episode_from_json(to_json(x));
  EXPECT_EQ(z.support, x.support);
  EXPECT_EQ(z.holdout_query, x.holdout_query);
  EXPECT_EQ(z.class_map, x.class_map);
}

// Gaussian clusters around well-separated centres.
FeatureMatrix clusters(Rng& rng, int ways, int per_class, int dim, std::vector<int>& labels, double spread = 0.3) {
  std::vector<Eigen::VectorXf> centres;
  Rng crng(1234);
  for (int c = 0; c < ways; ++c) {
    Eigen::VectorXf v(dim);
    for (int d = 0; d < dim; ++d) v(d) = static_cast<float>(crng.normal() * 3.0);
    centres.push_back(v);
  }
  FeatureMatrix f(ways * per_class, dim);
  labels.clear();
  for (int c = 0; c < ways; ++c) {
    for (int k = 0; k < per_class; ++k) {
      for (int d = 0; d < dim; ++d) f(c * per_class + k, d) = centres[c](d) + static_cast<float>(rng.normal() * spread);
      labels.push_back(c);
    }
  }
  return f;
}

TEST(Classifier, LambdaZeroReproducesBasicTrajectory) {
  const auto r = criteria::check_lambda_zero(21);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Classifier, LearnsSeparableClusters) {
  Rng rng(2);
  std::vector<int> labels;
  const FeatureMatrix support = clusters(rng, 4, 5, 16, labels);
  std::vector<int> qlabels;
  const FeatureMatrix query = clusters(rng, 4, 20, 16, qlabels);
  FSLTrainConfig cfg;
  cfg.iterations = 200;
  const Classifier clf = train_classifier_basic(support, labels, cfg);
  EXPECT_GE(accuracy_percent(argmax_rows(predict(clf, query)), qlabels), 95.0);
}

TEST(Classifier, OutlierExposureFlattensOodScores) {
  Rng rng(4);
  std::vector<int> labels;
  const FeatureMatrix support = clusters(rng, 3, 5, 8, labels);
  FeatureMatrix oe(300, 8);
  for (Eigen::Index i = 0; i < oe.size(); ++i) oe.data()[i] = static_cast<float>(rng.normal() * 6.0);
  FeatureMatrix ood(100, 8);
  for (Eigen::Index i = 0; i < ood.size(); ++i) ood.data()[i] = static_cast<float>(rng.normal() * 6.0);
  FSLTrainConfig cfg;
  cfg.iterations = 300;
  cfg.lambda_oe = 1.0;
  const Classifier basic = train_classifier_basic(support, labels, cfg);
  const Classifier with_oe = train_classifier_oe(support, labels, oe, cfg);
  auto mean_msp = [](const FeatureMatrix& logits) {
    double s = 0.0;
    for (double v : ood::msp_scores(logits, 1.0)) s += v;
    return s / static_cast<double>(logits.rows());
  };
  EXPECT_LT(mean_msp(predict(with_oe, ood)), mean_msp(predict(basic, ood)) - 0.1);
  EXPECT_EQ(with_oe.mode, TrainMode::kOE);
}

TEST(Classifier, ObjectiveDecomposition) {
  Rng rng(5);
  std::vector<int> labels;
  const FeatureMatrix support = clusters(rng, 3, 4, 6, labels);
  FeatureMatrix oe(10, 6);
  for (Eigen::Index i = 0; i < oe.size(); ++i) oe.data()[i] = static_cast<float>(rng.normal());
  FSLTrainConfig cfg;
  const Classifier clf = make_classifier(6, 3, cfg);
  const OEObjective a = evaluate_oe_objective(clf, support, labels, oe, 0.1, 0.0);
  const OEObjective b = evaluate_oe_objective(clf, support, labels, oe, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(a.total, a.id_term);
  EXPECT_NEAR(b.total, b.id_term + 0.5 * b.oe_term, 1e-12);
  EXPECT_GE(b.oe_term, std::log(3.0) - 1e-9);  // cross-entropy to uniform is at least log M
}

TEST(Classifier, HeadObserverSeesEveryStep) {
  Rng rng(6);
  std::vector<int> labels;
  const FeatureMatrix support = clusters(rng, 2, 3, 4, labels);
  FSLTrainConfig cfg;
  cfg.iterations = 25;
  int calls = 0;
  train_classifier(support, labels, nullptr, cfg, [&](int it, const nn::Sequential<float>&, double) {
    EXPECT_EQ(it, ++calls);
  });
  EXPECT_EQ(calls, 25);
}

TEST(Classifier, ZeroIterationsKeepsInitialHead) {
  Rng rng(6);
  std::vector<int> labels;
  const FeatureMatrix support = clusters(rng, 2, 3, 4, labels);
  FSLTrainConfig cfg;
  cfg.iterations = 0;
  cfg.seed = 3;
  const Classifier trained = train_classifier_basic(support, labels, cfg);
  EXPECT_EQ(nn::flatten_parameters(trained.net), nn::flatten_parameters(make_classifier(4, 2, cfg).net));
}

TEST(Classifier, Errors) {
  Rng rng(7);
  std::vector<int> labels;
  const FeatureMatrix support = clusters(rng, 2, 3, 4, labels);
  FSLTrainConfig cfg;
  cfg.iterations = 2;
  const std::vector<int> one_class(labels.size(), 0);
  EXPECT_EQ(error_kind_of([&] { train_classifier_basic(support, one_class, cfg); }), ErrorKind::kParameter);
  const FeatureMatrix empty(0, 4);
  EXPECT_EQ(error_kind_of([&] { train_classifier_oe(support, labels, empty, cfg); }), ErrorKind::kConfig);
  const Classifier clf = train_classifier_basic(support, labels, cfg);
  EXPECT_EQ(error_kind_of([&] { predict(clf, FeatureMatrix(2, 5)); }), ErrorKind::kShape);
  FSLTrainConfig bad;
  bad.label_smoothing = 1.0;
  EXPECT_EQ(error_kind_of([&] { bad.validate(); }), ErrorKind::kConfig);
}

TEST(Classifier, SaveLoadRoundTrip) {
  const auto dir = testing::temp_dir("clf");
  Rng rng(8);
  std::vector<int> labels;
  const FeatureMatrix support = clusters(rng, 3, 3, 5, labels);
  FSLTrainConfig cfg;
  cfg.iterations = 10;
  cfg.l2_normalize = true;
  Classifier clf = train_classifier_basic(support, labels, cfg);
  clf.class_map = {4, 1, 7};
  save_classifier(dir / "h.ckpt", clf);
  const Classifier back = load_classifier(dir / "h.ckpt");
  EXPECT_EQ(back.class_map, clf.class_map);
  EXPECT_TRUE(predict(back, support).isApprox(predict(clf, support)));
}

TEST(FslConfig, JsonRoundTrip) {
  FSLTrainConfig c;
  c.iterations = 7;
  c.l2_normalize = true;
  EXPECT_EQ(to_json(fsl_config_from_json(to_json(c), "fsl")), to_json(c));
}

TEST(Scratch, TrainsAndIsDeterministic) {
  const DatasetPool pool = task_pool(2, 10);
  std::vector<const Chip*> chips;
  std::vector<int> labels;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    chips.push_back(&pool.chips[i]);
    labels.push_back((*pool.labels)[i]);
  }
  FSLTrainConfig cfg;
  cfg.iterations = 60;
  cfg.seed = 2;
  for (const char* arch : {kScratchSmall, kScratchDeep}) {
    const ScratchModel a = train_scratch_baseline(chips, labels, arch, cfg);
    const ScratchModel b = train_scratch_baseline(chips, labels, arch, cfg);
    EXPECT_EQ(nn::flatten_parameters(a.net), nn::flatten_parameters(b.net)) << arch;
    const FeatureMatrix logits = predict(a, chips);
    EXPECT_EQ(logits.rows(), 20);
    EXPECT_EQ(logits.cols(), 2);
    EXPECT_GE(accuracy_percent(argmax_rows(logits), labels), 80.0) << arch;
  }
  EXPECT_EQ(error_kind_of([&] { train_scratch_baseline(chips, labels, "vgg", cfg); }), ErrorKind::kConfig);
}

}  // namespace
}  // namespace sarfsl::fsl
