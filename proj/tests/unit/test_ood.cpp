#include <cmath>
#include <limits>

#include "criteria.hpp"
#include "oracles.hpp"
#include "sarfsl/core/io.hpp"
#include "sarfsl/ood/detector.hpp"
#include "test_util.hpp"

namespace sarfsl::ood {
namespace {

using testing::error_kind_of;

TEST(Msp, Contracts) {
  const auto r = criteria::check_msp(20000, 5);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Msp, KnownValues) {
  EXPECT_DOUBLE_EQ(msp_score({0.0, 0.0}, 1.0), 0.5);
  EXPECT_NEAR(msp_score({std::log(3.0), 0.0}, 1.0), 0.75, 1e-15);
  // Large logits do not overflow.
  EXPECT_DOUBLE_EQ(msp_score({1e6, 0.0}, 1.0), 1.0);
}

TEST(Msp, RowsMatchScalarForm) {
  ssl::FeatureMatrix logits(3, 4);
  logits << 1, 2, 3, 4, 0, 0, 0, 0, -1, 5, 2, 2;
  const auto s = msp_scores(logits, 10.0);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s[1], 0.25);
  EXPECT_DOUBLE_EQ(s[0], msp_score({1, 2, 3, 4}, 10.0));
}

TEST(Msp, InvalidInputs) {
  EXPECT_EQ(error_kind_of([] { msp_score({1.0, 2.0}, 0.0); }), ErrorKind::kParameter);
  EXPECT_EQ(error_kind_of([] { msp_score({1.0}, 1.0); }), ErrorKind::kParameter);
}

TEST(Decide, ThresholdAccepts) {
  EXPECT_EQ(decide(0.5, 0.5), Decision::kAcceptId);
  EXPECT_EQ(decide(0.49, 0.5), Decision::kRejectOod);
}

TEST(Auroc, MatchesPairwiseOracle) {
  const auto r = criteria::check_auroc(1000, 9);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Auroc, KnownCases) {
  EXPECT_DOUBLE_EQ(auroc({0.9, 0.8}, {0.1, 0.2}), 100.0);
  EXPECT_DOUBLE_EQ(auroc({0.1, 0.2}, {0.9, 0.8}), 0.0);
  EXPECT_DOUBLE_EQ(auroc({0.5, 0.5}, {0.5}), 50.0);
  EXPECT_DOUBLE_EQ(auroc({0.3, 0.7}, {0.5}), 50.0);
}

TEST(Auroc, SameListGivesFifty) {
  Rng rng(2);
  const auto s = testing::random_scores(rng, 200, 0);
  EXPECT_DOUBLE_EQ(auroc(s, s), 50.0);
}

TEST(Auroc, MetricErrors) {
  EXPECT_EQ(error_kind_of([] { auroc({}, {0.1}); }), ErrorKind::kMetric);
  EXPECT_EQ(error_kind_of([] { auroc({0.1}, {std::numeric_limits<double>::quiet_NaN()}); }), ErrorKind::kMetric);
}

TEST(TprThreshold, SmallestSufficientRank) {
  const std::vector<double> s{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  EXPECT_DOUBLE_EQ(tpr_threshold(s, 0.8), 0.3);
  EXPECT_DOUBLE_EQ(tpr_threshold(s, 1.0), 0.1);
  EXPECT_DOUBLE_EQ(tpr_threshold(s, 0.05), 1.0);
}

TEST(TprThreshold, AchievesTargetRate) {
  Rng rng(4);
  for (int t = 0; t < 500; ++t) {
    const auto s = testing::random_scores(rng, 1 + rng.below(80), static_cast<int>(rng.below(6)) * 3);
    const double target = rng.uniform(0.01, 1.0);
    const double beta = tpr_threshold(s, target);
    std::size_t above = 0;
    for (double v : s) above += v >= beta;
    EXPECT_GE(static_cast<double>(above) / static_cast<double>(s.size()), target);
    // Any higher score from the list would miss the target.
    for (double v : s) {
      if (v > beta) {
        std::size_t a2 = 0;
        for (double u : s) a2 += u >= v;
        EXPECT_LT(static_cast<double>(a2) / static_cast<double>(s.size()), target);
      }
    }
  }
}

TEST(SweepTemperature, OneEntryPerTemperature) {
  ssl::FeatureMatrix id(2, 3), od(2, 3);
  id << 5, 0, 0, 0, 6, 0;
  od << 1, 1, 0, 0, 1, 1;
  const auto sweep = sweep_temperature(id, od, {1.0, 10.0});
  ASSERT_EQ(sweep.size(), 2u);
  EXPECT_DOUBLE_EQ(sweep[0].second, 100.0);
}

TEST(ScoreFile, RoundTripExact) {
  const auto dir = testing::temp_dir("s");
  Rng rng(1);
  std::vector<ScoreSet> sets{{"SOC-ID", testing::random_scores(rng, 30, 0)},
                             {"Holdout-OOD", testing::random_scores(rng, 20, 0)}};
  write_score_file(dir / "s.tsv", sets, 7);
  const ScoreFile back = read_score_file(dir / "s.tsv");
  EXPECT_EQ(back.ways, 7);
  ASSERT_EQ(back.sets.size(), 2u);
  EXPECT_EQ(back.sets[0].group, "SOC-ID");
  EXPECT_EQ(back.sets[0].scores, sets[0].scores);
  EXPECT_EQ(back.sets[1].scores, sets[1].scores);
}

TEST(ScoreFile, EmptyIsEmptyScores) {
  const auto dir = testing::temp_dir("s");
  write_file_atomic(dir / "e.tsv", "#ways=5\ngroup\tscore\n");
  EXPECT_EQ(error_kind_of([&] { read_score_file(dir / "e.tsv"); }), ErrorKind::kEmptyScores);
}

TEST(DetectorConfig, JsonRoundTrip) {
  DetectorConfig c;
  c.temperature = 10.0;
  c.threshold = 0.4;
  const DetectorConfig back = detector_config_from_json(to_json(c), "detector");
  EXPECT_DOUBLE_EQ(back.temperature, 10.0);
  ASSERT_TRUE(back.threshold.has_value());
  EXPECT_DOUBLE_EQ(*back.threshold, 0.4);
}

}  // namespace
}  // namespace sarfsl::ood
