#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "sslab/metrics.hpp"
#include "sslab/rng.hpp"

using namespace sslab;

namespace {

ScoreSet make(std::initializer_list<int> labels, std::initializer_list<double> scores) {
  ScoreSet s;
  auto l = labels.begin();
  auto v = scores.begin();
  for (std::size_t i = 0; l != labels.end(); ++i, ++l, ++v) s.push_back({"s" + std::to_string(i), *l, *v});
  return s;
}

// Pairwise concordance counted in half-units: 2 per concordant pair, 1 per tie.
std::pair<std::uint64_t, std::uint64_t> pairwise_oracle(const ScoreSet& s) {
  std::uint64_t half = 0, P = 0, N = 0;
  for (const auto& a : s) (a.label == 1 ? P : N) += 1;
  for (const auto& p : s) {
    if (p.label != 1) continue;
    for (const auto& n : s) {
      if (n.label != 0) continue;
      half += p.score > n.score ? 2 : (p.score == n.score ? 1 : 0);
    }
  }
  return {half, 2 * P * N};
}

ScoreSet random_set(Rng& rng, std::size_t n, int levels) {
  ScoreSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(rng.below(2));
    const double v = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) / (levels - 1);
    s.push_back({"r" + std::to_string(i), y, v});
  }
  s[0].label = 0;
  s[1].label = 1;
  return s;
}

}  // namespace

TEST(Accuracy, AllOnesPositive) {
  EXPECT_DOUBLE_EQ(accuracy(make({1, 1, 1}, {1.0, 1.0, 1.0})), 1.0);
}

TEST(Accuracy, TwoSamples) { EXPECT_DOUBLE_EQ(accuracy(make({1, 0}, {0.9, 0.1})), 1.0); }

TEST(Accuracy, MixedCount) {
  EXPECT_DOUBLE_EQ(accuracy(make({1, 0, 0, 1}, {0.9, 0.8, 0.2, 0.4}), 0.5), 0.5);
}

TEST(Accuracy, ThresholdTiePredictsNegative) {
  EXPECT_DOUBLE_EQ(accuracy(make({1, 0}, {0.5, 0.5})), 0.5);
}

TEST(Accuracy, EmptyThrows) { EXPECT_THROW(accuracy(ScoreSet{}), MetricError); }

TEST(Roc, HandSweep) {
  const auto roc = roc_curve(make({1, 0, 1, 0}, {0.9, 0.8, 0.7, 0.1}));
  const std::vector<double> fpr{0, 0, 0.5, 0.5, 1}, tpr{0, 0.5, 0.5, 1, 1};
  EXPECT_EQ(roc.fpr, fpr);
  EXPECT_EQ(roc.tpr, tpr);
  EXPECT_TRUE(std::isinf(roc.thresholds.back()));
}

TEST(Roc, PerfectSeparationHitsCorner) {
  const auto roc = roc_curve(make({1, 1, 0, 0}, {0.9, 0.8, 0.3, 0.2}));
  bool corner = false;
  for (std::size_t k = 0; k < roc.fpr.size(); ++k) corner |= roc.fpr[k] == 0.0 && roc.tpr[k] == 1.0;
  EXPECT_TRUE(corner);
}

TEST(Roc, AllEqualIsDiagonalEndpoints) {
  const auto roc = roc_curve(make({1, 0, 1, 0}, {0.4, 0.4, 0.4, 0.4}));
  ASSERT_EQ(roc.fpr.size(), 2u);
  EXPECT_EQ(roc.fpr[0], 0.0);
  EXPECT_EQ(roc.tpr[0], 0.0);
  EXPECT_EQ(roc.fpr[1], 1.0);
  EXPECT_EQ(roc.tpr[1], 1.0);
}

TEST(Roc, SingleClassThrows) {
  EXPECT_THROW(roc_curve(make({1, 1}, {0.2, 0.3})), MetricError);
  EXPECT_THROW(auc(make({0, 0}, {0.2, 0.3})), MetricError);
}

TEST(Roc, MonotoneWithEndpoints) {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto roc = roc_curve(random_set(rng, 60, 7));
    EXPECT_EQ(roc.fpr.front(), 0.0);
    EXPECT_EQ(roc.tpr.front(), 0.0);
    EXPECT_EQ(roc.fpr.back(), 1.0);
    EXPECT_EQ(roc.tpr.back(), 1.0);
    for (std::size_t k = 1; k < roc.fpr.size(); ++k) {
      EXPECT_GE(roc.fpr[k], roc.fpr[k - 1]);
      EXPECT_GE(roc.tpr[k], roc.tpr[k - 1]);
    }
  }
}

TEST(Auc, HandExample) { EXPECT_DOUBLE_EQ(auc(make({1, 0, 1, 0}, {0.9, 0.8, 0.7, 0.1})), 0.75); }

TEST(Auc, AllTied) { EXPECT_DOUBLE_EQ(auc(make({1, 0, 1, 0}, {0.3, 0.3, 0.3, 0.3})), 0.5); }

TEST(Auc, PerfectRanking) { EXPECT_DOUBLE_EQ(auc(make({0, 1, 0, 1}, {0.1, 0.9, 0.2, 0.8})), 1.0); }

TEST(Auc, MatchesPairwiseOracleExactly) {
  Rng rng(2024);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(499);
    const auto s = random_set(rng, n, 1 + static_cast<int>(rng.below(40)) + 1);
    const auto frac = auc_fraction(s);
    const auto [num, den] = pairwise_oracle(s);
    ASSERT_EQ(frac.num * den, num * frac.den) << "trial " << t;
  }
}

TEST(Auc, InvariantUnderCube) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    auto s = random_set(rng, 80, 13);
    const double a = auc(s);
    for (auto& e : s) e.score = e.score * e.score * e.score;
    EXPECT_EQ(auc(s), a);
  }
}

TEST(Auc, LabelFlipSymmetry) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    auto s = random_set(rng, 90, t % 2 == 0 ? 1000000 : 5);
    const auto f = auc_fraction(s);
    for (auto& e : s) e.label = 1 - e.label;
    const auto g = auc_fraction(s);
    ASSERT_EQ(f.den, g.den);
    EXPECT_EQ(f.num + g.num, f.den);
  }
}

TEST(Auc, ArrayOverloadAgrees) {
  Rng rng(8);
  const auto s = random_set(rng, 120, 9);
  std::vector<int> labels;
  std::vector<double> scores;
  for (const auto& e : s) {
    labels.push_back(e.label);
    scores.push_back(e.score);
  }
  EXPECT_EQ(auc(labels, scores), auc(s));
}

TEST(ScoresCsv, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "sslab_scores_rt.csv";
  const auto s = make({1, 0, 1}, {0.125, 1.0 / 3.0, 0.0});
  write_scores_csv(path, s);
  EXPECT_EQ(read_scores_csv(path), s);
  std::filesystem::remove(path);
}

TEST(ScoresCsv, RejectsOutOfRange) {
  EXPECT_THROW(validate_scores(make({1}, {1.5})), MetricError);
  EXPECT_THROW(validate_scores(make({2}, {0.5})), MetricError);
}
