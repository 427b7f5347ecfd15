#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "rulemon/error.hpp"
#include "rulemon/metrics.hpp"

namespace rulemon {
namespace {

// Pairwise count over every (positive, negative) pair.
double brute_force_auc(const std::vector<double>& s, const std::vector<bool>& gt) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!gt[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (gt[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

std::vector<bool> bools(std::initializer_list<int> v) {
  std::vector<bool> out;
  for (int x : v) out.push_back(x != 0);
  return out;
}

TEST(Siou, FixedUnionCut) {
  const std::vector<TruthMask> gt{TruthMask({1, 4}, std::vector<double>{1, 1, 0, 0})};
  const std::vector<TruthMask> pred{TruthMask({1, 4}, std::vector<double>{0.9, 0.4, 0.6, 0.0})};
  // intersection {0}, union {0, 1, 2}
  EXPECT_DOUBLE_EQ(siou(gt, pred, 0.5), 1.0 / 3.0);
  // lowering t grows the intersection but not the union
  EXPECT_DOUBLE_EQ(siou(gt, pred, 0.3), 2.0 / 3.0);
  const std::vector<TruthMask> empty{TruthMask({2, 2})};
  EXPECT_DOUBLE_EQ(siou(empty, empty), 1.0);
}

TEST(Siou, AggregatesOverCollection) {
  const std::vector<TruthMask> gt{TruthMask({1, 2}, std::vector<double>{1, 0}),
                                  TruthMask({1, 2}, std::vector<double>{1, 1})};
  const std::vector<TruthMask> pred{TruthMask({1, 2}, std::vector<double>{1, 0}),
                                    TruthMask({1, 2}, std::vector<double>{0, 0})};
  EXPECT_DOUBLE_EQ(siou(gt, pred), 1.0 / 3.0);
  EXPECT_THROW(siou(gt, std::vector<TruthMask>{pred[0]}), DataError);
}

TEST(Calibration, HandComputedBins) {
  const std::vector<double> conf{0.05, 0.15, 0.95, 1.0, 0.55};
  const std::vector<double> acc{0, 1, 1, 0, 1};
  const auto rep = ece_mce(conf, acc, 10);
  ASSERT_EQ(rep.bins.size(), 10u);
  EXPECT_EQ(rep.bins[9].count, 2u);  // 1.0 lands in the last bin
  EXPECT_DOUBLE_EQ(rep.bins[9].confidence, 0.975);
  EXPECT_DOUBLE_EQ(rep.bins[9].accuracy, 0.5);
  const double expected = (0.05 + 0.85 + 2 * 0.475 + 0.45) / 5.0;
  EXPECT_NEAR(rep.ece, expected, 1e-15);
  EXPECT_NEAR(rep.mce, 0.85, 1e-15);
  EXPECT_THROW(ece_mce(std::vector<double>{}, std::vector<double>{}, 10), DataError);
  EXPECT_THROW(ece_mce(std::vector<double>{1.2}, std::vector<double>{1}, 10), DataError);
}

TEST(Calibration, PerfectlyCalibratedHasZeroEce) {
  std::vector<double> conf, acc;
  for (int i = 0; i < 10; ++i) {
    conf.push_back(0.75);
    acc.push_back(i < 7 || i == 9 ? 1.0 : 0.0);  // 8 of 10 right at 0.75 confidence
  }
  EXPECT_NEAR(ece_mce(conf, acc).ece, 0.05, 1e-15);
  const auto binary = binary_calibration(std::vector<double>{0.2, 0.8}, std::vector<double>{0, 1});
  EXPECT_NEAR(binary.ece, 0.2, 1e-15);
}

TEST(Rates, CountsAndUndefined) {
  const auto pred = bools({1, 1, 0, 0, 1});
  const auto gt = bools({1, 0, 1, 0, 1});
  std::unique_ptr<bool[]> p(new bool[5]), g(new bool[5]);
  for (int i = 0; i < 5; ++i) p[i] = pred[i], g[i] = gt[i];
  const auto r = classification_rates({p.get(), 5}, {g.get(), 5});
  EXPECT_EQ(r.tp, 2u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.tn, 1u);
  EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.fpr, 0.5);
  EXPECT_DOUBLE_EQ(r.f_beta(1.0), 2.0 / 3.0);
  // F_0.1 is close to precision, F_10 close to recall.
  Rates skew;
  skew.precision = 0.9;
  skew.recall = 0.3;
  EXPECT_NEAR(skew.f_beta(0.1), 1.01 * 0.27 / (0.009 + 0.3), 1e-15);
  EXPECT_NEAR(skew.f_beta(10.0), 101 * 0.27 / (90 + 0.3), 1e-15);

  bool none[2] = {false, false};
  const auto u = classification_rates({none, 2}, {none, 2});
  EXPECT_TRUE(u.precision_undefined);
  EXPECT_TRUE(u.recall_undefined);
  EXPECT_EQ(u.f_beta(1.0), 0.0);
}

TEST(Thresholds, DenseGridIsAscendingAndRefined) {
  const auto t = dense_thresholds();
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_DOUBLE_EQ(t.back(), 1.0);
  for (std::size_t i = 1; i < t.size(); ++i) ASSERT_GT(t[i], t[i - 1]);
  EXPECT_NEAR(t[1], 0.0005, 1e-15);
  EXPECT_NEAR(t[t.size() - 2], 0.9995, 1e-12);
  const auto u = uniform_thresholds(4);
  EXPECT_EQ(u, (std::vector<double>{0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_THROW(uniform_thresholds(0), UsageError);
}

TEST(Sweep, RankAucMatchesPairwise) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + trial;
    std::vector<double> s(n);
    std::vector<bool> gt(n);
    for (int i = 0; i < n; ++i) {
      gt[i] = u(rng) < 0.4;
      // Quantized so ties occur.
      s[i] = std::round((u(rng) + (gt[i] ? 0.3 : 0.0)) * 10.0) / 13.0;
    }
    gt[0] = true;
    gt[1] = false;
    std::unique_ptr<bool[]> g(new bool[n]);
    for (int i = 0; i < n; ++i) g[i] = gt[i];
    const auto auc = roc_auc(s, {g.get(), static_cast<std::size_t>(n)});
    ASSERT_TRUE(auc.has_value());
    EXPECT_NEAR(*auc, brute_force_auc(s, gt), 1e-12);
  }
}

TEST(Sweep, TrapezoidOverScoreThresholdsIsExact) {
  // With every distinct score among the thresholds the ROC polyline passes
  // through every operating point, so the trapezoid equals the rank AUC.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 20);
  std::bernoulli_distribution coin(0.5);
  const int n = 200;
  std::vector<double> s(n);
  std::unique_ptr<bool[]> g(new bool[n]);
  for (int i = 0; i < n; ++i) {
    g[i] = coin(rng);
    s[i] = std::min(20, level(rng) + (g[i] ? 2 : 0)) / 20.0;
  }
  g[0] = true;
  g[1] = false;
  const auto thresholds = uniform_thresholds(40);
  const auto res = sweep(s, {g.get(), static_cast<std::size_t>(n)}, thresholds);
  ASSERT_TRUE(res.auc_roc && res.auc_exact);
  EXPECT_NEAR(*res.auc_roc, *res.auc_exact, 1e-12);
  EXPECT_EQ(res.points.size(), thresholds.size());
}

TEST(Sweep, PerfectSeparationAndBestThreshold) {
  const std::vector<double> s{0.1, 0.2, 0.7, 0.9};
  bool g[4] = {false, false, true, true};
  const auto res = sweep(s, {g, 4}, uniform_thresholds(10));
  EXPECT_DOUBLE_EQ(*res.auc_roc, 1.0);
  EXPECT_NEAR(res.best_threshold(1.0), 0.3, 1e-12);
  EXPECT_DOUBLE_EQ(res.best_f_beta(1.0), 1.0);
  EXPECT_DOUBLE_EQ(res.f_beta_at(0.5, 1.0), 1.0);
  EXPECT_NEAR(res.f_beta_at(0.18, 1.0), 0.8, 1e-12);
  const auto csv = sweep_csv(res);
  EXPECT_EQ(csv.rfind("threshold,precision,recall,tpr,fpr,tnr,f1\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
}

TEST(Sweep, SingleClassHasNoAuc) {
  const std::vector<double> s{0.1, 0.9};
  bool g[2] = {true, true};
  EXPECT_FALSE(roc_auc(s, {g, 2}).has_value());
  EXPECT_FALSE(sweep(s, {g, 2}, uniform_thresholds(4)).auc_roc.has_value());
}

TEST(Sweep, CoupledRecomputesPerThreshold) {
  bool g[3] = {true, false, true};
  std::vector<double> seen;
  const auto res = sweep_coupled(
      [&](double t) {
        seen.push_back(t);
        return std::vector<double>{t < 0.5 ? 1.0 : 0.0, 0.0, 1.0};
      },
      {g, 3}, uniform_thresholds(4));
  EXPECT_EQ(seen, uniform_thresholds(4));
  EXPECT_DOUBLE_EQ(res.points[1].rates.recall, 1.0);
  EXPECT_DOUBLE_EQ(res.points[3].rates.recall, 0.5);
  EXPECT_FALSE(res.auc_exact.has_value());
  EXPECT_THROW(sweep_coupled([](double) { return std::vector<double>{0.0}; }, {g, 3}, uniform_thresholds(2)),
               DataError);
  const std::vector<double> bad{0.5, 0.2};
  EXPECT_THROW(sweep(std::vector<double>{0, 1, 0}, {g, 3}, bad), UsageError);
}

}  // namespace
}  // namespace rulemon
