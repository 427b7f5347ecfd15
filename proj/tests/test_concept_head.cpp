#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "rulemon/concept_head.hpp"
#include "rulemon/error.hpp"
#include "rulemon/metrics.hpp"
#include "support/probe_data.hpp"

namespace rulemon {
namespace {

using testing::imbalanced_probe_stack;
using testing::logistic_stack;
using testing::logistic_weights;

double central_difference_rel_error(const ConceptHead& head, const ActivationStack& data, Loss loss,
                                    double lambda) {
  std::vector<double> g;
  loss_and_gradient(head, data, loss, lambda, &g);
  double num = 0.0, den = 0.0;
  constexpr double h = 1e-6;
  for (std::size_t k = 0; k < g.size(); ++k) {
    ConceptHead plus = head, minus = head;
    if (k + 1 < g.size()) {
      plus.weights[k] += h;
      minus.weights[k] -= h;
    } else {
      plus.bias += h;
      minus.bias -= h;
    }
    const double fd = (loss_and_gradient(plus, data, loss, lambda) - loss_and_gradient(minus, data, loss, lambda)) /
                      (2 * h);
    num += (fd - g[k]) * (fd - g[k]);
    den += fd * fd;
  }
  return std::sqrt(num / den);
}

TEST(ConceptHead, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  const auto data = imbalanced_probe_stack(rng, 6);
  ConceptHead head;
  head.weights = {0.4, -0.3, 0.2, 0.1};
  head.bias = -1.0;
  for (Loss loss : {Loss::BCE, Loss::Dice, Loss::BalancedBCE}) {
    EXPECT_LT(central_difference_rel_error(head, data, loss, 2.0), 1e-5) << to_string(loss);
  }
}

TEST(ConceptHead, BceValueByHand) {
  ActivationStack s;
  s.channels = 1;
  s.grid = {1, 2};
  s.samples.push_back({{1.0, -1.0}, TruthMask({1, 2}, std::vector<double>{1.0, 0.0})});
  ConceptHead h;
  h.weights = {2.0};
  h.bias = 0.5;
  const double p0 = 1 / (1 + std::exp(-2.5)), p1 = 1 / (1 + std::exp(1.5));
  const double expected = -(std::log(p0) + std::log(1 - p1)) / 2 + 0.1 / 4 * (4.0 + 0.25);
  EXPECT_NEAR(loss_and_gradient(h, s, Loss::BCE, 0.1), expected, 1e-12);
}

TEST(ConceptHead, TrainingRecoversLogisticParameters) {
  std::mt19937_64 rng(2);
  const auto w = logistic_weights(3);
  const auto data = logistic_stack(rng, 20000, w, -0.5);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.lr = 0.05;
  cfg.validation_fraction = 0.0;
  TrainLog log;
  const auto head = train_head(data, cfg, &log);
  for (std::size_t c = 0; c < w.size(); ++c) EXPECT_NEAR(head.weights[c], w[c], 0.1);
  EXPECT_NEAR(head.bias, -0.5, 0.1);
  EXPECT_EQ(log.epochs_run, 40);
  EXPECT_LT(log.train_loss.back(), log.train_loss.front());
}

TEST(ConceptHead, EarlyStoppingAndErrors) {
  std::mt19937_64 rng(3);
  const auto data = logistic_stack(rng, 4000, logistic_weights(2), 0.0);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.lr = 0.05;
  cfg.early_stop_delta = 1e-2;
  TrainLog log;
  train_head(data, cfg, &log);
  EXPECT_TRUE(log.stopped_early);
  EXPECT_LT(log.epochs_run, 200);
  EXPECT_EQ(log.validation_loss.size(), static_cast<std::size_t>(log.epochs_run));

  ActivationStack negative = data;
  for (auto& s : negative.samples) s.label = TruthMask(s.label.shape(), 0.0);
  EXPECT_THROW(train_head(negative, cfg, nullptr), DataError);
  cfg.lr = std::numeric_limits<double>::infinity();
  cfg.optimizer = Optimizer::SGD;
  EXPECT_THROW(train_head(data, cfg, nullptr), NumericError);
  EXPECT_EQ(parse_loss("bbce"), Loss::BalancedBCE);
  EXPECT_THROW(parse_loss("focal"), UsageError);
}

TEST(ConceptHead, StackValidation) {
  ActivationStack s;
  s.channels = 2;
  s.grid = {2, 2};
  s.samples.push_back({std::vector<double>(7, 0.0), TruthMask({2, 2})});
  EXPECT_THROW(s.validate(), DataError);
  s.samples[0].activations.assign(8, 0.0);
  s.samples[0].label = TruthMask({2, 2}, 0.5);
  EXPECT_THROW(s.validate(), DataError);
  s.samples[0].label = TruthMask({2, 2});
  s.samples[0].activations[3] = std::nan("");
  EXPECT_THROW(s.validate(), DataError);
}

TEST(ConceptHead, ProbitApproximation) {
  EXPECT_DOUBLE_EQ(probit_predictive(1.3, 0.0), 1 / (1 + std::exp(-1.3)));
  EXPECT_NEAR(probit_predictive(2.0, 8.0 / std::numbers::pi), 1 / (1 + std::exp(-2.0 / std::sqrt(2.0))), 1e-15);
  EXPECT_DOUBLE_EQ(probit_predictive(0.0, 5.0), 0.5);
  // Variance moves the prediction toward one half.
  EXPECT_LT(probit_predictive(2.0, 1.0), probit_predictive(2.0, 0.0));
  EXPECT_GT(probit_predictive(-2.0, 1.0), probit_predictive(-2.0, 0.0));
}

TEST(ConceptHead, LaplaceCovarianceByHand) {
  // One pixel, one channel: H = s(1-s) x x^T + lambda I with x = (1, 1).
  ActivationStack s;
  s.channels = 1;
  s.grid = {1, 1};
  s.samples.push_back({{1.0}, TruthMask({1, 1}, 1.0)});
  ConceptHead h;
  h.weights = {0.0};
  const auto fitted = laplace_fit(h, s, 1.0);
  Eigen::Matrix2d hess;
  hess << 1.25, 0.25, 0.25, 1.25;
  const Eigen::Matrix2d cov = hess.inverse();
  ASSERT_TRUE(fitted.covariance.has_value());
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) EXPECT_NEAR((*fitted.covariance)[static_cast<std::size_t>(r * 2 + c)], cov(r, c), 1e-14);
  EXPECT_EQ(fitted.prior_precision, 1.0);
  EXPECT_THROW(laplace_fit(h, s, 0.0), UsageError);
  EXPECT_THROW(predict(h, {1.0}, {1, 1}, true), UsageError);
  const auto p = predict(fitted, {1.0}, {1, 1}, true);
  EXPECT_NEAR(p[0], probit_predictive(0.0, cov.sum()), 1e-15);
}

TEST(ConceptHead, PredictUpscalesLogits) {
  ConceptHead h;
  h.weights = {1.0};
  h.bias = 0.0;
  const auto p = predict(h, {-2.0, 2.0}, {1, 2}, false, MaskShape{1, 4});
  // Pixel centres at 0.25 and 0.75 of the way between the two source centres
  // interpolate the logits, not the probabilities.
  EXPECT_NEAR(p[1], 1 / (1 + std::exp(1.0)), 1e-15);
  EXPECT_NEAR(p[2], 1 / (1 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(p[0], 1 / (1 + std::exp(2.0)), 1e-15);
}

TEST(ConceptHead, PriorSelectionPicksLowestEce) {
  std::mt19937_64 rng(4);
  const auto w = logistic_weights(2);
  const auto train = logistic_stack(rng, 2000, w, 0.0);
  const auto val = logistic_stack(rng, 2000, w, 0.0);
  ConceptHead head;
  head.weights = w;
  const auto sel = select_prior_precision(head, train, val, {0.01, 1.0, 100.0, 1e4});
  ASSERT_EQ(sel.ece_by_precision.size(), 4u);
  double best = 1.0;
  for (const auto& [l, e] : sel.ece_by_precision) best = std::min(best, e);
  for (const auto& [l, e] : sel.ece_by_precision)
    if (e == best) EXPECT_EQ(sel.prior_precision, l);
  EXPECT_TRUE(sel.head.calibrated());
}

}  // namespace
}  // namespace rulemon
