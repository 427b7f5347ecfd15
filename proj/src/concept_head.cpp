#include "rulemon/concept_head.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "rulemon/error.hpp"
#include "rulemon/metrics.hpp"

namespace rulemon {

std::string to_string(Loss l) {
  switch (l) {
    case Loss::BCE: return "bce";
    case Loss::Dice: return "dice";
    case Loss::BalancedBCE: return "balanced_bce";
  }
  return "?";
}

Loss parse_loss(std::string_view s) {
  if (s == "bce") return Loss::BCE;
  if (s == "dice") return Loss::Dice;
  if (s == "balanced_bce" || s == "bbce") return Loss::BalancedBCE;
  throw UsageError("unknown loss '" + std::string(s) + "' (expected bce, dice or balanced_bce)");
}

void ActivationStack::validate() const {
  if (channels < 1) throw DataError("activation stack needs at least one channel");
  if (grid.size() == 0) throw DataError("activation grid is empty");
  const std::size_t expect = static_cast<std::size_t>(channels) * grid.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.activations.size() != expect) {
      throw DataError("sample " + std::to_string(i) + " has " + std::to_string(s.activations.size()) +
                      " activations, expected " + std::to_string(expect));
    }
    for (double a : s.activations)
      if (!std::isfinite(a)) throw DataError("sample " + std::to_string(i) + " has a non-finite activation");
    for (double v : s.label.values())
      if (v != 0.0 && v != 1.0) throw DataError("sample " + std::to_string(i) + " label is not binary");
  }
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Augmented features at label resolution, one row per label pixel.
struct Design {
  MatrixXd x;
  VectorXd y;
  std::vector<std::size_t> first_row;  // per sample, plus the end
};

std::vector<double> sample_features(const std::vector<double>& activations, int channels, MaskShape grid,
                                    MaskShape out) {
  // Pixel-major (out.size() x (channels + 1)) with a trailing 1.
  std::vector<double> f(out.size() * static_cast<std::size_t>(channels + 1), 1.0);
  const std::size_t stride = static_cast<std::size_t>(channels + 1);
  for (int c = 0; c < channels; ++c) {
    const std::span<const double> plane(activations.data() + static_cast<std::size_t>(c) * grid.size(), grid.size());
    const auto resized = grid == out ? std::vector<double>(plane.begin(), plane.end()) : resize_bilinear(plane, grid, out);
    for (std::size_t i = 0; i < out.size(); ++i) f[i * stride + static_cast<std::size_t>(c)] = resized[i];
  }
  return f;
}

Design make_design(const ActivationStack& data) {
  data.validate();
  Design d;
  std::size_t rows = 0;
  for (const auto& s : data.samples) {
    d.first_row.push_back(rows);
    rows += s.label.size();
  }
  d.first_row.push_back(rows);
  const int k = data.channels + 1;
  d.x.resize(static_cast<Eigen::Index>(rows), k);
  d.y.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t n = 0; n < data.samples.size(); ++n) {
    const auto& s = data.samples[n];
    const auto f = sample_features(s.activations, data.channels, data.grid, s.label.shape());
    for (std::size_t i = 0; i < s.label.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(d.first_row[n] + i);
      for (int c = 0; c < k; ++c) d.x(r, c) = f[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
      d.y(r) = s.label[i];
    }
  }
  return d;
}

VectorXd params_of(const ConceptHead& h) {
  VectorXd t(h.channels() + 1);
  for (int c = 0; c < h.channels(); ++c) t(c) = h.weights[static_cast<std::size_t>(c)];
  t(h.channels()) = h.bias;
  return t;
}

void set_params(ConceptHead& h, const VectorXd& t) {
  h.weights.assign(t.data(), t.data() + t.size() - 1);
  h.bias = t(t.size() - 1);
}

// Loss of the data term, averaged over the rows (Dice is a ratio already).
double data_loss(const MatrixXd& x, const VectorXd& y, const VectorXd& theta, Loss loss, VectorXd* grad) {
  const VectorXd z = x * theta;
  const auto n = static_cast<double>(z.size());
  VectorXd dz(z.size());
  double value = 0.0;
  switch (loss) {
    case Loss::BCE:
    case Loss::BalancedBCE: {
      double w_pos = 1.0;
      if (loss == Loss::BalancedBCE) {
        const double pos = y.sum();
        if (pos > 0.0) w_pos = (n - pos) / pos;
      }
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double w = y(i) > 0.5 ? w_pos : 1.0;
        value += w * (softplus(z(i)) - y(i) * z(i));
        dz(i) = w * (sigmoid(z(i)) - y(i)) / n;
      }
      value /= n;
      break;
    }
    case Loss::Dice: {
      constexpr double eps = 1e-6;
      VectorXd p(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) p(i) = sigmoid(z(i));
      const double spq = p.dot(y);
      const double den = p.sum() + y.sum() + eps;
      value = 1.0 - 2.0 * spq / den;
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double dp = -2.0 * (y(i) * den - spq) / (den * den);
        dz(i) = dp * p(i) * (1.0 - p(i));
      }
      break;
    }
  }
  if (grad) *grad = x.transpose() * dz;
  return value;
}

double objective(const MatrixXd& x, const VectorXd& y, const VectorXd& theta, Loss loss, double lambda_per_row,
                 VectorXd* grad) {
  double v = data_loss(x, y, theta, loss, grad);
  v += 0.5 * lambda_per_row * theta.squaredNorm();
  if (grad) *grad += lambda_per_row * theta;
  return v;
}

MatrixXd gather_rows(const Design& d, const std::vector<std::size_t>& samples, VectorXd& y) {
  std::size_t rows = 0;
  for (auto s : samples) rows += d.first_row[s + 1] - d.first_row[s];
  MatrixXd x(static_cast<Eigen::Index>(rows), d.x.cols());
  y.resize(static_cast<Eigen::Index>(rows));
  Eigen::Index r = 0;
  for (auto s : samples) {
    const auto b = static_cast<Eigen::Index>(d.first_row[s]);
    const auto len = static_cast<Eigen::Index>(d.first_row[s + 1] - d.first_row[s]);
    x.middleRows(r, len) = d.x.middleRows(b, len);
    y.segment(r, len) = d.y.segment(b, len);
    r += len;
  }
  return x;
}

}  // namespace

double loss_and_gradient(const ConceptHead& head, const ActivationStack& data, Loss loss, double prior_precision,
                         std::vector<double>* gradient) {
  if (head.channels() != data.channels) throw DataError("head and activations differ in channel count");
  const Design d = make_design(data);
  if (d.x.rows() == 0) throw DataError("no label pixels");
  VectorXd g;
  const double v = objective(d.x, d.y, params_of(head), loss, prior_precision / static_cast<double>(d.x.rows()),
                             gradient ? &g : nullptr);
  if (gradient) gradient->assign(g.data(), g.data() + g.size());
  return v;
}

ConceptHead train_head(const ActivationStack& data, const TrainConfig& cfg, TrainLog* log) {
  if (cfg.epochs < 1 || cfg.batch < 1 || !(cfg.lr > 0.0)) throw UsageError("invalid training hyperparameters");
  if (!(cfg.prior_precision >= 0.0)) throw UsageError("prior precision must be non-negative");
  const Design d = make_design(data);
  if (d.y.sum() <= 0.0) throw DataError("training labels contain no positive pixel");

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(order.size()));
  if (n_val >= order.size()) n_val = 0;
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  VectorXd y_train, y_val;
  const MatrixXd x_train = gather_rows(d, train, y_train);
  const MatrixXd x_val = gather_rows(d, val, y_val);
  const double lambda_per_row = cfg.prior_precision / static_cast<double>(std::max<Eigen::Index>(x_train.rows(), 1));

  const Eigen::Index k = d.x.cols();
  VectorXd theta = VectorXd::Zero(k);
  VectorXd m = VectorXd::Zero(k), v = VectorXd::Zero(k);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  TrainLog local;
  TrainLog& lg = log ? *log : local;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t b = 0; b < train.size(); b += static_cast<std::size_t>(cfg.batch)) {
      const std::vector<std::size_t> batch(train.begin() + static_cast<std::ptrdiff_t>(b),
                                           train.begin() + static_cast<std::ptrdiff_t>(
                                                               std::min(train.size(), b + static_cast<std::size_t>(cfg.batch))));
      VectorXd yb;
      const MatrixXd xb = gather_rows(d, batch, yb);
      if (xb.rows() == 0) continue;
      VectorXd g;
      const double f = objective(xb, yb, theta, cfg.loss, lambda_per_row, &g);
      if (!std::isfinite(f) || !g.allFinite()) throw NumericError("training diverged (non-finite loss)");
      ++step;
      if (cfg.optimizer == Optimizer::SGD) {
        theta -= cfg.lr * g;
      } else {
        m = beta1 * m + (1 - beta1) * g;
        v = beta2 * v + (1 - beta2) * g.cwiseProduct(g);
        const double c1 = 1 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1 - std::pow(beta2, static_cast<double>(step));
        theta -= cfg.lr * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
      }
    }
    const double train_loss = objective(x_train, y_train, theta, cfg.loss, lambda_per_row, nullptr);
    if (!std::isfinite(train_loss)) throw NumericError("training diverged (non-finite loss)");
    lg.train_loss.push_back(train_loss);
    lg.epochs_run = epoch + 1;
    if (x_val.rows() > 0) {
      const double vl = objective(x_val, y_val, theta, cfg.loss, lambda_per_row, nullptr);
      lg.validation_loss.push_back(vl);
      if (best_val - vl < cfg.early_stop_delta) {
        if (++stale >= cfg.patience) {
          lg.stopped_early = true;
          break;
        }
      } else {
        stale = 0;
      }
      best_val = std::min(best_val, vl);
    }
  }

  ConceptHead head;
  head.layer_id = cfg.layer_id;
  set_params(head, theta);
  return head;
}

ConceptHead laplace_fit(const ConceptHead& head, const ActivationStack& data, double prior_precision) {
  if (!(prior_precision > 0.0)) throw UsageError("prior precision must be positive");
  if (head.channels() != data.channels) throw DataError("head and activations differ in channel count");
  const Design d = make_design(data);
  const VectorXd theta = params_of(head);
  const VectorXd z = d.x * theta;
  VectorXd w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = sigmoid(z(i));
    w(i) = s * (1.0 - s);
  }
  const Eigen::Index k = theta.size();
  MatrixXd h = d.x.transpose() * w.asDiagonal() * d.x;
  h.diagonal().array() += prior_precision;
  const Eigen::LLT<MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw NumericError("posterior precision is not positive definite");
  MatrixXd cov = llt.solve(MatrixXd::Identity(k, k));
  cov = 0.5 * (cov + cov.transpose());
  if (Eigen::LLT<MatrixXd>(cov).info() != Eigen::Success) {
    throw NumericError("posterior covariance is not positive definite");
  }
  ConceptHead out = head;
  out.covariance = std::vector<double>(static_cast<std::size_t>(k * k));
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c) (*out.covariance)[static_cast<std::size_t>(r * k + c)] = cov(r, c);
  out.prior_precision = prior_precision;
  return out;
}

double probit_predictive(double mu, double s2) {
  return sigmoid(mu / std::sqrt(1.0 + std::numbers::pi * s2 / 8.0));
}

namespace {

double pixel_probability(const ConceptHead& head, const double* x, bool calibrated) {
  const auto k = static_cast<std::size_t>(head.channels() + 1);
  double mu = head.bias;
  for (std::size_t c = 0; c + 1 < k; ++c) mu += head.weights[c] * x[c];
  if (!calibrated) return sigmoid(mu);
  const auto& cov = *head.covariance;
  double s2 = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < k; ++c) row += cov[r * k + c] * x[c];
    s2 += x[r] * row;
  }
  return probit_predictive(mu, std::max(s2, 0.0));
}

void check_predict(const ConceptHead& head, bool calibrated) {
  if (calibrated && !head.calibrated()) throw UsageError("calibrated prediction needs a fitted posterior");
  const auto k = static_cast<std::size_t>(head.channels() + 1);
  if (calibrated && head.covariance->size() != k * k) throw DataError("posterior covariance has the wrong size");
}

}  // namespace

TruthMask predict(const ConceptHead& head, const std::vector<double>& activations, MaskShape grid, bool calibrated,
                  std::optional<MaskShape> out_shape) {
  check_predict(head, calibrated);
  if (activations.size() != static_cast<std::size_t>(head.channels()) * grid.size()) {
    throw DataError("activations do not match the head's channel count and grid");
  }
  const MaskShape out = out_shape.value_or(grid);
  const auto f = sample_features(activations, head.channels(), grid, out);
  const auto k = static_cast<std::size_t>(head.channels() + 1);
  std::vector<double> p(out.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = pixel_probability(head, f.data() + i * k, calibrated);
  return TruthMask(out, std::move(p));
}

PixelPredictions predict_pixels(const ConceptHead& head, const ActivationStack& data, bool calibrated) {
  check_predict(head, calibrated);
  if (head.channels() != data.channels) throw DataError("head and activations differ in channel count");
  PixelPredictions out;
  for (const auto& s : data.samples) {
    const auto m = predict(head, s.activations, data.grid, calibrated, s.label.shape());
    out.probabilities.insert(out.probabilities.end(), m.values().begin(), m.values().end());
    out.labels.insert(out.labels.end(), s.label.values().begin(), s.label.values().end());
  }
  return out;
}

PriorSelection select_prior_precision(const ConceptHead& head, const ActivationStack& train,
                                      const ActivationStack& validation, const std::vector<double>& grid,
                                      int n_bins) {
  if (grid.empty()) throw UsageError("empty prior precision grid");
  PriorSelection best;
  double best_ece = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    ConceptHead fitted = laplace_fit(head, train, lambda);
    const auto pred = predict_pixels(fitted, validation, true);
    const double ece = binary_calibration(pred.probabilities, pred.labels, n_bins).ece;
    best.ece_by_precision.emplace_back(lambda, ece);
    if (ece < best_ece) {
      best_ece = ece;
      best.head = std::move(fitted);
      best.prior_precision = lambda;
    }
  }
  return best;
}

}  // namespace rulemon
