#include "rulemon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "rulemon/error.hpp"

namespace rulemon {

double siou(std::span<const TruthMask> gt, std::span<const TruthMask> pred, double t) {
  if (gt.size() != pred.size()) throw DataError("siou: mask lists differ in length");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!(gt[i].shape() == pred[i].shape())) throw DataError("siou: mask pair " + std::to_string(i) + " differs in shape");
    for (std::size_t k = 0; k < gt[i].size(); ++k) {
      const bool g = gt[i][k] >= 0.5;
      inter += g && pred[i][k] > t;
      uni += g || pred[i][k] > 0.5;
    }
  }
  if (uni == 0) return inter == 0 ? 1.0 : 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

CalibrationReport ece_mce(std::span<const double> confidences, std::span<const double> correctness, int n_bins) {
  if (confidences.empty()) throw DataError("calibration report over no samples");
  if (confidences.size() != correctness.size()) throw DataError("confidences and correctness differ in length");
  if (n_bins < 1) throw UsageError("n_bins must be at least 1");
  CalibrationReport rep;
  rep.bins.resize(static_cast<std::size_t>(n_bins));
  std::vector<double> conf_sum(rep.bins.size(), 0.0), acc_sum(rep.bins.size(), 0.0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw DataError("confidence outside [0,1]");
    const auto b = std::min(static_cast<std::size_t>(c * n_bins), rep.bins.size() - 1);
    conf_sum[b] += c;
    acc_sum[b] += correctness[i];
    ++rep.bins[b].count;
  }
  const double n = static_cast<double>(confidences.size());
  for (std::size_t b = 0; b < rep.bins.size(); ++b) {
    auto& bin = rep.bins[b];
    bin.lower = static_cast<double>(b) / n_bins;
    bin.upper = static_cast<double>(b + 1) / n_bins;
    if (!bin.count) continue;
    bin.confidence = conf_sum[b] / static_cast<double>(bin.count);
    bin.accuracy = acc_sum[b] / static_cast<double>(bin.count);
    const double gap = std::abs(bin.accuracy - bin.confidence);
    rep.ece += static_cast<double>(bin.count) / n * gap;
    rep.mce = std::max(rep.mce, gap);
  }
  return rep;
}

CalibrationReport binary_calibration(std::span<const double> probabilities, std::span<const double> labels,
                                     int n_bins) {
  if (probabilities.size() != labels.size()) throw DataError("probabilities and labels differ in length");
  std::vector<double> conf(probabilities.size()), correct(probabilities.size());
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const bool positive = probabilities[i] >= 0.5;
    conf[i] = positive ? probabilities[i] : 1.0 - probabilities[i];
    correct[i] = positive == (labels[i] >= 0.5) ? 1.0 : 0.0;
  }
  return ece_mce(conf, correct, n_bins);
}

double Rates::f_beta(double beta) const {
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  return den > 0.0 ? (1.0 + b2) * precision * recall / den : 0.0;
}

Rates classification_rates(std::span<const bool> pred, std::span<const bool> gt) {
  if (pred.size() != gt.size()) throw DataError("predictions and ground truth differ in length");
  Rates r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i]) {
      ++(gt[i] ? r.tp : r.fp);
    } else {
      ++(gt[i] ? r.fn : r.tn);
    }
  }
  const auto ratio = [](std::size_t a, std::size_t b, bool& undefined) {
    undefined = b == 0;
    return undefined ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  r.precision = ratio(r.tp, r.tp + r.fp, r.precision_undefined);
  r.recall = ratio(r.tp, r.tp + r.fn, r.recall_undefined);
  r.tnr = ratio(r.tn, r.tn + r.fp, r.tnr_undefined);
  r.fpr = r.tnr_undefined ? 0.0 : 1.0 - r.tnr;
  return r;
}

double SweepResult::best_threshold(double beta) const {
  double best = -1.0, t = 0.0;
  for (const auto& p : points) {
    const double f = p.rates.f_beta(beta);
    if (f > best) {
      best = f;
      t = p.threshold;
    }
  }
  return t;
}

double SweepResult::best_f_beta(double beta) const {
  double best = 0.0;
  for (const auto& p : points) best = std::max(best, p.rates.f_beta(beta));
  return best;
}

double SweepResult::f_beta_at(double t, double beta) const {
  if (points.empty()) throw DataError("empty sweep");
  const auto it = std::min_element(points.begin(), points.end(), [t](const SweepPoint& a, const SweepPoint& b) {
    return std::abs(a.threshold - t) < std::abs(b.threshold - t);
  });
  return it->rates.f_beta(beta);
}

std::vector<double> dense_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 20; ++i) t.push_back(i * 0.0005);
  for (int i = 2; i < 198; ++i) t.push_back(i * 0.005);
  for (int i = 1980; i <= 2000; ++i) t.push_back(i * 0.0005);
  return t;
}

std::vector<double> uniform_thresholds(int steps) {
  if (steps < 1) throw UsageError("threshold grid needs at least one step");
  std::vector<double> t;
  for (int i = 0; i <= steps; ++i) t.push_back(static_cast<double>(i) / steps);
  return t;
}

namespace {

void check_thresholds(std::span<const double> thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) throw UsageError("thresholds must be strictly ascending");
  }
}

std::optional<double> trapezoid_auc(const std::vector<SweepPoint>& points) {
  if (points.empty() || points.front().rates.recall_undefined || points.front().rates.tnr_undefined) {
    return std::nullopt;
  }
  // Ascending thresholds give descending (FPR, TPR); close the curve at both ends.
  std::vector<std::pair<double, double>> roc{{1.0, 1.0}};
  for (const auto& p : points) roc.emplace_back(p.rates.fpr, p.rates.recall);
  roc.emplace_back(0.0, 0.0);
  double auc = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    auc += (roc[i - 1].first - roc[i].first) * (roc[i - 1].second + roc[i].second) / 2.0;
  }
  return auc;
}

}  // namespace

SweepResult sweep(std::span<const double> scores, std::span<const bool> gt, std::span<const double> thresholds) {
  auto res = sweep_coupled([&](double) { return std::vector<double>(scores.begin(), scores.end()); }, gt, thresholds);
  res.auc_exact = roc_auc(scores, gt);
  return res;
}

SweepResult sweep_coupled(const std::function<std::vector<double>(double)>& scores_at, std::span<const bool> gt,
                          std::span<const double> thresholds) {
  check_thresholds(thresholds);
  SweepResult res;
  std::unique_ptr<bool[]> pred(new bool[gt.size()]);
  for (double t : thresholds) {
    const auto s = scores_at(t);
    if (s.size() != gt.size()) throw DataError("scores and ground truth differ in length");
    for (std::size_t i = 0; i < s.size(); ++i) pred[i] = s[i] >= t;
    res.points.push_back({t, classification_rates(std::span<const bool>(pred.get(), gt.size()), gt)});
  }
  res.auc_roc = trapezoid_auc(res.points);
  return res;
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const bool> gt) {
  if (scores.size() != gt.size()) throw DataError("scores and ground truth differ in length");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Rank-sum with midranks for ties.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double mid = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
    for (std::size_t k = i; k < j; ++k) {
      if (gt[idx[k]]) {
        rank_sum += mid;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

std::string sweep_csv(const SweepResult& s) {
  std::ostringstream os;
  os.precision(10);
  os << "threshold,precision,recall,tpr,fpr,tnr,f1\n";
  for (const auto& p : s.points) {
    os << p.threshold << ',' << p.rates.precision << ',' << p.rates.recall << ',' << p.rates.recall << ','
       << p.rates.fpr << ',' << p.rates.tnr << ',' << p.rates.f_beta(1.0) << '\n';
  }
  return os.str();
}

}  // namespace rulemon
