#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rulemon/mask.hpp"

namespace rulemon {

/// sum_i |gt_i & (pred_i > t)| / sum_i |gt_i | (pred_i > 0.5)|. The union
/// keeps the fixed 0.5 cut whatever t is. 0/0 counts as 1.
double siou(std::span<const TruthMask> gt, std::span<const TruthMask> pred, double t = 0.5);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double confidence = 0.0;  // mean confidence, 0 for empty bins
  double accuracy = 0.0;    // mean correctness, 0 for empty bins
  std::size_t count = 0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  double mce = 0.0;
};

/// Equal-width binning of [0,1]; a confidence of exactly 1 goes to the last
/// bin. Throws DataError on empty or mismatched input.
CalibrationReport ece_mce(std::span<const double> confidences, std::span<const double> correctness,
                          int n_bins = 10);

/// Probabilistic-classifier view: confidence of the predicted class and
/// whether it is right, from positive-class probabilities and binary labels.
CalibrationReport binary_calibration(std::span<const double> probabilities, std::span<const double> labels,
                                     int n_bins = 10);

struct Rates {
  double precision = 0.0;
  double recall = 0.0;
  double tnr = 0.0;
  double fpr = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool tnr_undefined = false;

  /// (1+b^2) P R / (b^2 P + R); 0 when undefined.
  double f_beta(double beta) const;
};

Rates classification_rates(std::span<const bool> pred, std::span<const bool> gt);

struct SweepPoint {
  double threshold = 0.0;
  Rates rates;
};

struct SweepResult {
  std::vector<SweepPoint> points;    // ascending thresholds
  std::optional<double> auc_roc;     // trapezoid over the swept (FPR, TPR) points
  std::optional<double> auc_exact;   // Mann-Whitney, independent of the grid; sweep() only

  /// Threshold maximizing F_beta (smallest threshold among ties).
  double best_threshold(double beta) const;
  double best_f_beta(double beta) const;
  /// F_beta at the swept threshold closest to t.
  double f_beta_at(double t, double beta) const;
};

/// Default grid: 0 to 1 in steps of 0.005, refined to 0.0005 within 0.01 of
/// either end.
std::vector<double> dense_thresholds();
std::vector<double> uniform_thresholds(int steps);

/// Rates at each threshold with score >= t counted positive. The ROC curve
/// is closed with (0,0) and (1,1) before integrating.
SweepResult sweep(std::span<const double> scores, std::span<const bool> gt, std::span<const double> thresholds);

/// As sweep, but the scores are recomputed at every threshold (a Boolean
/// logic whose binarization threshold follows the swept one).
SweepResult sweep_coupled(const std::function<std::vector<double>(double)>& scores_at, std::span<const bool> gt,
                          std::span<const double> thresholds);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. nullopt when either class is empty.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const bool> gt);

/// CSV with columns threshold,precision,recall,tpr,fpr,tnr,f1.
std::string sweep_csv(const SweepResult& s);

}  // namespace rulemon
