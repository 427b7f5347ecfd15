#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rulemon/logic.hpp"
#include "rulemon/mask.hpp"

namespace rulemon {

enum class RegionMode { Simple, Peaks };

std::string to_string(RegionMode m);
RegionMode parse_region_mode(std::string_view s);

struct MonitorConfig {
  double t_px = 0.5;      // pixel alarm threshold
  double t_reg = 0.5;     // region alarm threshold
  double t_gt_reg = 0.5;  // region ground truth threshold
  double t_ped = 0.5;     // false negative pixel threshold
  int ksize_m = 33;       // peaks window of the monitor
  int ksize_gt = 33;      // peaks window of the region ground truth
  RegionMode region_mode = RegionMode::Peaks;
  double corner_case_floor = 1e-3;  // pixels below this are left out of the ranking score

  /// Throws UsageError on thresholds outside [0,1] or even/non-positive ksizes.
  void validate() const;
};

/// M(p) = !F(p).
TruthMask pixel_monitor(const TruthMask& f_mask, const LogicSystem& logic);

/// Binary alarm mask, M(p) >= t_px.
TruthMask pixel_alarms(const TruthMask& monitor, double t_px);

/// exists p: M(p).
double region_monitor_simple(const TruthMask& m, const LogicSystem& logic);

/// exists p: forall q in the ksize x ksize window of p: M(q). With the mean
/// forall mode and max exists this is max(avg_pool(m, ksize)).
double region_monitor_peaks(const TruthMask& m, int ksize, const LogicSystem& logic);

double region_monitor(const TruthMask& m, RegionMode mode, int ksize, const LogicSystem& logic);

/// is_FN(p) = !person(p) & GTperson(p), binarized at t_ped.
TruthMask fn_ground_truth(const TruthMask& person_pred, const TruthMask& person_gt, const MonitorConfig& cfg,
                          const LogicSystem& logic);

/// Region score of a binary FN mask under the configured region mode with
/// ksize_gt, and its verdict at t_gt_reg.
double region_ground_truth_score(const TruthMask& fn_mask, const MonitorConfig& cfg, const LogicSystem& logic);
bool region_ground_truth(const TruthMask& fn_mask, const MonitorConfig& cfg, const LogicSystem& logic);

struct FpMonitorResult {
  double formula = 1.0;      // (exists p: person_i(p)) -> (exists p: person_i(p) & IsBodyPart(p))
  double monitor = 0.0;      // its negation
  std::size_t box_area = 0;  // pixels of the box on the body part grid
};

/// Per predicted box, the "a person should have a body part" rule. Boxes are
/// given in image coordinates and rescaled onto the body part mask grid.
std::vector<FpMonitorResult> fp_monitor(std::span<const BoundingBox> predictions, const TruthMask& body_part,
                                        MaskShape image, const LogicSystem& logic);

/// A prediction is a false positive when its score exceeds 0.5 and less than
/// 20% of its pixels are covered by the union of the ground truth boxes.
std::vector<bool> fp_ground_truth(std::span<const BoundingBox> predictions, std::span<const BoundingBox> ground_truth,
                                  MaskShape image);

/// forall over per-image scores. Throws DataError on an empty set.
double global_consistency(std::span<const double> scores, const LogicSystem& logic);

struct RankedScene {
  std::string id;
  double score = 0.0;
};

/// Scores every scene by exists over its pixels with M(p) >= floor (0 if
/// there are none), sorts descending with ties broken by id, keeps top_k
/// (all when top_k is 0).
std::vector<RankedScene> rank_corner_cases(const std::vector<std::pair<std::string, TruthMask>>& monitors,
                                           std::size_t top_k, const LogicSystem& logic, double floor = 1e-3);

struct MonitorReport {
  std::string scene_id;
  std::string rule_id;
  std::string logic;
  TruthMask monitor;
  TruthMask alarms;
  double region_score = 0.0;
  bool verdict = false;
};

MonitorReport make_monitor_report(const TruthMask& f_mask, const MonitorConfig& cfg, const LogicSystem& logic,
                                  std::string scene_id, std::string rule_id);

}  // namespace rulemon
