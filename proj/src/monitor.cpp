#include "rulemon/monitor.hpp"

#include <algorithm>

#include "rulemon/error.hpp"
#include "rulemon/spatial.hpp"

namespace rulemon {

std::string to_string(RegionMode m) { return m == RegionMode::Simple ? "simple" : "peaks"; }

RegionMode parse_region_mode(std::string_view s) {
  if (s == "simple") return RegionMode::Simple;
  if (s == "peaks") return RegionMode::Peaks;
  throw UsageError("unknown region mode '" + std::string(s) + "' (expected simple or peaks)");
}

void MonitorConfig::validate() const {
  const auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(name) + " must lie in [0,1]");
  };
  unit(t_px, "t_px");
  unit(t_reg, "t_reg");
  unit(t_gt_reg, "t_gt_reg");
  unit(t_ped, "t_ped");
  unit(corner_case_floor, "corner_case_floor");
  if (ksize_m < 1 || ksize_m % 2 == 0) throw UsageError("ksize_m must be a positive odd integer");
  if (ksize_gt < 1 || ksize_gt % 2 == 0) throw UsageError("ksize_gt must be a positive odd integer");
}

TruthMask pixel_monitor(const TruthMask& f_mask, const LogicSystem& logic) {
  std::vector<double> out(f_mask.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logic.neg(f_mask[i]);
  return TruthMask(f_mask.shape(), std::move(out));
}

TruthMask pixel_alarms(const TruthMask& monitor, double t_px) { return binarize(monitor, TruthValue(t_px)); }

double region_monitor_simple(const TruthMask& m, const LogicSystem& logic) {
  return reduce_exists(m.values(), logic);
}

double region_monitor_peaks(const TruthMask& m, int ksize, const LogicSystem& logic) {
  if (ksize < 1 || ksize % 2 == 0) throw UsageError("peaks ksize must be a positive odd integer");
  const auto nb = nb_cond(m, NeighborMode::AllNeighbors, CloseByParams::square_window(ksize), logic);
  return reduce_exists(nb.values(), logic);
}

double region_monitor(const TruthMask& m, RegionMode mode, int ksize, const LogicSystem& logic) {
  return mode == RegionMode::Simple ? region_monitor_simple(m, logic) : region_monitor_peaks(m, ksize, logic);
}

TruthMask fn_ground_truth(const TruthMask& person_pred, const TruthMask& person_gt, const MonitorConfig& cfg,
                          const LogicSystem& logic) {
  if (!(person_pred.shape() == person_gt.shape())) {
    throw DataError("person prediction " + to_string(person_pred.shape()) + " and ground truth " +
                    to_string(person_gt.shape()) + " differ in shape");
  }
  std::vector<double> out(person_pred.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = logic.conj(logic.neg(person_pred[i]), person_gt[i]) >= cfg.t_ped ? 1.0 : 0.0;
  }
  return TruthMask(person_pred.shape(), std::move(out));
}

double region_ground_truth_score(const TruthMask& fn_mask, const MonitorConfig& cfg, const LogicSystem& logic) {
  return region_monitor(fn_mask, cfg.region_mode, cfg.ksize_gt, logic);
}

bool region_ground_truth(const TruthMask& fn_mask, const MonitorConfig& cfg, const LogicSystem& logic) {
  return region_ground_truth_score(fn_mask, cfg, logic) >= cfg.t_gt_reg;
}

namespace {

BoundingBox rescale(const BoundingBox& b, MaskShape image, MaskShape grid) {
  if (image == grid) return b;
  const double sx = static_cast<double>(grid.width) / image.width;
  const double sy = static_cast<double>(grid.height) / image.height;
  return BoundingBox(b.x0() * sx, b.y0() * sy, b.x1() * sx, b.y1() * sy, b.score());
}

}  // namespace

std::vector<FpMonitorResult> fp_monitor(std::span<const BoundingBox> predictions, const TruthMask& body_part,
                                        MaskShape image, const LogicSystem& logic) {
  std::vector<FpMonitorResult> out;
  out.reserve(predictions.size());
  const MaskShape grid = body_part.shape();
  for (const auto& pred : predictions) {
    const BoundingBox box = rescale(pred, image, grid);
    const auto px = box.pixels(grid);
    const double s = box.score().value();
    Reducer any_person(Quantifier::Exists, logic);
    Reducer person_with_part(Quantifier::Exists, logic);
    // Pixels outside the box contribute person_i(p) = 0, which only matters
    // for the mean modes through the domain size.
    for (int r = px.row_begin; r < px.row_end; ++r) {
      for (int c = px.col_begin; c < px.col_end; ++c) {
        any_person.add(s);
        person_with_part.add(logic.conj(s, body_part(r, c)));
      }
    }
    const std::size_t n = grid.size();
    const double antecedent = any_person.finish(n);
    const double consequent = person_with_part.finish(n);
    FpMonitorResult res;
    res.formula = logic.impl(antecedent, consequent);
    res.monitor = logic.neg(res.formula);
    res.box_area = px.area();
    out.push_back(res);
  }
  return out;
}

std::vector<bool> fp_ground_truth(std::span<const BoundingBox> predictions, std::span<const BoundingBox> ground_truth,
                                  MaskShape image) {
  LogicSystem goedel;
  const TruthMask gt = boxes_to_mask(ground_truth, image, goedel, TruthValue(1.0));
  std::vector<bool> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) {
    const auto px = p.pixels(image);
    std::size_t covered = 0;
    for (int r = px.row_begin; r < px.row_end; ++r)
      for (int c = px.col_begin; c < px.col_end; ++c) covered += gt(r, c) > 0.0;
    const double coverage = px.area() ? static_cast<double>(covered) / static_cast<double>(px.area()) : 0.0;
    out.push_back(p.score().value() > 0.5 && coverage < 0.2);
  }
  return out;
}

double global_consistency(std::span<const double> scores, const LogicSystem& logic) {
  if (scores.empty()) throw DataError("global consistency over an empty test set");
  return reduce_forall(scores, logic);
}

std::vector<RankedScene> rank_corner_cases(const std::vector<std::pair<std::string, TruthMask>>& monitors,
                                           std::size_t top_k, const LogicSystem& logic, double floor) {
  std::vector<RankedScene> ranked;
  ranked.reserve(monitors.size());
  for (const auto& [id, m] : monitors) {
    std::vector<double> region;
    for (double v : m.values())
      if (v >= floor) region.push_back(v);
    ranked.push_back({id, region.empty() ? 0.0 : reduce_exists(region, logic)});
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedScene& a, const RankedScene& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  if (top_k && ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

MonitorReport make_monitor_report(const TruthMask& f_mask, const MonitorConfig& cfg, const LogicSystem& logic,
                                  std::string scene_id, std::string rule_id) {
  MonitorReport r;
  r.scene_id = std::move(scene_id);
  r.rule_id = std::move(rule_id);
  r.logic = logic.describe();
  r.monitor = pixel_monitor(f_mask, logic);
  r.alarms = pixel_alarms(r.monitor, cfg.t_px);
  r.region_score = region_monitor(r.monitor, cfg.region_mode, cfg.ksize_m, logic);
  r.verdict = r.region_score >= cfg.t_reg;
  return r;
}

}  // namespace rulemon
