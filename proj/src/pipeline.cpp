#include "rulemon/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "rulemon/error.hpp"

namespace rulemon {

LoadedRule load_rule_text(std::string_view text, std::string id) {
  LoadedRule r;
  r.id = std::move(id);
  r.formula = rule::parse(text);
  std::tie(r.body, r.variable) = rule::open_body(r.formula);
  return r;
}

LoadedRule load_rule_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open rule file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_rule_text(ss.str(), path.stem().string());
}

LogicSystem effective_logic(const RunConfig& cfg, double t) {
  LogicSystem l = cfg.logic;
  if (l.is_boolean() && cfg.couple_bool_threshold) l.bool_threshold = TruthValue(t);
  return l;
}

TruthMask evaluate_open(const LoadedRule& r, const SceneBundle& scene, const LogicSystem& logic,
                        const rule::CompileOptions& options) {
  const auto bf = rule::bind(r.body, scene.schema(), options);
  const auto res = rule::evaluate(rule::lower(bf, logic), scene);
  if (const auto* m = std::get_if<TruthMask>(&res)) return *m;
  return TruthMask(bf.working, std::get<TruthValue>(res).value());
}

double evaluate_closed(const LoadedRule& r, const SceneBundle& scene, const LogicSystem& logic,
                       const rule::CompileOptions& options) {
  const auto bf = rule::bind(r.formula, scene.schema(), options);
  const auto res = rule::evaluate(rule::lower(bf, logic), scene);
  if (const auto* v = std::get_if<TruthValue>(&res)) return v->value();
  throw DataError("rule '" + r.id + "' has a free variable");
}

TruthMask resample_binary(const TruthMask& m, MaskShape target) {
  if (m.shape() == target) return m;
  if (target.height <= m.height() && target.width <= m.width() && m.height() % target.height == 0 &&
      m.width() % target.width == 0) {
    return downscale_maxpool(m, target);
  }
  std::vector<double> v = resize_bilinear(m.values(), m.shape(), target);
  for (double& x : v) x = x >= 0.5 ? 1.0 : 0.0;
  return TruthMask(target, std::move(v));
}

namespace {

std::optional<TruthMask> person_mask(const SceneBundle& s, const std::string& name, const LogicSystem& logic,
                                     bool ground_truth) {
  if (const auto it = s.masks.find(name); it != s.masks.end()) {
    return it->second.shape() == s.image ? it->second : resample_binary(it->second, s.image);
  }
  if (const auto it = s.boxes.find(name); it != s.boxes.end()) {
    return ground_truth ? boxes_to_mask(it->second, s.image, logic, TruthValue(1.0))
                        : boxes_to_mask(it->second, s.image, logic);
  }
  return std::nullopt;
}

}  // namespace

SceneEvaluation evaluate_scene(const LoadedRule& r, const SceneBundle& scene, const RunConfig& cfg,
                               const LogicSystem& logic) {
  SceneEvaluation ev;
  ev.scene_id = scene.id;
  ev.formula = evaluate_open(r, scene, logic, cfg.compile);
  ev.report = make_monitor_report(ev.formula, cfg.monitor, logic, scene.id, r.id);

  // Ground truth follows the configured logic, never a swept Boolean threshold.
  const LogicSystem& gt_logic = cfg.logic;
  const auto gt = person_mask(scene, cfg.gt_person, gt_logic, true);
  if (!gt) return ev;
  const auto pred = person_mask(scene, cfg.pred_person, gt_logic, false);
  if (!pred) throw DataError("scene '" + scene.id + "' has no predicted person channel '" + cfg.pred_person + "'");
  const TruthMask fn = resample_binary(fn_ground_truth(*pred, *gt, cfg.monitor, gt_logic), ev.formula.shape());
  ev.gt_region_score = region_ground_truth_score(fn, cfg.monitor, gt_logic);
  ev.gt_region = *ev.gt_region_score >= cfg.monitor.t_gt_reg;

  std::vector<double> parts(scene.image.size(), 0.0);
  bool any_part = false;
  for (const auto& name : cfg.body_parts) {
    const auto it = scene.masks.find("gt_" + name);
    if (it == scene.masks.end()) continue;
    any_part = true;
    const TruthMask m = resample_binary(it->second, scene.image);
    for (std::size_t i = 0; i < parts.size(); ++i) parts[i] = std::max(parts[i], m[i] >= 0.5 ? 1.0 : 0.0);
  }
  if (any_part) {
    const TruthMask bp = resample_binary(TruthMask(scene.image, std::move(parts)), ev.formula.shape());
    std::vector<double> t(fn.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = fn[i] * bp[i];
    ev.target = TruthMask(fn.shape(), std::move(t));
  }
  ev.fn_mask = fn;
  return ev;
}

}  // namespace rulemon
