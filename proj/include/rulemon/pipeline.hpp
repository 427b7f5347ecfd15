#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "rulemon/config.hpp"
#include "rulemon/monitor.hpp"
#include "rulemon/rule/plan.hpp"
#include "rulemon/scene.hpp"

namespace rulemon {

/// A parsed rule together with its open body F(p).
struct LoadedRule {
  std::string id;
  rule::FormulaPtr formula;
  rule::FormulaPtr body;
  std::string variable;
};

LoadedRule load_rule_text(std::string_view text, std::string id = "rule");
LoadedRule load_rule_file(const std::filesystem::path& path);

/// Logic actually used for a monitor threshold: under the Boolean family with
/// coupling enabled the binarization threshold follows t.
LogicSystem effective_logic(const RunConfig& cfg, double t);

/// F(p) on the rule's working grid.
TruthMask evaluate_open(const LoadedRule& r, const SceneBundle& scene, const LogicSystem& logic,
                        const rule::CompileOptions& options);

/// The closed rule, a single truth value per scene.
double evaluate_closed(const LoadedRule& r, const SceneBundle& scene, const LogicSystem& logic,
                       const rule::CompileOptions& options);

/// Everything the monitor commands report for one scene. Ground truth fields
/// are filled when the scene carries the ground truth person channel; they
/// are derived with cfg.logic, while the rule is evaluated with logic.
struct SceneEvaluation {
  std::string scene_id;
  TruthMask formula;
  MonitorReport report;
  std::optional<TruthMask> fn_mask;     // is_FN on the monitor grid
  std::optional<double> gt_region_score;
  std::optional<bool> gt_region;
  std::optional<TruthMask> target;      // is_FN restricted to ground truth body parts
};

SceneEvaluation evaluate_scene(const LoadedRule& r, const SceneBundle& scene, const RunConfig& cfg,
                               const LogicSystem& logic);

/// Brings a binary mask onto another grid: block max when shrinking by an
/// integer factor, otherwise bilinear resampling binarized at 0.5.
TruthMask resample_binary(const TruthMask& m, MaskShape target);

}  // namespace rulemon
