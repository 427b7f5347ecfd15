#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "rulemon/logic.hpp"
#include "rulemon/monitor.hpp"
#include "rulemon/rule/plan.hpp"

namespace rulemon {

/// Settings shared by the command line tools. Loaded from a JSON config
/// file; command line flags override individual fields.
struct RunConfig {
  std::string rule;
  std::vector<std::string> scenes;
  LogicSystem logic;
  // Boolean family only: binarize at whichever threshold is being applied or
  // swept instead of logic.bool_threshold.
  bool couple_bool_threshold = true;
  MonitorConfig monitor;
  rule::CompileOptions compile;
  std::string pred_person = "person";
  std::string gt_person = "gt_person";
  std::vector<std::string> body_parts{"eye", "arm", "wrist", "leg", "ankle"};
  bool calibrated = false;
  int n_bins = 10;
  std::string thresholds = "dense";  // "dense" or "uniform:<steps>"
  std::vector<double> betas{1.0, 0.1, 10.0};
  std::string output_dir = "out";
  int jobs = 1;

  /// Throws UsageError on invalid values.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);

/// Fields present in j replace those of base; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Hash of every field that affects results (everything except output_dir
/// and jobs), as 16 hex digits.
std::string config_hash(const RunConfig& c);

std::vector<double> threshold_grid(const std::string& spec);

}  // namespace rulemon
