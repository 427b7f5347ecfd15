#include "rulemon/config.hpp"

#include <set>

#include "rulemon/error.hpp"
#include "rulemon/io.hpp"
#include "rulemon/metrics.hpp"

namespace rulemon {

using nlohmann::json;

void RunConfig::validate() const {
  monitor.validate();
  if (n_bins < 1) throw UsageError("n_bins must be at least 1");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
  for (double b : betas)
    if (!(b > 0.0)) throw UsageError("betas must be positive");
  threshold_grid(thresholds);
}

json to_json(const RunConfig& c) {
  return {{"rule", c.rule},
          {"scenes", c.scenes},
          {"logic",
           {{"family", to_string(c.logic.family)},
            {"bool_threshold", c.logic.bool_threshold.value()},
            {"implication", to_string(c.logic.implication)},
            {"forall", to_string(c.logic.forall_mode)},
            {"exists", to_string(c.logic.exists_mode)}}},
          {"couple_bool_threshold", c.couple_bool_threshold},
          {"monitor",
           {{"t_px", c.monitor.t_px},
            {"t_reg", c.monitor.t_reg},
            {"t_gt_reg", c.monitor.t_gt_reg},
            {"t_ped", c.monitor.t_ped},
            {"ksize_m", c.monitor.ksize_m},
            {"ksize_gt", c.monitor.ksize_gt},
            {"region_mode", to_string(c.monitor.region_mode)},
            {"corner_case_floor", c.monitor.corner_case_floor}}},
          {"scaling", rule::to_string(c.compile.scaling)},
          {"literal_guards", c.compile.literal_guards},
          {"pred_person", c.pred_person},
          {"gt_person", c.gt_person},
          {"body_parts", c.body_parts},
          {"calibrated", c.calibrated},
          {"n_bins", c.n_bins},
          {"thresholds", c.thresholds},
          {"betas", c.betas},
          {"output_dir", c.output_dir},
          {"jobs", c.jobs}};
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw UsageError("unknown config key '" + where + k + "'");
  }
}

}  // namespace

RunConfig config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  try {
    reject_unknown(j,
                   {"rule", "scenes", "logic", "couple_bool_threshold", "monitor", "scaling", "literal_guards",
                    "pred_person", "gt_person", "body_parts", "calibrated", "n_bins", "thresholds", "betas",
                    "output_dir", "jobs"},
                   "");
    c.rule = j.value("rule", c.rule);
    c.scenes = j.value("scenes", c.scenes);
    if (j.contains("logic")) {
      const auto& l = j["logic"];
      reject_unknown(l, {"family", "bool_threshold", "implication", "forall", "exists"}, "logic.");
      if (l.contains("family")) c.logic.family = parse_family(l["family"].get<std::string>());
      if (l.contains("bool_threshold")) c.logic.bool_threshold = TruthValue(l["bool_threshold"].get<double>());
      if (l.contains("implication")) c.logic.implication = parse_implication(l["implication"].get<std::string>());
      if (l.contains("forall")) c.logic.forall_mode = parse_forall_mode(l["forall"].get<std::string>());
      if (l.contains("exists")) c.logic.exists_mode = parse_exists_mode(l["exists"].get<std::string>());
    }
    c.couple_bool_threshold = j.value("couple_bool_threshold", c.couple_bool_threshold);
    if (j.contains("monitor")) {
      const auto& m = j["monitor"];
      reject_unknown(m, {"t_px", "t_reg", "t_gt_reg", "t_ped", "ksize_m", "ksize_gt", "region_mode", "corner_case_floor"},
                     "monitor.");
      c.monitor.t_px = m.value("t_px", c.monitor.t_px);
      c.monitor.t_reg = m.value("t_reg", c.monitor.t_reg);
      c.monitor.t_gt_reg = m.value("t_gt_reg", c.monitor.t_gt_reg);
      c.monitor.t_ped = m.value("t_ped", c.monitor.t_ped);
      c.monitor.ksize_m = m.value("ksize_m", c.monitor.ksize_m);
      c.monitor.ksize_gt = m.value("ksize_gt", c.monitor.ksize_gt);
      if (m.contains("region_mode")) c.monitor.region_mode = parse_region_mode(m["region_mode"].get<std::string>());
      c.monitor.corner_case_floor = m.value("corner_case_floor", c.monitor.corner_case_floor);
    }
    if (j.contains("scaling")) c.compile.scaling = rule::parse_scaling_policy(j["scaling"].get<std::string>());
    c.compile.literal_guards = j.value("literal_guards", c.compile.literal_guards);
    c.pred_person = j.value("pred_person", c.pred_person);
    c.gt_person = j.value("gt_person", c.gt_person);
    c.body_parts = j.value("body_parts", c.body_parts);
    c.calibrated = j.value("calibrated", c.calibrated);
    c.n_bins = j.value("n_bins", c.n_bins);
    c.thresholds = j.value("thresholds", c.thresholds);
    c.betas = j.value("betas", c.betas);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed config: ") + e.what());
  } catch (const DataError& e) {
    throw UsageError(std::string("malformed config: ") + e.what());
  }
  return c;
}

std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("jobs");
  return io::fnv1a_hex(j.dump());
}

std::vector<double> threshold_grid(const std::string& spec) {
  if (spec == "dense") return dense_thresholds();
  if (spec.rfind("uniform:", 0) == 0) {
    try {
      return uniform_thresholds(std::stoi(spec.substr(8)));
    } catch (const std::logic_error&) {
    }
  }
  throw UsageError("unknown threshold grid '" + spec + "' (expected dense or uniform:<steps>)");
}

}  // namespace rulemon
