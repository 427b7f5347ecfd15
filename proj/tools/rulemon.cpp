#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rulemon/concept_head.hpp"
#include "rulemon/config.hpp"
#include "rulemon/datagen.hpp"
#include "rulemon/error.hpp"
#include "rulemon/io.hpp"
#include "rulemon/metrics.hpp"
#include "rulemon/monitor.hpp"
#include "rulemon/parallel.hpp"
#include "rulemon/pipeline.hpp"
#include "rulemon/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rulemon;

namespace {

// Flags shared by the rule commands. Anything given on the command line
// replaces the value from --config.
struct Common {
  std::string config_file;
  std::string rule;
  std::vector<std::string> scenes;
  std::string logic, implication, forall, exists, region_mode, scaling, thresholds;
  double bool_threshold = 0.5, t_px = 0.5, t_reg = 0.5, t_gt_reg = 0.5, t_ped = 0.5;
  int ksize = 33, ksize_gt = 33, jobs = 1;
  bool literal_guards = false, no_couple = false;
  std::string out;
  std::map<std::string, CLI::Option*> given;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "JSON run configuration")->check(CLI::ExistingFile);
  auto& g = c.given;
  g["rule"] = app->add_option("--rule", c.rule, "rule file");
  g["scenes"] = app->add_option("--scenes", c.scenes, "scene manifests or directories of scenes");
  g["logic"] = app->add_option("--logic", c.logic, "goedel | lukasiewicz | product | boolean");
  g["implication"] = app->add_option("--implication", c.implication, "s | r");
  g["forall"] = app->add_option("--forall", c.forall, "mean | tnorm_reduce");
  g["exists"] = app->add_option("--exists", c.exists, "max | tconorm_reduce | mean");
  g["bool_threshold"] = app->add_option("--bool-threshold", c.bool_threshold, "Boolean binarization threshold");
  g["no_couple"] = app->add_flag("--no-couple", c.no_couple, "keep the Boolean threshold fixed while sweeping");
  g["region_mode"] = app->add_option("--region-mode", c.region_mode, "simple | peaks");
  g["ksize"] = app->add_option("--ksize", c.ksize, "peaks window of the monitor");
  g["ksize_gt"] = app->add_option("--ksize-gt", c.ksize_gt, "peaks window of the region ground truth");
  g["t_px"] = app->add_option("--t-px", c.t_px, "pixel alarm threshold");
  g["t_reg"] = app->add_option("--t-reg", c.t_reg, "region alarm threshold");
  g["t_gt_reg"] = app->add_option("--t-gt-reg", c.t_gt_reg, "region ground truth threshold");
  g["t_ped"] = app->add_option("--t-ped", c.t_ped, "false negative pixel threshold");
  g["scaling"] = app->add_option("--scaling", c.scaling, "upscale | downscale");
  g["literal_guards"] = app->add_flag("--literal-guards", c.literal_guards, "quantify over P with explicit guards");
  g["thresholds"] = app->add_option("--thresholds", c.thresholds, "dense | uniform:<steps>");
  g["out"] = app->add_option("--out", c.out, "output directory");
  g["jobs"] = app->add_option("--jobs,-j", c.jobs, "worker threads");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config_file.empty()) cfg = config_from_json(io::read_json(c.config_file));
  const auto has = [&](const char* k) { return c.given.at(k)->count() > 0; };
  if (has("rule")) cfg.rule = c.rule;
  if (has("scenes")) cfg.scenes = c.scenes;
  try {
    if (has("logic")) cfg.logic.family = parse_family(c.logic);
    if (has("implication")) cfg.logic.implication = parse_implication(c.implication);
    if (has("forall")) cfg.logic.forall_mode = parse_forall_mode(c.forall);
    if (has("exists")) cfg.logic.exists_mode = parse_exists_mode(c.exists);
    if (has("bool_threshold")) cfg.logic.bool_threshold = TruthValue(c.bool_threshold);
    if (has("region_mode")) cfg.monitor.region_mode = parse_region_mode(c.region_mode);
    if (has("scaling")) cfg.compile.scaling = rule::parse_scaling_policy(c.scaling);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  if (has("no_couple")) cfg.couple_bool_threshold = false;
  if (has("ksize")) cfg.monitor.ksize_m = c.ksize;
  if (has("ksize_gt")) cfg.monitor.ksize_gt = c.ksize_gt;
  if (has("t_px")) cfg.monitor.t_px = c.t_px;
  if (has("t_reg")) cfg.monitor.t_reg = c.t_reg;
  if (has("t_gt_reg")) cfg.monitor.t_gt_reg = c.t_gt_reg;
  if (has("t_ped")) cfg.monitor.t_ped = c.t_ped;
  if (has("literal_guards")) cfg.compile.literal_guards = true;
  if (has("thresholds")) cfg.thresholds = c.thresholds;
  if (has("out")) cfg.output_dir = c.out;
  if (has("jobs")) cfg.jobs = c.jobs;
  cfg.validate();
  if (cfg.rule.empty()) throw UsageError("no rule given (--rule or \"rule\" in the config)");
  if (cfg.scenes.empty()) throw UsageError("no scenes given (--scenes or \"scenes\" in the config)");
  return cfg;
}

std::vector<SceneBundle> load_scenes(const RunConfig& cfg) {
  const auto paths = io::collect_manifests(cfg.scenes);
  std::vector<SceneBundle> scenes(paths.size());
  parallel_for(paths.size(), cfg.jobs, [&](std::size_t i) { scenes[i] = io::load_scene(paths[i]); });
  return scenes;
}

void emit(const RunConfig& cfg, const std::string& name, json result) {
  fs::create_directories(cfg.output_dir);
  io::write_text(fs::path(cfg.output_dir) / "config.json", to_json(cfg).dump(2) + "\n");
  io::write_text(fs::path(cfg.output_dir) / name, result.dump(2) + "\n");
  std::cout << result.dump(2) << "\n";
}

json rates_json(const Rates& r) {
  const auto opt = [](bool undefined, double v) { return undefined ? json(nullptr) : json(v); };
  return {{"tp", r.tp},
          {"fp", r.fp},
          {"tn", r.tn},
          {"fn", r.fn},
          {"precision", opt(r.precision_undefined, r.precision)},
          {"recall", opt(r.recall_undefined, r.recall)},
          {"tnr", opt(r.tnr_undefined, r.tnr)},
          {"fpr", r.fpr},
          {"f1", r.f_beta(1.0)}};
}

Rates rates_of(const std::vector<bool>& pred, const std::vector<bool>& gt) {
  std::unique_ptr<bool[]> p(new bool[pred.size()]), g(new bool[gt.size()]);
  std::copy(pred.begin(), pred.end(), p.get());
  std::copy(gt.begin(), gt.end(), g.get());
  return classification_rates({p.get(), pred.size()}, {g.get(), gt.size()});
}

SweepResult sweep_of(const std::vector<double>& scores, const std::vector<bool>& gt,
                     const std::vector<double>& thresholds) {
  std::unique_ptr<bool[]> g(new bool[gt.size()]);
  std::copy(gt.begin(), gt.end(), g.get());
  return sweep(scores, {g.get(), gt.size()}, thresholds);
}

SweepResult sweep_coupled_of(const std::function<std::vector<double>(double)>& at, const std::vector<bool>& gt,
                             const std::vector<double>& thresholds) {
  std::unique_ptr<bool[]> g(new bool[gt.size()]);
  std::copy(gt.begin(), gt.end(), g.get());
  return sweep_coupled(at, {g.get(), gt.size()}, thresholds);
}

// ---- eval ----------------------------------------------------------------

int cmd_eval(const Common& c, const std::string& format) {
  const RunConfig cfg = resolve(c);
  const auto fmt = io::parse_mask_format(format);
  const LoadedRule r = load_rule_file(cfg.rule);
  const auto scenes = load_scenes(cfg);
  const LogicSystem logic = effective_logic(cfg, cfg.logic.bool_threshold.value());
  std::vector<json> rows(scenes.size());
  std::vector<double> scores(scenes.size());
  const fs::path mask_dir = fs::path(cfg.output_dir) / "masks";
  fs::create_directories(mask_dir);
  parallel_for(scenes.size(), cfg.jobs, [&](std::size_t i) {
    const auto& s = scenes[i];
    const TruthMask f = evaluate_open(r, s, logic, cfg.compile);
    scores[i] = evaluate_closed(r, s, logic, cfg.compile);
    const fs::path file = mask_dir / (s.id + (fmt == io::MaskFormat::Png ? ".png" : ".f32"));
    if (fmt == io::MaskFormat::Png) {
      io::write_png_mask(file, f);
    } else {
      io::write_raw_mask(file, f);
    }
    const auto v = f.values();
    rows[i] = {{"scene", s.id},
               {"score", scores[i]},
               {"formula_shape", {f.height(), f.width()}},
               {"formula_min", *std::min_element(v.begin(), v.end())},
               {"formula_mean", reduce_forall(v, LogicSystem{.forall_mode = ForallMode::Mean})},
               {"formula_file", file.string()}};
  });
  emit(cfg, "eval.json",
       {{"command", "eval"},
        {"config_hash", config_hash(cfg)},
        {"rule", r.id},
        {"logic", logic.describe()},
        {"global_score", global_consistency(scores, logic)},
        {"scenes", rows}});
  return 0;
}

// ---- monitor -------------------------------------------------------------

int cmd_monitor(const Common& c, bool write_masks) {
  const RunConfig cfg = resolve(c);
  const LoadedRule r = load_rule_file(cfg.rule);
  const auto scenes = load_scenes(cfg);
  const LogicSystem logic = effective_logic(cfg, cfg.monitor.t_px);
  std::vector<SceneEvaluation> evals(scenes.size());
  parallel_for(scenes.size(), cfg.jobs, [&](std::size_t i) { evals[i] = evaluate_scene(r, scenes[i], cfg, logic); });

  const fs::path alarm_dir = fs::path(cfg.output_dir) / "alarms";
  if (write_masks) fs::create_directories(alarm_dir);
  json reports = json::array();
  std::vector<bool> px_pred, px_gt, img_pred, img_gt;
  bool have_gt = true;
  for (const auto& e : evals) {
    const auto& rep = e.report;
    const auto a = rep.alarms.values();
    json j = {{"scene", rep.scene_id},
              {"rule", rep.rule_id},
              {"logic", rep.logic},
              {"region_score", rep.region_score},
              {"verdict", rep.verdict},
              {"alarm_pixels", std::count_if(a.begin(), a.end(), [](double v) { return v >= 0.5; })}};
    if (write_masks) {
      const fs::path file = alarm_dir / (rep.scene_id + ".png");
      io::write_png_mask(file, rep.alarms);
      j["alarm_file"] = file.string();
    }
    if (e.gt_region) {
      j["gt_region_score"] = *e.gt_region_score;
      j["gt_region"] = *e.gt_region;
      const auto& target = e.target ? *e.target : *e.fn_mask;
      for (double v : a) px_pred.push_back(v >= 0.5);
      for (double v : target.values()) px_gt.push_back(v >= 0.5);
      img_pred.push_back(rep.verdict);
      img_gt.push_back(*e.gt_region);
    } else {
      have_gt = false;
    }
    reports.push_back(std::move(j));
  }
  json result = {{"command", "monitor"},
                 {"config_hash", config_hash(cfg)},
                 {"rule", r.id},
                 {"logic", logic.describe()},
                 {"alarmed_scenes", std::count_if(evals.begin(), evals.end(), [](const auto& e) { return e.report.verdict; })},
                 {"scenes", evals.size()},
                 {"reports", reports}};
  if (have_gt && !evals.empty()) {
    result["pixel_rates"] = rates_json(rates_of(px_pred, px_gt));
    result["image_rates"] = rates_json(rates_of(img_pred, img_gt));
  }
  emit(cfg, "monitor.json", result);
  return 0;
}

// ---- sweep ---------------------------------------------------------------

json sweep_json(const SweepResult& s, const std::vector<double>& betas) {
  json best = json::array();
  for (double b : betas) best.push_back({{"beta", b}, {"threshold", s.best_threshold(b)}, {"f_beta", s.best_f_beta(b)}});
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"auc_roc", opt(s.auc_roc)}, {"auc_exact", opt(s.auc_exact)}, {"f1_at_0.5", s.f_beta_at(0.5, 1.0)},
          {"best", best}};
}

void write_plots(const fs::path& dir, const SweepResult& px, const SweepResult& img) {
  const auto curve = [](const SweepResult& s, auto fx, auto fy) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : s.points) {
      const auto xy = std::pair{fx(p), fy(p)};
      if (std::isfinite(xy.first) && std::isfinite(xy.second)) pts.push_back(xy);
    }
    return pts;
  };
  const auto recall = [](const SweepPoint& p) { return p.rates.recall; };
  const auto precision = [](const SweepPoint& p) {
    return p.rates.precision_undefined ? std::nan("") : p.rates.precision;
  };
  const auto fpr = [](const SweepPoint& p) { return p.rates.fpr; };
  const auto thr = [](const SweepPoint& p) { return p.threshold; };
  const auto f1 = [](const SweepPoint& p) { return p.rates.f_beta(1.0); };
  io::write_text(dir / "pr.svg", svg::line_chart("Precision-recall", "recall", "precision",
                                                  {{"pixel", curve(px, recall, precision)},
                                                   {"image", curve(img, recall, precision)}}));
  io::write_text(dir / "roc.svg",
                 svg::line_chart("ROC", "false positive rate", "true positive rate",
                                 {{"pixel", curve(px, fpr, recall)}, {"image", curve(img, fpr, recall)}}, true));
  io::write_text(dir / "f1.svg", svg::line_chart("F1 by threshold", "threshold", "F1",
                                                  {{"pixel", curve(px, thr, f1)}, {"image", curve(img, thr, f1)}}));
}

int cmd_sweep(const Common& c, bool plots) {
  const RunConfig cfg = resolve(c);
  const LoadedRule r = load_rule_file(cfg.rule);
  const auto scenes = load_scenes(cfg);
  const auto thresholds = threshold_grid(cfg.thresholds);

  std::vector<SceneEvaluation> base(scenes.size());
  parallel_for(scenes.size(), cfg.jobs,
               [&](std::size_t i) { base[i] = evaluate_scene(r, scenes[i], cfg, cfg.logic); });
  std::vector<bool> px_gt, img_gt;
  for (const auto& e : base) {
    if (!e.gt_region) throw DataError("scene '" + e.scene_id + "' has no ground truth channel '" + cfg.gt_person + "'");
    for (double v : (e.target ? *e.target : *e.fn_mask).values()) px_gt.push_back(v >= 0.5);
    img_gt.push_back(*e.gt_region);
  }
  const auto collect = [&](const std::vector<MonitorReport>& reps, bool pixel) {
    std::vector<double> out;
    for (const auto& rep : reps) {
      if (pixel) {
        out.insert(out.end(), rep.monitor.values().begin(), rep.monitor.values().end());
      } else {
        out.push_back(rep.region_score);
      }
    }
    return out;
  };
  const auto reports_at = [&](const LogicSystem& logic) {
    std::vector<MonitorReport> reps(scenes.size());
    parallel_for(scenes.size(), cfg.jobs, [&](std::size_t i) {
      reps[i] = make_monitor_report(evaluate_open(r, scenes[i], logic, cfg.compile), cfg.monitor, logic, scenes[i].id,
                                    r.id);
    });
    return reps;
  };

  SweepResult px, img;
  const bool coupled = cfg.logic.is_boolean() && cfg.couple_bool_threshold;
  if (coupled) {
    px = sweep_coupled_of([&](double t) { return collect(reports_at(effective_logic(cfg, t)), true); }, px_gt,
                          thresholds);
    img = sweep_coupled_of([&](double t) { return collect(reports_at(effective_logic(cfg, t)), false); }, img_gt,
                           thresholds);
  } else {
    std::vector<MonitorReport> reps;
    for (auto& e : base) reps.push_back(std::move(e.report));
    px = sweep_of(collect(reps, true), px_gt, thresholds);
    img = sweep_of(collect(reps, false), img_gt, thresholds);
  }

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  io::write_text(dir / "sweep_pixel.csv", sweep_csv(px));
  io::write_text(dir / "sweep_image.csv", sweep_csv(img));
  if (plots) write_plots(dir, px, img);
  emit(cfg, "sweep.json",
       {{"command", "sweep"},
        {"config_hash", config_hash(cfg)},
        {"rule", r.id},
        {"logic", cfg.logic.describe()},
        {"coupled_bool_threshold", coupled},
        {"thresholds", thresholds.size()},
        {"scenes", scenes.size()},
        {"positive_scenes", std::count(img_gt.begin(), img_gt.end(), true)},
        {"pixel", sweep_json(px, cfg.betas)},
        {"image", sweep_json(img, cfg.betas)}});
  return 0;
}

// ---- rank ----------------------------------------------------------------

int cmd_rank(const Common& c, std::size_t top_k) {
  const RunConfig cfg = resolve(c);
  const LoadedRule r = load_rule_file(cfg.rule);
  const auto scenes = load_scenes(cfg);
  const LogicSystem logic = effective_logic(cfg, cfg.monitor.t_px);
  std::vector<std::pair<std::string, TruthMask>> monitors(scenes.size());
  parallel_for(scenes.size(), cfg.jobs, [&](std::size_t i) {
    monitors[i] = {scenes[i].id, pixel_monitor(evaluate_open(r, scenes[i], logic, cfg.compile), logic)};
  });
  json ranked = json::array();
  for (const auto& s : rank_corner_cases(monitors, top_k, logic, cfg.monitor.corner_case_floor)) {
    ranked.push_back({{"scene", s.id}, {"score", s.score}});
  }
  emit(cfg, "rank.json",
       {{"command", "rank"},
        {"config_hash", config_hash(cfg)},
        {"rule", r.id},
        {"logic", logic.describe()},
        {"top_k", top_k},
        {"ranked", ranked}});
  return 0;
}

// ---- compare -------------------------------------------------------------

int cmd_compare(const Common& c, const std::vector<std::string>& variants) {
  const RunConfig base = resolve(c);
  std::vector<std::pair<std::string, RunConfig>> configs;
  if (variants.empty()) {
    for (const Family f : {Family::Goedel, Family::Lukasiewicz, Family::Product, Family::Boolean}) {
      RunConfig v = base;
      v.logic.family = f;
      configs.emplace_back(to_string(f), v);
    }
  } else {
    for (const auto& file : variants) {
      RunConfig v = config_from_json(io::read_json(file), base);
      v.validate();
      configs.emplace_back(fs::path(file).stem().string(), v);
    }
  }
  const auto scenes = load_scenes(base);
  json rows = json::array();
  for (const auto& [name, cfg] : configs) {
    const LoadedRule r = load_rule_file(cfg.rule);
    const LogicSystem logic = effective_logic(cfg, cfg.monitor.t_px);
    std::vector<double> scores(scenes.size());
    std::vector<int> verdicts(scenes.size());
    parallel_for(scenes.size(), base.jobs, [&](std::size_t i) {
      const auto rep =
          make_monitor_report(evaluate_open(r, scenes[i], logic, cfg.compile), cfg.monitor, logic, scenes[i].id, r.id);
      scores[i] = evaluate_closed(r, scenes[i], logic, cfg.compile);
      verdicts[i] = rep.verdict;
    });
    double mean = 0.0;
    for (double s : scores) mean += s / static_cast<double>(scores.size());
    rows.push_back({{"name", name},
                    {"config_hash", config_hash(cfg)},
                    {"rule", r.id},
                    {"logic", logic.describe()},
                    {"global_score", global_consistency(scores, logic)},
                    {"mean_scene_score", mean},
                    {"min_scene_score", *std::min_element(scores.begin(), scores.end())},
                    {"alarmed_scenes", std::count(verdicts.begin(), verdicts.end(), 1)}});
  }
  std::fprintf(stderr, "%-16s %-56s %12s %12s %8s\n", "config", "logic", "global", "mean", "alarms");
  for (const auto& row : rows) {
    std::fprintf(stderr, "%-16s %-56s %12.6f %12.6f %8d\n", row["name"].get<std::string>().c_str(),
                 row["logic"].get<std::string>().c_str(), row["global_score"].get<double>(),
                 row["mean_scene_score"].get<double>(), row["alarmed_scenes"].get<int>());
  }
  emit(base, "compare.json",
       {{"command", "compare"}, {"config_hash", config_hash(base)}, {"scenes", scenes.size()}, {"configs", rows}});
  return 0;
}

// ---- gen -----------------------------------------------------------------

struct GenOptions {
  std::string spec_file;
  std::string out = "scenes";
  std::string format = "raw";
  int count = 10;
  std::uint64_t seed = 0;
  int height = 0, width = 0;
  double fn_prob = -1.0, fp_prob = -1.0, noise = -1.0;
  std::string probe;
  int probe_stride = 4;
};

// Probe training data from generated scenes: the concept prediction channels
// block-averaged onto a coarser grid are the activations, the ground truth
// mask of one concept is the label.
ActivationSample probe_sample(const SceneBundle& s, const std::string& concept_name, int stride,
                              const std::vector<std::string>& channels, MaskShape grid) {
  ActivationSample out;
  out.activations.reserve(channels.size() * grid.size());
  for (const auto& name : channels) {
    const TruthMask& src = s.masks.at(name);
    const TruthMask m = src.shape() == s.image ? src : upscale_bilinear(src, s.image);
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        double sum = 0.0;
        for (int dy = 0; dy < stride; ++dy)
          for (int dx = 0; dx < stride; ++dx) sum += m(y * stride + dy, x * stride + dx);
        out.activations.push_back(sum / (stride * stride));
      }
    }
  }
  const auto it = s.masks.find("gt_" + concept_name);
  if (it == s.masks.end()) throw UsageError("unknown probe concept '" + concept_name + "'");
  out.label = it->second;
  return out;
}

int cmd_gen(const GenOptions& o, int jobs) {
  SceneSpec spec;
  if (!o.spec_file.empty()) spec = io::spec_from_json(io::read_json(o.spec_file));
  spec.seed = o.seed ? o.seed : spec.seed;
  if (o.height > 0) spec.image.height = o.height;
  if (o.width > 0) spec.image.width = o.width;
  if (o.fn_prob >= 0.0) spec.fn_prob = o.fn_prob;
  if (o.fp_prob >= 0.0) spec.fp_prob = o.fp_prob;
  if (o.noise >= 0.0) spec.noise = o.noise;
  spec.validate();
  if (o.count < 1) throw UsageError("count must be at least 1");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
  const auto format = io::parse_mask_format(o.format);

  std::vector<SceneBundle> scenes(static_cast<std::size_t>(o.count));
  std::vector<std::string> written(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    scenes[i] = generate_scene(spec, i);
    written[i] = io::write_scene(scenes[i], fs::path(o.out) / scenes[i].id, format).string();
  });
  json result = {{"command", "gen"}, {"spec", io::spec_to_json(spec)}, {"spec_hash", io::fnv1a_hex(io::spec_to_json(spec).dump())},
                 {"scenes", written}};

  if (!o.probe.empty()) {
    const int s = o.probe_stride;
    if (s < 1 || spec.image.height % s || spec.image.width % s) {
      throw UsageError("probe stride must divide the image size " + to_string(spec.image));
    }
    ActivationStack stack;
    std::vector<std::string> channels;
    for (const auto& d : default_concepts()) channels.push_back(d.name);
    stack.channels = static_cast<int>(channels.size());
    stack.grid = {spec.image.height / s, spec.image.width / s};
    stack.samples.resize(scenes.size());
    parallel_for(scenes.size(), jobs,
                 [&](std::size_t i) { stack.samples[i] = probe_sample(scenes[i], o.probe, s, channels, stack.grid); });
    result["probe"] = io::write_activations(stack, fs::path(o.out) / ("probe_" + o.probe)).string();
  }
  io::write_text(fs::path(o.out) / "gen.json", result.dump(2) + "\n");
  std::cout << result.dump(2) << "\n";
  return 0;
}

// ---- heads ---------------------------------------------------------------

struct HeadOptions {
  std::string activations, validation, head, out = "head.json", loss = "bce", layer_id, prior_grid, report_dir;
  int epochs = 7, batch = 8, n_bins = 10;
  double lr = 1e-3, prior_precision = 1.0, validation_fraction = 0.2;
  std::uint64_t seed = 0;
};

int cmd_train_head(const HeadOptions& o) {
  TrainConfig tc;
  tc.loss = parse_loss(o.loss);
  tc.epochs = o.epochs;
  tc.lr = o.lr;
  tc.batch = o.batch;
  tc.prior_precision = o.prior_precision;
  tc.validation_fraction = o.validation_fraction;
  tc.seed = o.seed;
  tc.layer_id = o.layer_id;
  if (tc.epochs < 1 || tc.batch < 1 || !(tc.lr > 0.0) || !(tc.prior_precision >= 0.0) ||
      !(tc.validation_fraction >= 0.0 && tc.validation_fraction < 1.0)) {
    throw UsageError("invalid training settings");
  }
  const ActivationStack data = io::load_activations(o.activations);
  TrainLog log;
  const ConceptHead head = train_head(data, tc, &log);
  io::save_head(o.out, head);
  const json result = {{"command", "train-head"},
                       {"head", o.out},
                       {"loss", to_string(tc.loss)},
                       {"epochs_run", log.epochs_run},
                       {"stopped_early", log.stopped_early},
                       {"train_loss", log.train_loss},
                       {"validation_loss", log.validation_loss}};
  std::cout << result.dump(2) << "\n";
  return 0;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("bad number '" + item + "' in list '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

int cmd_calibrate(const HeadOptions& o) {
  const ConceptHead map = io::load_head(o.head);
  const ActivationStack train = io::load_activations(o.activations);
  json result = {{"command", "calibrate"}, {"head", o.out}};
  ConceptHead out;
  if (!o.prior_grid.empty()) {
    if (o.validation.empty()) throw UsageError("--prior-grid needs --validation");
    const auto sel = select_prior_precision(map, train, io::load_activations(o.validation), parse_list(o.prior_grid),
                                            o.n_bins);
    out = sel.head;
    json grid = json::array();
    for (const auto& [lambda, ece] : sel.ece_by_precision) grid.push_back({{"prior_precision", lambda}, {"ece", ece}});
    result["ece_by_prior_precision"] = grid;
  } else {
    if (!(o.prior_precision > 0.0)) throw UsageError("prior precision must be positive");
    out = laplace_fit(map, train, o.prior_precision);
  }
  result["prior_precision"] = *out.prior_precision;
  io::save_head(o.out, out);
  std::cout << result.dump(2) << "\n";
  return 0;
}

json calibration_json(const CalibrationReport& r) {
  json bins = json::array();
  for (const auto& b : r.bins) {
    bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"confidence", b.confidence}, {"accuracy", b.accuracy},
                    {"count", b.count}});
  }
  return {{"ece", r.ece}, {"mce", r.mce}, {"bins", bins}};
}

int cmd_calib_report(const HeadOptions& o) {
  if (o.n_bins < 1) throw UsageError("bins must be at least 1");
  const ConceptHead head = io::load_head(o.head);
  const ActivationStack data = io::load_activations(o.activations);
  json result = {{"command", "calib-report"}, {"head", o.head}};
  std::vector<svg::Series> series;
  const auto add = [&](const std::string& name, bool calibrated) {
    const auto px = predict_pixels(head, data, calibrated);
    const auto rep = binary_calibration(px.probabilities, px.labels, o.n_bins);
    result[name] = calibration_json(rep);
    svg::Series s{name, {}};
    for (const auto& b : rep.bins)
      if (b.count) s.points.emplace_back(b.confidence, b.accuracy);
    series.push_back(std::move(s));
  };
  add("map", false);
  if (head.calibrated()) add("laplace", true);
  if (!o.report_dir.empty()) {
    fs::create_directories(o.report_dir);
    io::write_text(fs::path(o.report_dir) / "reliability.svg",
                   svg::line_chart("Reliability", "confidence", "accuracy", series, true));
    io::write_text(fs::path(o.report_dir) / "calibration.json", result.dump(2) + "\n");
  }
  std::cout << result.dump(2) << "\n";
  return 0;
}

// ---- errors --------------------------------------------------------------

int fail(const char* kind, int code, const std::string& message, json extra = json::object()) {
  extra["kind"] = kind;
  extra["exit_code"] = code;
  extra["message"] = message;
  std::cerr << json{{"error", extra}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuzzy logic rule monitoring for segmentation outputs"};
  app.require_subcommand(1);

  Common eval_c, monitor_c, sweep_c, rank_c, compare_c;
  std::string format = "raw";
  bool masks = false, plots = false;
  std::size_t top_k = 10;
  std::vector<std::string> variants;

  auto* eval = app.add_subcommand("eval", "Evaluate a rule on scenes: formula masks and scores");
  add_common(eval, eval_c);
  eval->add_option("--format", format, "mask file format: raw | png");

  auto* monitor = app.add_subcommand("monitor", "Pixel and region monitor reports with aggregate rates");
  add_common(monitor, monitor_c);
  monitor->add_flag("--write-alarms", masks, "write alarm masks as PNG");

  auto* sweep_cmd = app.add_subcommand("sweep", "Threshold sweep at pixel and image level");
  add_common(sweep_cmd, sweep_c);
  sweep_cmd->add_flag("--plots", plots, "write PR, ROC and F1-by-threshold SVG plots");

  auto* rank = app.add_subcommand("rank", "Rank scenes as corner case candidates");
  add_common(rank, rank_c);
  rank->add_option("--top-k,-k", top_k, "scenes to keep (0 keeps all)");

  auto* compare = app.add_subcommand("compare", "Global consistency scores of several configurations");
  add_common(compare, compare_c);
  compare->add_option("--variants", variants,
                      "config files applied on top of the base config (default: the four logic families)");

  GenOptions gen_opt;
  int gen_jobs = 1;
  auto* gen = app.add_subcommand("gen", "Generate synthetic scenes");
  gen->add_option("--spec", gen_opt.spec_file, "scene spec JSON")->check(CLI::ExistingFile);
  gen->add_option("--out", gen_opt.out, "output directory");
  gen->add_option("--count,-n", gen_opt.count, "number of scenes");
  gen->add_option("--seed", gen_opt.seed, "generator seed");
  gen->add_option("--height", gen_opt.height, "image height");
  gen->add_option("--width", gen_opt.width, "image width");
  gen->add_option("--fn-prob", gen_opt.fn_prob, "probability of dropping a person prediction");
  gen->add_option("--fp-prob", gen_opt.fp_prob, "probability of a spurious person prediction");
  gen->add_option("--noise", gen_opt.noise, "concept mask noise amplitude");
  gen->add_option("--format", gen_opt.format, "mask file format: raw | png");
  gen->add_option("--probe", gen_opt.probe, "also write a probe training stack for this concept");
  gen->add_option("--probe-stride", gen_opt.probe_stride, "feature grid stride of the probe stack");
  gen->add_option("--jobs,-j", gen_jobs, "worker threads");

  HeadOptions head_opt;
  auto* train = app.add_subcommand("train-head", "Train a linear concept probe");
  train->add_option("--activations", head_opt.activations, "activation stack manifest")->required();
  train->add_option("--out", head_opt.out, "head file to write");
  train->add_option("--loss", head_opt.loss, "bce | dice | balanced_bce");
  train->add_option("--epochs", head_opt.epochs, "training epochs");
  train->add_option("--lr", head_opt.lr, "learning rate");
  train->add_option("--batch", head_opt.batch, "samples per step");
  train->add_option("--prior-precision", head_opt.prior_precision, "L2 prior precision");
  train->add_option("--validation-fraction", head_opt.validation_fraction, "held-out share for early stopping");
  train->add_option("--seed", head_opt.seed, "shuffling seed");
  train->add_option("--layer-id", head_opt.layer_id, "layer the probe reads");

  auto* calibrate = app.add_subcommand("calibrate", "Fit a Laplace posterior to a trained head");
  calibrate->add_option("--head", head_opt.head, "trained head")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--activations", head_opt.activations, "training activation stack")->required();
  calibrate->add_option("--out", head_opt.out, "calibrated head file to write");
  calibrate->add_option("--prior-precision", head_opt.prior_precision, "prior precision");
  calibrate->add_option("--prior-grid", head_opt.prior_grid, "comma separated precisions to select from");
  calibrate->add_option("--validation", head_opt.validation, "validation stack for --prior-grid");
  calibrate->add_option("--bins", head_opt.n_bins, "calibration bins for --prior-grid");

  auto* report = app.add_subcommand("calib-report", "Calibration errors and reliability diagram of a head");
  report->add_option("--head", head_opt.head, "head file")->required()->check(CLI::ExistingFile);
  report->add_option("--activations", head_opt.activations, "evaluation activation stack")->required();
  report->add_option("--bins", head_opt.n_bins, "calibration bins");
  report->add_option("--out", head_opt.report_dir, "directory for reliability.svg and calibration.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", 1, e.what());
  }

  try {
    if (eval->parsed()) return cmd_eval(eval_c, format);
    if (monitor->parsed()) return cmd_monitor(monitor_c, masks);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_c, plots);
    if (rank->parsed()) return cmd_rank(rank_c, top_k);
    if (compare->parsed()) return cmd_compare(compare_c, variants);
    if (gen->parsed()) return cmd_gen(gen_opt, gen_jobs);
    if (train->parsed()) return cmd_train_head(head_opt);
    if (calibrate->parsed()) return cmd_calibrate(head_opt);
    if (report->parsed()) return cmd_calib_report(head_opt);
  } catch (const UsageError& e) {
    return fail("usage", 1, e.what());
  } catch (const ParseError& e) {
    return fail("data", 2, e.what(), {{"line", e.line()}, {"column", e.column()}});
  } catch (const DataError& e) {
    return fail("data", 2, e.what());
  } catch (const NumericError& e) {
    return fail("numeric", 3, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("data", 2, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail("data", 2, e.what());
  }
  return 1;
}
