#include "rulemon/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rulemon/error.hpp"
#include "rulemon/logic.hpp"

namespace rulemon {

const Keypoint* KeypointAnnotation::find(const std::string& name) const {
  for (const auto& k : keypoints)
    if (k.name == name) return &k;
  return nullptr;
}

const std::vector<ConceptDefinition>& default_concepts() {
  static const std::vector<ConceptDefinition> c{
      {"eye", {"left_eye", "right_eye"}, false},
      {"wrist", {"left_wrist", "right_wrist"}, false},
      {"ankle", {"left_ankle", "right_ankle"}, false},
      {"arm", {"left_shoulder", "left_elbow", "left_wrist", "right_shoulder", "right_elbow", "right_wrist"}, true},
      {"leg", {"left_hip", "left_knee", "left_ankle", "right_hip", "right_knee", "right_ankle"}, true},
  };
  return c;
}

const std::vector<std::pair<std::string, std::string>>& default_skeleton() {
  static const std::vector<std::pair<std::string, std::string>> s{
      {"left_eye", "right_eye"},           {"left_shoulder", "right_shoulder"}, {"left_shoulder", "left_elbow"},
      {"left_elbow", "left_wrist"},        {"right_shoulder", "right_elbow"},   {"right_elbow", "right_wrist"},
      {"left_shoulder", "left_hip"},       {"right_shoulder", "right_hip"},     {"left_hip", "right_hip"},
      {"left_hip", "left_knee"},           {"left_knee", "left_ankle"},         {"right_hip", "right_knee"},
      {"right_knee", "right_ankle"},
  };
  return s;
}

namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

// Sets pixels whose centers lie within radius of segment a-b (a disc when a == b).
void paint_capsule(std::vector<double>& m, MaskShape shape, double ax, double ay, double bx, double by, double radius) {
  const int r0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - radius - 1)));
  const int r1 = std::min(shape.height - 1, static_cast<int>(std::ceil(std::max(ay, by) + radius + 1)));
  const int c0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - radius - 1)));
  const int c1 = std::min(shape.width - 1, static_cast<int>(std::ceil(std::max(ax, bx) + radius + 1)));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      if (segment_distance(c + 0.5, r + 0.5, ax, ay, bx, by) <= radius) m[static_cast<std::size_t>(r) * shape.width + c] = 1.0;
}

}  // namespace

std::map<std::string, TruthMask> keypoints_to_concept_masks(const KeypointAnnotation& ann, MaskShape image,
                                                            const std::vector<ConceptDefinition>& concepts) {
  const double height = ann.body_height.value_or(ann.box.height());
  const double radius = 0.05 * height / 2.0;
  std::map<std::string, TruthMask> out;
  for (const auto& def : concepts) {
    std::vector<double> m(image.size(), 0.0);
    const auto member = [&](const std::string& n) {
      return std::find(def.keypoints.begin(), def.keypoints.end(), n) != def.keypoints.end();
    };
    for (const auto& name : def.keypoints) {
      const Keypoint* k = ann.find(name);
      if (k && k->visible) paint_capsule(m, image, k->x, k->y, k->x, k->y, radius);
    }
    if (def.limb) {
      for (const auto& [a, b] : ann.links) {
        if (!member(a) || !member(b)) continue;
        const Keypoint* ka = ann.find(a);
        const Keypoint* kb = ann.find(b);
        if (ka && kb && ka->visible && kb->visible) paint_capsule(m, image, ka->x, ka->y, kb->x, kb->y, radius);
      }
    }
    out.emplace(def.name, TruthMask(image, std::move(m)));
  }
  return out;
}

KeypointAnnotation person_template(const BoundingBox& box) {
  const double x0 = box.x0(), y0 = box.y0(), w = box.width(), h = box.height();
  const double cx = x0 + w / 2;
  const auto at = [&](const char* name, double fx, double fy) { return Keypoint{name, cx + fx * w, y0 + fy * h, true}; };
  KeypointAnnotation a;
  a.box = box;
  a.links = default_skeleton();
  a.keypoints = {
      at("left_eye", -0.08, 0.07),       at("right_eye", 0.08, 0.07),
      at("left_shoulder", -0.33, 0.25),  at("right_shoulder", 0.33, 0.25),
      at("left_elbow", -0.36, 0.40),     at("right_elbow", 0.36, 0.40),
      at("left_wrist", -0.38, 0.54),     at("right_wrist", 0.38, 0.54),
      at("left_hip", -0.15, 0.56),       at("right_hip", 0.15, 0.56),
      at("left_knee", -0.16, 0.77),      at("right_knee", 0.16, 0.77),
      at("left_ankle", -0.17, 0.96),     at("right_ankle", 0.17, 0.96),
  };
  return a;
}

void SceneSpec::validate() const {
  const auto prob = [](double p, const char* n) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError(std::string(n) + " must lie in [0,1]");
  };
  prob(fn_prob, "fn_prob");
  prob(fp_prob, "fp_prob");
  prob(shrink_prob, "shrink_prob");
  prob(score_min, "score_min");
  prob(score_max, "score_max");
  prob(noise, "noise");
  if (image.height < 1 || image.width < 1) throw UsageError("image size must be positive");
  if (min_persons < 0 || max_persons < min_persons) throw UsageError("invalid person count range");
  if (!(min_height > 0.0) || max_height < min_height) throw UsageError("invalid person height range");
  if (!(aspect > 0.0)) throw UsageError("aspect must be positive");
  if (score_max < score_min) throw UsageError("score_max below score_min");
  if (!(shrink_min > 0.0) || shrink_max < shrink_min || shrink_max > 1.0) throw UsageError("invalid shrink range");
  if (!(blur_sigma >= 0.0)) throw UsageError("blur_sigma must be non-negative");
  if (concept_scale < 1 || image.height % concept_scale || image.width % concept_scale) {
    throw UsageError("concept_scale must divide the image size");
  }
}

TruthMask gaussian_blur(const TruthMask& m, double sigma) {
  if (sigma <= 0.0) return m;
  const int rad = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * rad + 1));
  for (int i = -rad; i <= rad; ++i) k[static_cast<std::size_t>(i + rad)] = std::exp(-i * i / (2 * sigma * sigma));
  const int h = m.height(), w = m.width();
  std::vector<double> tmp(m.size()), out(m.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0, ws = 0;
      for (int d = std::max(-rad, -c); d <= std::min(rad, w - 1 - c); ++d) {
        s += k[static_cast<std::size_t>(d + rad)] * m(r, c + d);
        ws += k[static_cast<std::size_t>(d + rad)];
      }
      tmp[m.index(r, c)] = s / ws;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0, ws = 0;
      for (int d = std::max(-rad, -r); d <= std::min(rad, h - 1 - r); ++d) {
        s += k[static_cast<std::size_t>(d + rad)] * tmp[m.index(r + d, c)];
        ws += k[static_cast<std::size_t>(d + rad)];
      }
      out[m.index(r, c)] = std::clamp(s / ws, 0.0, 1.0);
    }
  return TruthMask(m.shape(), std::move(out));
}

namespace {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
  const double iy = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
  const double inter = ix * iy;
  return inter / (a.width() * a.height() + b.width() * b.height() - inter);
}

}  // namespace

SceneBundle generate_scene(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  std::mt19937_64 rng(spec.seed ^ index);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto uniform = [&](double a, double b) { return a + (b - a) * u(rng); };
  const int W = spec.image.width, H = spec.image.height;

  const int n_persons = std::uniform_int_distribution<int>(spec.min_persons, spec.max_persons)(rng);
  std::vector<BoundingBox> gt;
  for (int i = 0; i < n_persons; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const double h = uniform(spec.min_height, spec.max_height);
      const double w = spec.aspect * h;
      if (h > H || w > W) break;
      const double x0 = std::floor(uniform(0.0, W - w)), y0 = std::floor(uniform(0.0, H - h));
      const BoundingBox b(x0, y0, x0 + std::round(w), y0 + std::round(h));
      if (std::all_of(gt.begin(), gt.end(), [&](const BoundingBox& o) { return iou(o, b) <= spec.max_overlap; })) {
        gt.push_back(b);
        placed = true;
      }
    }
    if (!placed) {
      throw UsageError("cannot place " + std::to_string(n_persons) + " persons of height >= " +
                       std::to_string(spec.min_height) + " in a " + to_string(spec.image) + " image");
    }
  }

  SceneBundle s;
  s.id = "scene_" + std::to_string(index);
  s.image = spec.image;
  s.boxes["gt_person"] = gt;

  // Ground truth concepts: union over persons.
  std::map<std::string, std::vector<double>> concepts;
  for (const auto& c : default_concepts()) concepts[c.name].assign(spec.image.size(), 0.0);
  for (const auto& b : gt) {
    for (const auto& [name, m] : keypoints_to_concept_masks(person_template(b), spec.image)) {
      auto& acc = concepts[name];
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = std::max(acc[i], m[i]);
    }
  }

  std::vector<BoundingBox> pred;
  int n_fn = 0, n_fp = 0, n_shrunk = 0;
  std::string dropped;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto& b = gt[i];
    const bool drop = u(rng) < spec.fn_prob;
    const bool shrink = u(rng) < spec.shrink_prob;
    const double f = uniform(spec.shrink_min, spec.shrink_max);
    const double score = uniform(spec.score_min, spec.score_max);
    if (drop) {
      ++n_fn;
      dropped += (dropped.empty() ? "" : ",") + std::to_string(i);
      continue;
    }
    if (shrink) {
      ++n_shrunk;
      const double cx = (b.x0() + b.x1()) / 2, cy = (b.y0() + b.y1()) / 2;
      const double hw = b.width() * f / 2, hh = b.height() * f / 2;
      pred.emplace_back(cx - hw, cy - hh, cx + hw, cy + hh, TruthValue(score));
    } else {
      pred.emplace_back(b.x0(), b.y0(), b.x1(), b.y1(), TruthValue(score));
    }
  }
  if (u(rng) < spec.fp_prob) {
    const double h = uniform(spec.min_height, spec.max_height) * 0.5;
    const double w = spec.aspect * h;
    const double x0 = uniform(0.0, std::max(0.0, W - w)), y0 = uniform(0.0, std::max(0.0, H - h));
    pred.emplace_back(x0, y0, std::min<double>(W, x0 + w), std::min<double>(H, y0 + h),
                      TruthValue(uniform(spec.score_min, spec.score_max)));
    ++n_fp;
  }
  s.boxes["person"] = pred;

  const MaskShape cshape{H / spec.concept_scale, W / spec.concept_scale};
  for (auto& [name, data] : concepts) {
    TruthMask g(spec.image, std::move(data));
    TruthMask p = g;
    if (spec.noisy_concepts) {
      p = gaussian_blur(p, spec.blur_sigma);
      std::vector<double> v(p.values().begin(), p.values().end());
      for (double& x : v) x = std::clamp(x + uniform(-spec.noise, spec.noise), 0.0, 1.0);
      p = TruthMask(p.shape(), std::move(v));
    }
    if (spec.concept_scale > 1) p = downscale_maxpool(p, cshape);
    s.masks["gt_" + name] = std::move(g);
    s.masks[name] = std::move(p);
  }
  s.metadata["persons"] = std::to_string(gt.size());
  s.metadata["injected_fn"] = std::to_string(n_fn);
  s.metadata["injected_fp"] = std::to_string(n_fp);
  s.metadata["shrunk"] = std::to_string(n_shrunk);
  s.metadata["dropped"] = dropped;
  s.metadata["seed"] = std::to_string(spec.seed ^ index);
  return s;
}

}  // namespace rulemon
