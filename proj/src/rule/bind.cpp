#include <algorithm>
#include <sstream>

#include "rulemon/error.hpp"
#include "rulemon/rule/plan.hpp"

namespace rulemon {

std::string to_string(ChannelKind k) { return k == ChannelKind::Mask ? "mask" : "boxes"; }

SceneSchema SceneBundle::schema() const {
  SceneSchema s;
  s.image = image;
  for (const auto& [name, m] : masks) s.channels[name] = {ChannelKind::Mask, m.shape()};
  for (const auto& [name, b] : boxes) s.channels[name] = {ChannelKind::Boxes, image};
  return s;
}

namespace rule {

std::string to_string(ScalingPolicy p) { return p == ScalingPolicy::Upscale ? "upscale" : "downscale"; }

ScalingPolicy parse_scaling_policy(std::string_view s) {
  if (s == "upscale" || s == "up") return ScalingPolicy::Upscale;
  if (s == "downscale" || s == "down") return ScalingPolicy::Downscale;
  throw UsageError("unknown scaling policy '" + std::string(s) + "' (expected upscale or downscale)");
}

namespace {

void check_arity(const Formula& f) {
  const auto fv = free_variables(f);
  if (fv.size() > 2) {
    std::string names;
    for (const auto& v : fv) names += (names.empty() ? "" : ", ") + v;
    throw BindError("subformula at " + to_string(f.span) + " ranges over more than two pixel variables (" + names +
                    "); only patterns with at most two are supported");
  }
  for (const auto& c : f.children) check_arity(*c);
}

}  // namespace

BoundFormula bind(const FormulaPtr& f, const SceneSchema& schema, const CompileOptions& options) {
  BoundFormula bf;
  bf.options = options;
  bf.formula = options.literal_guards ? expand_region_guards(f) : f;
  bf.image = schema.image;

  const auto fv = free_variables(*bf.formula);
  if (fv.size() > 1) throw BindError("formula has more than one free variable");
  if (!fv.empty()) bf.free_variable = *fv.begin();
  check_arity(*bf.formula);

  bool uses_boxes = false;
  for (const auto& name : referenced_channels(*bf.formula)) {
    const ChannelInfo* info = schema.find(name);
    if (!info) {
      std::string avail;
      for (const auto& [n, c] : schema.channels) avail += (avail.empty() ? "" : ", ") + n;
      throw BindError("unknown channel '" + name + "' (scene provides: " + (avail.empty() ? "nothing" : avail) +
                      ")");
    }
    bf.channels[name] = {name, info->kind, info->kind == ChannelKind::Boxes ? schema.image : info->shape};
    uses_boxes |= info->kind == ChannelKind::Boxes;
  }

  std::vector<MaskShape> shapes;
  if (uses_boxes || bf.channels.empty()) shapes.push_back(schema.image);
  for (const auto& [name, c] : bf.channels) {
    if (c.kind == ChannelKind::Mask) shapes.push_back(c.source);
  }
  if (options.scaling == ScalingPolicy::Upscale) {
    // Image resolution counts too: results are reported on the image grid or finer.
    MaskShape w = schema.image;
    for (const auto& s : shapes) {
      w.height = std::max(w.height, s.height);
      w.width = std::max(w.width, s.width);
    }
    bf.working = w;
  } else {
    MaskShape w = shapes.front();
    for (const auto& s : shapes) {
      w.height = std::min(w.height, s.height);
      w.width = std::min(w.width, s.width);
    }
    for (const auto& s : shapes) {
      if (s.height % w.height != 0 || s.width % w.width != 0) {
        throw BindError("irreconcilable shapes under downscale policy: " + to_string(s) +
                        " is not an integer multiple of " + to_string(w) + "; use the upscale policy");
      }
    }
    bf.working = w;
  }
  return bf;
}

}  // namespace rule
}  // namespace rulemon
