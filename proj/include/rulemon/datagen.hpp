#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rulemon/mask.hpp"
#include "rulemon/scene.hpp"

namespace rulemon {

struct Keypoint {
  std::string name;
  double x = 0.0;  // along the width
  double y = 0.0;  // along the height
  bool visible = true;
};

struct KeypointAnnotation {
  std::vector<Keypoint> keypoints;
  std::vector<std::pair<std::string, std::string>> links;  // skeleton
  BoundingBox box{0, 0, 1, 1};
  std::optional<double> body_height;  // falls back to the box height

  const Keypoint* find(const std::string& name) const;
};

/// A concept built from keypoints. Point concepts have no links; limb
/// concepts join their keypoints along the skeleton links among them.
struct ConceptDefinition {
  std::string name;
  std::vector<std::string> keypoints;
  bool limb = false;
};

/// eye, wrist, ankle (points), arm, leg (limbs).
const std::vector<ConceptDefinition>& default_concepts();

/// COCO-style keypoint names and skeleton used by the scene generator.
const std::vector<std::pair<std::string, std::string>>& default_skeleton();

/// Discs of diameter 0.05 * body height at visible keypoints, plus capsules
/// of the same width along skeleton links of limb concepts. A pixel is set
/// when its center lies within the radius (inclusive). Occluded keypoints are
/// treated as absent.
std::map<std::string, TruthMask> keypoints_to_concept_masks(const KeypointAnnotation& ann, MaskShape image,
                                                            const std::vector<ConceptDefinition>& concepts =
                                                                default_concepts());

/// Keypoints of a standing person filling the box: head in the top 15%,
/// arms from 25% to 55% and legs from 55% to 100% of the height.
KeypointAnnotation person_template(const BoundingBox& box);

struct SceneSpec {
  MaskShape image{128, 128};
  int min_persons = 1;
  int max_persons = 3;
  double min_height = 60.0;  // pixels
  double max_height = 100.0;
  double aspect = 0.4;       // box width / height
  double max_overlap = 0.2;  // largest allowed IoU between two persons
  double fn_prob = 0.3;      // prediction dropped
  double fp_prob = 0.1;      // spurious prediction added per scene
  double shrink_prob = 0.0;  // prediction scaled about its center
  double shrink_min = 0.8;
  double shrink_max = 1.0;
  double score_min = 0.6;
  double score_max = 1.0;
  bool noisy_concepts = true;
  double blur_sigma = 1.0;   // pixels; 0 disables blur
  double noise = 0.1;        // amplitude of additive uniform noise
  int concept_scale = 1;     // concept predictions at image size / concept_scale
  std::uint64_t seed = 0;

  /// Throws UsageError on invalid probabilities or sizes.
  void validate() const;
};

/// Channels:
///   person            predicted boxes with scores
///   gt_person         ground truth boxes
///   <concept>         concept predictions (noised when enabled)
///   gt_<concept>      ground truth concept masks at image size
/// plus metadata counting injected errors. Deterministic in (spec.seed ^ index).
SceneBundle generate_scene(const SceneSpec& spec, std::uint64_t index);

/// Separable Gaussian blur normalized over in-bounds taps.
TruthMask gaussian_blur(const TruthMask& m, double sigma);

}  // namespace rulemon
