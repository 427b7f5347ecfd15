#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rulemon/concept_head.hpp"
#include "rulemon/datagen.hpp"
#include "rulemon/mask.hpp"
#include "rulemon/scene.hpp"

namespace rulemon::io {

namespace fs = std::filesystem;
using nlohmann::json;

enum class MaskFormat { Raw, Png };

MaskFormat parse_mask_format(std::string_view s);

/// Row-major 32-bit IEEE-754 little-endian floats.
TruthMask read_raw_mask(const fs::path& path, MaskShape shape, const std::string& channel = "");
void write_raw_mask(const fs::path& path, const TruthMask& m);

/// 8-bit grayscale PNG, value / 255.
TruthMask read_png_mask(const fs::path& path, const std::string& channel = "");
void write_png_mask(const fs::path& path, const TruthMask& m);

/// Scene manifest:
///   { "id": str, "image": [H, W],
///     "channels": [ {"name", "kind": "mask", "shape": [h, w], "file"},
///                   {"name", "kind": "boxes", "boxes": [[x0,y0,x1,y1,score], ...]} ],
///     "metadata": {str: str} }
/// Mask files ending in .png are decoded as PNG, anything else as raw floats.
/// Throws DataError on malformed manifests, shape mismatches and values
/// outside [0,1].
SceneBundle load_scene(const fs::path& manifest);

/// Writes <dir>/manifest.json and one file per mask channel.
fs::path write_scene(const SceneBundle& scene, const fs::path& dir, MaskFormat format = MaskFormat::Raw);

/// Manifest paths named on the command line: manifests as given, directories
/// searched one level deep for */manifest.json (sorted).
std::vector<fs::path> collect_manifests(const std::vector<std::string>& inputs);

/// Head file: {"format_version": 1, "layer_id", "weights", "bias",
/// "covariance": [...] | null, "prior_precision": x | null}.
json head_to_json(const ConceptHead& h);
ConceptHead head_from_json(const json& j);
ConceptHead load_head(const fs::path& path);
void save_head(const fs::path& path, const ConceptHead& h);

/// Activation stack manifest:
///   { "channels": C, "grid": [h, w],
///     "samples": [ {"activations": file (C*h*w raw floats), "label": file, "label_shape": [H, W]} ] }
ActivationStack load_activations(const fs::path& manifest);
fs::path write_activations(const ActivationStack& stack, const fs::path& dir);

SceneSpec spec_from_json(const json& j);
json spec_to_json(const SceneSpec& s);

json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

/// 64-bit FNV-1a of a string, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace rulemon::io
