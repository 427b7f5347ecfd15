#pragma once

#include <map>
#include <string>
#include <vector>

#include "rulemon/mask.hpp"

namespace rulemon {

enum class ChannelKind { Mask, Boxes };

std::string to_string(ChannelKind k);

struct ChannelInfo {
  ChannelKind kind = ChannelKind::Mask;
  MaskShape shape;  // boxes live on the image grid
  friend bool operator==(const ChannelInfo&, const ChannelInfo&) = default;
};

/// Channel names and shapes of a scene, enough to bind a rule without data.
struct SceneSchema {
  MaskShape image;
  std::map<std::string, ChannelInfo> channels;

  const ChannelInfo* find(const std::string& name) const {
    const auto it = channels.find(name);
    return it == channels.end() ? nullptr : &it->second;
  }
};

/// One image worth of named mask channels and box sets.
struct SceneBundle {
  std::string id;
  MaskShape image;
  std::map<std::string, TruthMask> masks;
  std::map<std::string, std::vector<BoundingBox>> boxes;
  std::map<std::string, std::string> metadata;

  SceneSchema schema() const;
  bool has(const std::string& name) const { return masks.count(name) || boxes.count(name); }
};

}  // namespace rulemon
