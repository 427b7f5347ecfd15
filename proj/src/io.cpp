#include "rulemon/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rulemon/error.hpp"

namespace rulemon::io {

MaskFormat parse_mask_format(std::string_view s) {
  if (s == "raw" || s == "f32") return MaskFormat::Raw;
  if (s == "png") return MaskFormat::Png;
  throw UsageError("unknown mask format '" + std::string(s) + "' (expected raw or png)");
}

namespace {

std::string label(const std::string& channel, const fs::path& path) {
  return channel.empty() ? path.string() : "channel '" + channel + "' (" + path.string() + ")";
}

TruthMask checked_mask(MaskShape shape, std::vector<double> v, const std::string& what) {
  for (double x : v) {
    if (!(x >= 0.0 && x <= 1.0)) throw DataError(what + ": value " + std::to_string(x) + " outside [0,1]");
  }
  return TruthMask(shape, std::move(v));
}

MaskShape shape_of(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw DataError(what + ": expected [height, width]");
  }
  const MaskShape s{j[0].get<int>(), j[1].get<int>()};
  if (s.height < 1 || s.width < 1) throw DataError(what + ": shape must be positive");
  return s;
}

std::vector<float> read_floats(const fs::path& path, std::size_t count, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(what + ": cannot open file");
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != count * 4) {
    throw DataError(what + ": shape mismatch, file has " + std::to_string(bytes) + " bytes, expected " +
                    std::to_string(count * 4));
  }
  in.seekg(0);
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(raw[4 * i]) | static_cast<std::uint32_t>(raw[4 * i + 1]) << 8 |
                            static_cast<std::uint32_t>(raw[4 * i + 2]) << 16 |
                            static_cast<std::uint32_t>(raw[4 * i + 3]) << 24;
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

void write_floats(const fs::path& path, std::span<const double> values) {
  std::vector<unsigned char> raw(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) raw[4 * i + static_cast<std::size_t>(b)] = static_cast<unsigned char>(u >> (8 * b));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace

TruthMask read_raw_mask(const fs::path& path, MaskShape shape, const std::string& channel) {
  const std::string what = label(channel, path);
  const auto f = read_floats(path, shape.size(), what);
  return checked_mask(shape, std::vector<double>(f.begin(), f.end()), what);
}

void write_raw_mask(const fs::path& path, const TruthMask& m) { write_floats(path, m.values()); }

TruthMask read_png_mask(const fs::path& path, const std::string& channel) {
  const std::string what = label(channel, path);
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError(what + ": cannot decode PNG: " + img.message);
  }
  if (img.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_LINEAR)) {
    png_image_free(&img);
    throw DataError(what + ": expected an 8-bit grayscale PNG");
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    throw DataError(what + ": cannot decode PNG: " + img.message);
  }
  const MaskShape shape{static_cast<int>(img.height), static_cast<int>(img.width)};
  std::vector<double> values(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) values[i] = buf[i] / 255.0;
  return TruthMask(shape, std::move(values));
}

void write_png_mask(const fs::path& path, const TruthMask& m) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(m.width());
  img.height = static_cast<png_uint_32>(m.height());
  img.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(m.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<png_byte>(std::lround(m[i] * 255.0));
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw DataError("cannot write " + path.string() + ": " + img.message);
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

SceneBundle load_scene(const fs::path& manifest) {
  const json j = read_json(manifest);
  const fs::path base = manifest.parent_path();
  const std::string where = manifest.string();
  try {
    SceneBundle s;
    s.id = j.at("id").get<std::string>();
    s.image = shape_of(j.at("image"), where + ": image");
    for (const auto& ch : j.at("channels")) {
      const auto name = ch.at("name").get<std::string>();
      if (s.has(name)) throw DataError(where + ": duplicate channel '" + name + "'");
      const auto kind = ch.at("kind").get<std::string>();
      if (kind == "mask") {
        const fs::path file = base / ch.at("file").get<std::string>();
        TruthMask m;
        if (file.extension() == ".png") {
          m = read_png_mask(file, name);
          if (ch.contains("shape") && !(shape_of(ch["shape"], name) == m.shape())) {
            throw DataError("channel '" + name + "': PNG is " + to_string(m.shape()) + ", manifest declares " +
                            to_string(shape_of(ch["shape"], name)));
          }
        } else {
          m = read_raw_mask(file, shape_of(ch.at("shape"), "channel '" + name + "'"), name);
        }
        s.masks.emplace(name, std::move(m));
      } else if (kind == "boxes") {
        std::vector<BoundingBox> boxes;
        for (const auto& b : ch.at("boxes")) {
          if (!b.is_array() || (b.size() != 4 && b.size() != 5)) {
            throw DataError("channel '" + name + "': a box is [x0, y0, x1, y1] or [x0, y0, x1, y1, score]");
          }
          const double score = b.size() == 5 ? b[4].get<double>() : 1.0;
          try {
            boxes.emplace_back(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>(),
                               TruthValue(score));
          } catch (const Error& e) {
            throw DataError("channel '" + name + "': " + e.what());
          }
        }
        s.boxes.emplace(name, std::move(boxes));
      } else {
        throw DataError(where + ": channel '" + name + "' has unknown kind '" + kind + "'");
      }
    }
    if (j.contains("metadata")) {
      for (const auto& [k, v] : j["metadata"].items()) s.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    return s;
  } catch (const json::exception& e) {
    throw DataError(where + ": malformed manifest: " + e.what());
  }
}

fs::path write_scene(const SceneBundle& scene, const fs::path& dir, MaskFormat format) {
  fs::create_directories(dir);
  json j;
  j["id"] = scene.id;
  j["image"] = {scene.image.height, scene.image.width};
  j["channels"] = json::array();
  for (const auto& [name, m] : scene.masks) {
    const std::string file = name + (format == MaskFormat::Png ? ".png" : ".f32");
    if (format == MaskFormat::Png) {
      write_png_mask(dir / file, m);
    } else {
      write_raw_mask(dir / file, m);
    }
    j["channels"].push_back({{"name", name}, {"kind", "mask"}, {"shape", {m.height(), m.width()}}, {"file", file}});
  }
  for (const auto& [name, boxes] : scene.boxes) {
    json arr = json::array();
    for (const auto& b : boxes) arr.push_back({b.x0(), b.y0(), b.x1(), b.y1(), b.score().value()});
    j["channels"].push_back({{"name", name}, {"kind", "boxes"}, {"boxes", arr}});
  }
  j["metadata"] = scene.metadata;
  const fs::path manifest = dir / "manifest.json";
  write_text(manifest, j.dump(2) + "\n");
  return manifest;
}

std::vector<fs::path> collect_manifests(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      if (fs::exists(p / "manifest.json")) found.push_back(p / "manifest.json");
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) found.push_back(e.path() / "manifest.json");
      }
      std::sort(found.begin(), found.end());
      if (found.empty()) throw DataError("no scene manifests under " + p.string());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw DataError("no such scene manifest or directory: " + p.string());
    }
  }
  return out;
}

json head_to_json(const ConceptHead& h) {
  json j;
  j["format_version"] = 1;
  j["layer_id"] = h.layer_id;
  j["weights"] = h.weights;
  j["bias"] = h.bias;
  j["covariance"] = h.covariance ? json(*h.covariance) : json(nullptr);
  j["prior_precision"] = h.prior_precision ? json(*h.prior_precision) : json(nullptr);
  return j;
}

ConceptHead head_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw DataError("unsupported head format_version");
    ConceptHead h;
    h.layer_id = j.value("layer_id", "");
    h.weights = j.at("weights").get<std::vector<double>>();
    h.bias = j.at("bias").get<double>();
    if (j.contains("covariance") && !j["covariance"].is_null()) {
      h.covariance = j["covariance"].get<std::vector<double>>();
      const std::size_t k = h.weights.size() + 1;
      if (h.covariance->size() != k * k) throw DataError("head covariance must have (C+1)^2 entries");
    }
    if (j.contains("prior_precision") && !j["prior_precision"].is_null()) {
      h.prior_precision = j["prior_precision"].get<double>();
    }
    return h;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed head file: ") + e.what());
  }
}

ConceptHead load_head(const fs::path& path) { return head_from_json(read_json(path)); }

void save_head(const fs::path& path, const ConceptHead& h) { write_text(path, head_to_json(h).dump(2) + "\n"); }

ActivationStack load_activations(const fs::path& manifest) {
  const json j = read_json(manifest);
  const fs::path base = manifest.parent_path();
  try {
    ActivationStack st;
    st.channels = j.at("channels").get<int>();
    st.grid = shape_of(j.at("grid"), "activation grid");
    if (st.channels < 1) throw DataError("activation stack needs at least one channel");
    for (const auto& s : j.at("samples")) {
      ActivationSample sample;
      const fs::path act = base / s.at("activations").get<std::string>();
      const auto f = read_floats(act, static_cast<std::size_t>(st.channels) * st.grid.size(), act.string());
      sample.activations.assign(f.begin(), f.end());
      const fs::path lab = base / s.at("label").get<std::string>();
      sample.label = lab.extension() == ".png" ? read_png_mask(lab)
                                                : read_raw_mask(lab, shape_of(s.at("label_shape"), lab.string()));
      st.samples.push_back(std::move(sample));
    }
    st.validate();
    return st;
  } catch (const json::exception& e) {
    throw DataError(manifest.string() + ": malformed activation manifest: " + e.what());
  }
}

fs::path write_activations(const ActivationStack& stack, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["channels"] = stack.channels;
  j["grid"] = {stack.grid.height, stack.grid.width};
  j["samples"] = json::array();
  for (std::size_t i = 0; i < stack.samples.size(); ++i) {
    const auto& s = stack.samples[i];
    const std::string a = "act_" + std::to_string(i) + ".f32", l = "label_" + std::to_string(i) + ".f32";
    write_floats(dir / a, s.activations);
    write_raw_mask(dir / l, s.label);
    j["samples"].push_back({{"activations", a}, {"label", l}, {"label_shape", {s.label.height(), s.label.width()}}});
  }
  const fs::path manifest = dir / "activations.json";
  write_text(manifest, j.dump(2) + "\n");
  return manifest;
}

SceneSpec spec_from_json(const json& j) {
  SceneSpec s;
  try {
    if (j.contains("image")) s.image = shape_of(j["image"], "spec image");
    s.min_persons = j.value("min_persons", s.min_persons);
    s.max_persons = j.value("max_persons", s.max_persons);
    s.min_height = j.value("min_height", s.min_height);
    s.max_height = j.value("max_height", s.max_height);
    s.aspect = j.value("aspect", s.aspect);
    s.max_overlap = j.value("max_overlap", s.max_overlap);
    s.fn_prob = j.value("fn_prob", s.fn_prob);
    s.fp_prob = j.value("fp_prob", s.fp_prob);
    s.shrink_prob = j.value("shrink_prob", s.shrink_prob);
    s.shrink_min = j.value("shrink_min", s.shrink_min);
    s.shrink_max = j.value("shrink_max", s.shrink_max);
    s.score_min = j.value("score_min", s.score_min);
    s.score_max = j.value("score_max", s.score_max);
    s.noisy_concepts = j.value("noisy_concepts", s.noisy_concepts);
    s.blur_sigma = j.value("blur_sigma", s.blur_sigma);
    s.noise = j.value("noise", s.noise);
    s.concept_scale = j.value("concept_scale", s.concept_scale);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

json spec_to_json(const SceneSpec& s) {
  return {{"image", {s.image.height, s.image.width}},
          {"min_persons", s.min_persons},
          {"max_persons", s.max_persons},
          {"min_height", s.min_height},
          {"max_height", s.max_height},
          {"aspect", s.aspect},
          {"max_overlap", s.max_overlap},
          {"fn_prob", s.fn_prob},
          {"fp_prob", s.fp_prob},
          {"shrink_prob", s.shrink_prob},
          {"shrink_min", s.shrink_min},
          {"shrink_max", s.shrink_max},
          {"score_min", s.score_min},
          {"score_max", s.score_max},
          {"noisy_concepts", s.noisy_concepts},
          {"blur_sigma", s.blur_sigma},
          {"noise", s.noise},
          {"concept_scale", s.concept_scale},
          {"seed", s.seed}};
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rulemon::io
