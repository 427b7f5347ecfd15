#include "rulemon/mask.hpp"

#include <algorithm>
#include <cmath>

#include "rulemon/error.hpp"

namespace rulemon {

std::string to_string(const MaskShape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width);
}

namespace {

void check_shape(MaskShape shape) {
  if (shape.height <= 0 || shape.width <= 0) {
    throw DataError("mask shape must be positive, got " + to_string(shape));
  }
}

}  // namespace

TruthMask::TruthMask(MaskShape shape, double fill) : shape_(shape) {
  check_shape(shape);
  static_cast<void>(TruthValue(fill));
  data_.assign(shape.size(), fill);
}

TruthMask::TruthMask(MaskShape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  check_shape(shape);
  if (data_.size() != shape.size()) {
    throw DataError("mask data has " + std::to_string(data_.size()) + " cells, shape " +
                    to_string(shape) + " needs " + std::to_string(shape.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = data_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError("mask value out of [0,1] at cell " + std::to_string(i) + ": " + std::to_string(v));
    }
  }
}

BoundingBox::BoundingBox(double x0, double y0, double x1, double y1, TruthValue score)
    : x0_(x0), y0_(y0), x1_(x1), y1_(y1), score_(score) {
  if (!(x0 < x1) || !(y0 < y1)) {
    throw DataError("bounding box needs x0 < x1 and y0 < y1");
  }
}

BoundingBox::PixelRange BoundingBox::pixels() const {
  // center c + 0.5 in [x0, x1)  <=>  c in [ceil(x0 - 0.5), ceil(x1 - 0.5))
  const auto lo = [](double v) { return static_cast<int>(std::ceil(v - 0.5)); };
  return {lo(y0_), lo(y1_), lo(x0_), lo(x1_)};
}

BoundingBox::PixelRange BoundingBox::pixels(const MaskShape& clip) const {
  auto r = pixels();
  r.row_begin = std::clamp(r.row_begin, 0, clip.height);
  r.row_end = std::clamp(r.row_end, 0, clip.height);
  r.col_begin = std::clamp(r.col_begin, 0, clip.width);
  r.col_end = std::clamp(r.col_end, 0, clip.width);
  return r;
}

TruthMask binarize(const TruthMask& m, TruthValue threshold) {
  std::vector<double> out(m.size());
  const double t = threshold.value();
  std::transform(m.values().begin(), m.values().end(), out.begin(),
                 [t](double v) { return v >= t ? 1.0 : 0.0; });
  return TruthMask(m.shape(), std::move(out));
}

TruthMask denoise(const TruthMask& m, TruthValue threshold) {
  std::vector<double> out(m.size());
  const double t = threshold.value();
  std::transform(m.values().begin(), m.values().end(), out.begin(),
                 [t](double v) { return v < t ? 0.0 : v; });
  return TruthMask(m.shape(), std::move(out));
}

TruthMask boxes_to_mask(std::span<const BoundingBox> boxes, MaskShape shape, const LogicSystem& logic,
                        std::optional<TruthValue> constant_score) {
  check_shape(shape);
  std::vector<double> out(shape.size(), 0.0);
  for (const auto& box : boxes) {
    const auto range = box.pixels(shape);
    if (range.empty()) continue;
    const double score = constant_score ? constant_score->value() : box.score().value();
    for (int r = range.row_begin; r < range.row_end; ++r) {
      for (int c = range.col_begin; c < range.col_end; ++c) {
        auto& cell = out[static_cast<std::size_t>(r) * shape.width + c];
        cell = logic.disj(cell, score);
      }
    }
  }
  return TruthMask(shape, std::move(out));
}

std::vector<double> resize_bilinear(std::span<const double> src, MaskShape from, MaskShape to) {
  check_shape(from);
  check_shape(to);
  if (src.size() != from.size()) throw DataError("resize_bilinear: data does not match shape");
  if (from == to) return {src.begin(), src.end()};

  // Target center (i + 0.5) maps to source coordinate (i + 0.5) * scale - 0.5
  // in index units, clamped to the outermost source centers.
  struct Tap {
    int lo, hi;
    double frac;
  };
  const auto taps = [](int n_from, int n_to) {
    std::vector<Tap> t(static_cast<std::size_t>(n_to));
    const double scale = static_cast<double>(n_from) / n_to;
    for (int i = 0; i < n_to; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(n_from - 1));
      const int lo = static_cast<int>(std::floor(s));
      const int hi = std::min(lo + 1, n_from - 1);
      t[static_cast<std::size_t>(i)] = {lo, hi, s - lo};
    }
    return t;
  };
  const auto ty = taps(from.height, to.height);
  const auto tx = taps(from.width, to.width);

  std::vector<double> out(to.size());
  for (int r = 0; r < to.height; ++r) {
    const auto& a = ty[static_cast<std::size_t>(r)];
    const double* row_lo = src.data() + static_cast<std::size_t>(a.lo) * from.width;
    const double* row_hi = src.data() + static_cast<std::size_t>(a.hi) * from.width;
    for (int c = 0; c < to.width; ++c) {
      const auto& b = tx[static_cast<std::size_t>(c)];
      const double top = std::lerp(row_lo[b.lo], row_lo[b.hi], b.frac);
      const double bottom = std::lerp(row_hi[b.lo], row_hi[b.hi], b.frac);
      out[static_cast<std::size_t>(r) * to.width + c] = std::lerp(top, bottom, a.frac);
    }
  }
  return out;
}

TruthMask upscale_bilinear(const TruthMask& m, MaskShape target) {
  check_shape(target);
  if (target.height < m.height() || target.width < m.width()) {
    throw DataError("upscale_bilinear cannot shrink " + to_string(m.shape()) + " to " +
                    to_string(target) + "; use downscale_maxpool");
  }
  auto out = resize_bilinear(m.values(), m.shape(), target);
  for (auto& v : out) v = std::clamp(v, 0.0, 1.0);
  return TruthMask(target, std::move(out));
}

TruthMask downscale_maxpool(const TruthMask& m, MaskShape target) {
  check_shape(target);
  if (target.height > m.height() || target.width > m.width()) {
    throw DataError("downscale_maxpool cannot enlarge " + to_string(m.shape()) + " to " +
                    to_string(target) + "; use upscale_bilinear");
  }
  if (m.height() % target.height != 0 || m.width() % target.width != 0) {
    throw DataError("downscale_maxpool needs integer block factors, " + to_string(m.shape()) +
                    " -> " + to_string(target) + "; upscale to a common resolution instead");
  }
  const int bh = m.height() / target.height;
  const int bw = m.width() / target.width;
  std::vector<double> out(target.size(), 0.0);
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      auto& cell = out[static_cast<std::size_t>(r / bh) * target.width + c / bw];
      cell = std::max(cell, m(r, c));
    }
  }
  return TruthMask(target, std::move(out));
}

}  // namespace rulemon
