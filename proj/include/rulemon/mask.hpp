#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rulemon/logic.hpp"

namespace rulemon {

struct MaskShape {
  int height = 0;
  int width = 0;

  std::size_t size() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  friend bool operator==(const MaskShape&, const MaskShape&) = default;
};

std::string to_string(const MaskShape& s);

/// H x W grid of truth values, row-major.
///
/// Pixel (row, col) sits at the point (row + 0.5, col + 0.5): coordinates
/// refer to pixel centers. Masks are immutable after construction; every
/// cell is validated to lie in [0,1].
class TruthMask {
 public:
  TruthMask() = default;
  explicit TruthMask(MaskShape shape, double fill = 0.0);
  TruthMask(MaskShape shape, std::vector<double> data);

  const MaskShape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator()(int row, int col) const { return data_[index(row, col)]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::span<const double> values() const { return data_; }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_.width) +
           static_cast<std::size_t>(col);
  }

  friend bool operator==(const TruthMask&, const TruthMask&) = default;

 private:
  MaskShape shape_;
  std::vector<double> data_;
};

/// Axis-aligned box in pixel coordinates: x runs along the width, y along the
/// height. A pixel belongs to the box when its center lies in [x0,x1) x [y0,y1).
class BoundingBox {
 public:
  BoundingBox(double x0, double y0, double x1, double y1, TruthValue score = TruthValue(1.0));

  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double x1() const { return x1_; }
  double y1() const { return y1_; }
  TruthValue score() const { return score_; }
  double width() const { return x1_ - x0_; }
  double height() const { return y1_ - y0_; }

  bool contains_center(int row, int col) const {
    const double cx = col + 0.5;
    const double cy = row + 0.5;
    return cx >= x0_ && cx < x1_ && cy >= y0_ && cy < y1_;
  }

  /// Half-open pixel index ranges [row_begin,row_end) x [col_begin,col_end)
  /// whose centers fall inside the box, clipped to the given shape.
  struct PixelRange {
    int row_begin, row_end, col_begin, col_end;
    bool empty() const { return row_begin >= row_end || col_begin >= col_end; }
    std::size_t area() const {
      return empty() ? 0
                     : static_cast<std::size_t>(row_end - row_begin) *
                           static_cast<std::size_t>(col_end - col_begin);
    }
  };
  PixelRange pixels(const MaskShape& clip) const;
  PixelRange pixels() const;  // unclipped

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double x0_, y0_, x1_, y1_;
  TruthValue score_;
};

TruthMask binarize(const TruthMask& m, TruthValue threshold);

/// Zeroes cells strictly below the threshold.
TruthMask denoise(const TruthMask& m, TruthValue threshold);

/// Rasterizes boxes by the pixel-center test; each box fills its pixels with
/// its score (or constant_score), overlapping boxes are merged with the
/// logic's disjunction.
TruthMask boxes_to_mask(std::span<const BoundingBox> boxes, MaskShape shape, const LogicSystem& logic,
                        std::optional<TruthValue> constant_score = std::nullopt);

/// Bilinear interpolation between pixel centers; target must be at least as
/// large as the source in both dimensions. Output is clamped to [0,1].
TruthMask upscale_bilinear(const TruthMask& m, MaskShape target);

/// Block maximum. Source dimensions must be integer multiples of the target.
TruthMask downscale_maxpool(const TruthMask& m, MaskShape target);

/// Pixel-center aligned bilinear resampling of an arbitrary real grid, without
/// clamping. Shared by mask upscaling and concept-head logit upscaling.
std::vector<double> resize_bilinear(std::span<const double> src, MaskShape from, MaskShape to);

}  // namespace rulemon
