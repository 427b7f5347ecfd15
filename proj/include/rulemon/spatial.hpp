#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rulemon/logic.hpp"
#include "rulemon/mask.hpp"

namespace rulemon {

// Shape of the CloseBy relation between two pixel centers.
//   Trivial:      CloseBy(p,q) = 1 iff p == q
//   Gaussian:     exp(-|p-q|_2^2 / (2 sigma^2)) on the L1 ball of radius r,
//                 values below low_cut set to 0; r may be left unbounded
//   L1Window:     |p-q|_1 <= r, with r = (ksize - 1) / 2
//   SquareWindow: |p-q|_inf <= r, the ksize x ksize neighbourhood used by
//                 average/max pooling
enum class CloseByKind { Trivial, Gaussian, L1Window, SquareWindow };

std::string to_string(CloseByKind k);

struct CloseByParams {
  CloseByKind kind = CloseByKind::Trivial;
  double sigma = 0.0;
  std::optional<int> radius;  // nullopt: unbounded support (Gaussian only)
  double low_cut = 0.1;

  static CloseByParams trivial();
  /// sigma == 0 yields the trivial relation.
  static CloseByParams gaussian(double sigma, std::optional<int> radius, double low_cut = 0.1);
  static CloseByParams l1_window(int ksize);
  static CloseByParams l1_radius(int radius);
  static CloseByParams square_window(int ksize);

  bool bounded() const { return kind != CloseByKind::Gaussian || radius.has_value(); }
  /// Window half size r; throws if the support is unbounded.
  int support_radius() const;

  /// CloseBy between two pixel centers offset by (dy, dx).
  double weight(int dy, int dx) const;

  std::string describe() const;
  friend bool operator==(const CloseByParams&, const CloseByParams&) = default;
};

/// Dense (2r+1) x (2r+1) weight window centred on the origin.
struct CloseByKernel {
  int radius = 0;
  std::vector<double> weights;

  int size() const { return 2 * radius + 1; }
  double at(int dy, int dx) const {
    return weights[static_cast<std::size_t>(dy + radius) * size() + (dx + radius)];
  }
};

CloseByKernel closeby_kernel(const CloseByParams& params);

/// Windowed evaluation of  P(p) = exists q in Q: b(q) & CloseBy(p, q).
///
/// Exact for every exists mode as long as CloseBy vanishes outside the
/// window: OR-type reductions ignore the zero terms outside it, and the mean
/// mode divides by #Q (the whole mask) rather than the window size. The output
/// grid must match q_mask; resolution changes need an explicit scaling step.
TruthMask close_to_a(const TruthMask& q_mask, const CloseByParams& params, const LogicSystem& logic,
                     MaskShape out_shape);

/// Stride-1 mean over the ksize x ksize window clipped to the image.
TruthMask avg_pool(const TruthMask& m, int ksize);

enum class NeighborMode {
  AllNeighbors,      // forall q: CloseBy(p,q) -> M(q), over the CloseBy support
  AnyOtherNeighbor,  // M(p) & exists q != p: CloseBy(p,q) & M(q)
};

/// Neighbourhood condition that down-weights spatially isolated values.
/// AllNeighbors with forall=mean and a square window is avg_pool.
TruthMask nb_cond(const TruthMask& m, NeighborMode mode, const CloseByParams& params, const LogicSystem& logic);

/// Quantifier over the CloseBy support of each pixel: the in-bounds pixels q
/// with CloseBy(p,q) > 0, optionally without p itself. Mean modes divide by
/// the size of that set; an empty set gives the vacuous value.
TruthMask neighborhood_reduce(const TruthMask& m, Quantifier quantifier, const CloseByParams& params,
                              bool include_self, const LogicSystem& logic);

}  // namespace rulemon
