#include "rulemon/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "rulemon/error.hpp"

namespace rulemon {

std::string to_string(CloseByKind k) {
  switch (k) {
    case CloseByKind::Trivial: return "trivial";
    case CloseByKind::Gaussian: return "gaussian";
    case CloseByKind::L1Window: return "l1_window";
    case CloseByKind::SquareWindow: return "square_window";
  }
  return "?";
}

namespace {

int radius_from_ksize(int ksize) {
  if (ksize <= 0 || ksize % 2 == 0) {
    throw UsageError("ksize must be a positive odd integer, got " + std::to_string(ksize));
  }
  return (ksize - 1) / 2;
}

struct Tap {
  int dy, dx;
  double w;
};

// Nonzero taps of the kernel, in raster order.
std::vector<Tap> nonzero_taps(const CloseByKernel& k) {
  std::vector<Tap> taps;
  for (int dy = -k.radius; dy <= k.radius; ++dy) {
    for (int dx = -k.radius; dx <= k.radius; ++dx) {
      const double w = k.at(dy, dx);
      if (w > 0.0) taps.push_back({dy, dx, w});
    }
  }
  return taps;
}

}  // namespace

CloseByParams CloseByParams::trivial() { return {}; }

CloseByParams CloseByParams::gaussian(double sigma, std::optional<int> radius, double low_cut) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw UsageError("closeby sigma must be >= 0");
  if (radius && *radius < 0) throw UsageError("closeby radius must be >= 0");
  if (!(low_cut >= 0.0 && low_cut <= 1.0)) throw UsageError("closeby low cut must lie in [0,1]");
  if (sigma == 0.0) return trivial();
  CloseByParams p;
  p.kind = CloseByKind::Gaussian;
  p.sigma = sigma;
  p.radius = radius;
  p.low_cut = low_cut;
  return p;
}

CloseByParams CloseByParams::l1_window(int ksize) { return l1_radius(radius_from_ksize(ksize)); }

CloseByParams CloseByParams::l1_radius(int radius) {
  if (radius < 0) throw UsageError("closeby radius must be >= 0");
  CloseByParams p;
  p.kind = CloseByKind::L1Window;
  p.radius = radius;
  return p;
}

CloseByParams CloseByParams::square_window(int ksize) {
  CloseByParams p;
  p.kind = CloseByKind::SquareWindow;
  p.radius = radius_from_ksize(ksize);
  return p;
}

int CloseByParams::support_radius() const {
  if (kind == CloseByKind::Trivial) return 0;
  if (!radius) throw UsageError("closeby relation has unbounded support; give a window radius r");
  return *radius;
}

double CloseByParams::weight(int dy, int dx) const {
  const int l1 = std::abs(dy) + std::abs(dx);
  switch (kind) {
    case CloseByKind::Trivial: return l1 == 0 ? 1.0 : 0.0;
    case CloseByKind::L1Window: return l1 <= *radius ? 1.0 : 0.0;
    case CloseByKind::SquareWindow: return std::max(std::abs(dy), std::abs(dx)) <= *radius ? 1.0 : 0.0;
    case CloseByKind::Gaussian: {
      if (radius && l1 > *radius) return 0.0;
      const double d2 = static_cast<double>(dy) * dy + static_cast<double>(dx) * dx;
      const double w = std::exp(-d2 / (2.0 * sigma * sigma));
      return w < low_cut ? 0.0 : w;
    }
  }
  return 0.0;
}

std::string CloseByParams::describe() const {
  std::ostringstream os;
  os << to_string(kind);
  if (kind == CloseByKind::Gaussian) {
    os << "(sigma=" << sigma << ", r=" << (radius ? std::to_string(*radius) : "inf") << ", cut=" << low_cut << ")";
  } else if (kind != CloseByKind::Trivial) {
    os << "(r=" << *radius << ")";
  }
  return os.str();
}

CloseByKernel closeby_kernel(const CloseByParams& params) {
  CloseByKernel k;
  k.radius = params.support_radius();
  k.weights.resize(static_cast<std::size_t>(k.size()) * k.size());
  for (int dy = -k.radius; dy <= k.radius; ++dy) {
    for (int dx = -k.radius; dx <= k.radius; ++dx) {
      k.weights[static_cast<std::size_t>(dy + k.radius) * k.size() + (dx + k.radius)] = params.weight(dy, dx);
    }
  }
  return k;
}

TruthMask close_to_a(const TruthMask& q_mask, const CloseByParams& params, const LogicSystem& logic,
                     MaskShape out_shape) {
  if (!(out_shape == q_mask.shape())) {
    throw DataError("close_to_a: output grid " + to_string(out_shape) + " differs from input " +
                    to_string(q_mask.shape()) + " without a scaling step");
  }
  const auto taps = nonzero_taps(closeby_kernel(params));
  const int h = q_mask.height();
  const int w = q_mask.width();
  std::vector<double> out(q_mask.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      Reducer red(Quantifier::Exists, logic);
      for (const auto& t : taps) {
        const int qr = r + t.dy;
        const int qc = c + t.dx;
        if (qr < 0 || qr >= h || qc < 0 || qc >= w) continue;
        red.add(logic.conj(q_mask(qr, qc), t.w));
      }
      out[q_mask.index(r, c)] = red.finish(q_mask.size());
    }
  }
  return TruthMask(out_shape, std::move(out));
}

TruthMask avg_pool(const TruthMask& m, int ksize) {
  const int rad = radius_from_ksize(ksize);
  if (rad == 0) return m;
  const int h = m.height();
  const int w = m.width();
  // Summed-area table with a zero border row/column.
  std::vector<double> sat(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  const auto S = [&](int r, int c) -> double& { return sat[static_cast<std::size_t>(r) * (w + 1) + c]; };
  for (int r = 0; r < h; ++r) {
    double row = 0.0;
    for (int c = 0; c < w; ++c) {
      row += m(r, c);
      S(r + 1, c + 1) = S(r, c + 1) + row;
    }
  }
  std::vector<double> out(m.size());
  for (int r = 0; r < h; ++r) {
    const int r0 = std::max(0, r - rad);
    const int r1 = std::min(h, r + rad + 1);
    for (int c = 0; c < w; ++c) {
      const int c0 = std::max(0, c - rad);
      const int c1 = std::min(w, c + rad + 1);
      const double sum = S(r1, c1) - S(r0, c1) - S(r1, c0) + S(r0, c0);
      const double n = static_cast<double>(r1 - r0) * (c1 - c0);
      out[m.index(r, c)] = std::clamp(sum / n, 0.0, 1.0);
    }
  }
  return TruthMask(m.shape(), std::move(out));
}

TruthMask nb_cond(const TruthMask& m, NeighborMode mode, const CloseByParams& params, const LogicSystem& logic) {
  const int h = m.height();
  const int w = m.width();

  if (mode == NeighborMode::AllNeighbors && params.kind == CloseByKind::SquareWindow &&
      logic.forall_mode == ForallMode::Mean) {
    // impl(1, x) == x for the fuzzy families; the Boolean one binarizes x.
    const int ksize = 2 * *params.radius + 1;
    return logic.is_boolean() ? avg_pool(binarize(m, logic.bool_threshold), ksize) : avg_pool(m, ksize);
  }

  const auto taps = nonzero_taps(closeby_kernel(params));
  std::vector<double> out(m.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mode == NeighborMode::AllNeighbors) {
        Reducer red(Quantifier::ForAll, logic);
        for (const auto& t : taps) {
          const int qr = r + t.dy;
          const int qc = c + t.dx;
          if (qr < 0 || qr >= h || qc < 0 || qc >= w) continue;
          red.add(logic.impl(t.w, m(qr, qc)));
        }
        out[m.index(r, c)] = red.finish();
      } else {
        Reducer red(Quantifier::Exists, logic);
        for (const auto& t : taps) {
          if (t.dy == 0 && t.dx == 0) continue;
          const int qr = r + t.dy;
          const int qc = c + t.dx;
          if (qr < 0 || qr >= h || qc < 0 || qc >= w) continue;
          red.add(logic.conj(t.w, m(qr, qc)));
        }
        const double support = red.finish(m.size() - 1);
        out[m.index(r, c)] = logic.conj(m(r, c), support);
      }
    }
  }
  return TruthMask(m.shape(), std::move(out));
}

TruthMask neighborhood_reduce(const TruthMask& m, Quantifier quantifier, const CloseByParams& params,
                              bool include_self, const LogicSystem& logic) {
  const auto taps = nonzero_taps(closeby_kernel(params));
  const int h = m.height();
  const int w = m.width();
  std::vector<double> out(m.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      Reducer red(quantifier, logic);
      for (const auto& t : taps) {
        if (!include_self && t.dy == 0 && t.dx == 0) continue;
        const int qr = r + t.dy;
        const int qc = c + t.dx;
        if (qr < 0 || qr >= h || qc < 0 || qc >= w) continue;
        red.add(m(qr, qc));
      }
      out[m.index(r, c)] = red.finish();
    }
  }
  return TruthMask(m.shape(), std::move(out));
}

}  // namespace rulemon
