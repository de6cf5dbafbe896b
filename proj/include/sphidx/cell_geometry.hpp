#pragma once

// Exact point-to-cell distance bounds and the six-direction shaving mask.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "sphidx/grid.hpp"

namespace sphidx {

/// Absolute slack (cell^2 units, or cell units for the mask) applied on the
/// conservative side of every cell-level decision, so rounding never
/// excludes an object that the per-object test would accept.
inline constexpr double kBoundarySlack = 1e-9;

/// Offset relative to the center cell, without the encoded word.
struct CellGeometry {
  Delta delta{};
  std::uint8_t two_way = 0;

  static CellGeometry of(const CellOffset& o) {
    return {{o.delta[0], o.delta[1], o.delta[2]}, o.two_way};
  }
};

namespace detail {

inline double axis_base(int delta) {
  const int m = delta < 0 ? -delta : delta;
  return m > 1 ? m - 1 : 0;
}

inline double axis_near(int delta, bool two_way, const SubCellFractions& f, int a) {
  if (delta == 0) return 0.0;
  const double b = axis_base(delta);
  if (two_way) return b + std::min(f.zeta_pos(a), f.zeta_neg(a));
  return b + (delta > 0 ? f.zeta_pos(a) : f.zeta_neg(a));
}

inline double axis_far(int delta, bool two_way, const SubCellFractions& f, int a) {
  if (delta == 0) return std::max(f.frac[a], 1.0 - f.frac[a]);
  const double b = axis_base(delta);
  if (two_way) return b + 1.0 + std::min(f.zeta_pos(a), f.zeta_neg(a));
  return b + 1.0 + (delta > 0 ? f.zeta_pos(a) : f.zeta_neg(a));
}

}  // namespace detail

/// Squared distance from the query center to the nearest point of the cell.
inline double min_dist_sq(const CellGeometry& c, const SubCellFractions& f) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double t = detail::axis_near(c.delta[a], (c.two_way >> a) & 1u, f, a);
    s += t * t;
  }
  return s;
}
inline double min_dist_sq(const CellOffset& o, const SubCellFractions& f) {
  return min_dist_sq(CellGeometry::of(o), f);
}

/// Squared distance from the query center to the farthest point of the cell.
inline double farthest_sq(const CellGeometry& c, const SubCellFractions& f) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double t = detail::axis_far(c.delta[a], (c.two_way >> a) & 1u, f, a);
    s += t * t;
  }
  return s;
}
inline double farthest_sq(const CellOffset& o, const SubCellFractions& f) {
  return farthest_sq(CellGeometry::of(o), f);
}

// Direction mask bits: bit 2a is axis a positive, bit 2a+1 axis a negative.
inline constexpr unsigned kMaskCount = 64;
inline constexpr unsigned dir_bit(int axis, bool negative) {
  return 1u << (2 * axis + (negative ? 1 : 0));
}

/// Bit (a, +) is set when frac(d) < zeta_pos(a): the sphere cannot reach
/// the next cell face in that direction within the final ring.
inline unsigned direction_mask(const SubCellFractions& f, double frac_d) {
  unsigned m = 0;
  for (int a = 0; a < 3; ++a) {
    if (frac_d < f.zeta_pos(a) - kBoundarySlack) m |= dir_bit(a, false);
    if (frac_d < f.zeta_neg(a) - kBoundarySlack) m |= dir_bit(a, true);
  }
  return m;
}

/// Bits that must all be present in a mask for `o` to be pre-rejected in
/// its own ring.  Zero for the center offset, which is never rejected.
inline unsigned required_bits(const CellOffset& o) {
  unsigned req = 0;
  for (int a = 0; a < 3; ++a) {
    if (o.delta[a] == 0) continue;
    if (o.is_two_way(a)) {
      req |= dir_bit(a, false) | dir_bit(a, true);
    } else {
      req |= dir_bit(a, o.delta[a] < 0);
    }
  }
  return req;
}

inline bool shaved_out(const CellOffset& o, unsigned mask) {
  const unsigned req = required_bits(o);
  return req != 0 && (mask & req) == req;
}

/// Squared distance between two points, using the shortest wrapped
/// difference on cyclic axes.
inline double distance_sq(const Vec3& p, const Vec3& c, const GridConfig& g) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    double d = p[a] - c[a];
    if (g.cyclic(a)) d = std::remainder(d, static_cast<double>(g.extent(a)));
    s += d * d;
  }
  return s;
}

}  // namespace sphidx
