#pragma once

// Reference geometry computed directly from cell boxes, without offsets,
// base distances or masks.  Used to check the table-driven paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sphidx/grid.hpp"

namespace sphidx::oracle {

/// Distance along one axis from coordinate `c` to the cell [k, k+1],
/// over all periodic images on a cyclic axis.
inline double axis_gap(double c, std::int64_t k, std::int64_t extent, bool cyclic) {
  const auto gap = [](double c, double lo) { return std::max({0.0, lo - c, c - (lo + 1.0)}); };
  if (!cyclic) return gap(c, static_cast<double>(k));
  const double ext = static_cast<double>(extent);
  const double cw = c - ext * std::floor(c / ext);
  double best = gap(cw, static_cast<double>(k));
  best = std::min(best, gap(cw, static_cast<double>(k) - ext));
  best = std::min(best, gap(cw, static_cast<double>(k) + ext));
  return best;
}

inline double cell_min_dist_sq(const Vec3& c, const CellCoord& cell, const GridConfig& g) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double t = axis_gap(c[a], cell[a], g.extent(a), g.cyclic(a));
    s += t * t;
  }
  return s;
}

/// Packed indices of every in-region cell whose nearest point lies within
/// `d` of `c`.
inline std::vector<PackedIndex> cells_within(const Vec3& c, double d, const GridConfig& g) {
  std::vector<PackedIndex> out;
  const double d_sq = d * d;
  for (std::int64_t z = 0; z < g.extent(kZ); ++z)
    for (std::int64_t y = 0; y < g.extent(kY); ++y)
      for (std::int64_t x = 0; x < g.extent(kX); ++x) {
        const CellCoord cell{x, y, z};
        if (cell_min_dist_sq(c, cell, g) <= d_sq) out.push_back(pack(cell, g));
      }
  return out;
}

}  // namespace sphidx::oracle
