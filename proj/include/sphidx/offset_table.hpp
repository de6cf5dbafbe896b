#pragma once

// Distance-sorted neighbor offsets.
//
// Every representable offset is keyed by b^2, the minimum squared distance
// between any point of the center cell and any point of the offset cell.
// Sorting by that key lays the query sphere out from center to edge, so a
// query of radius d only has to walk the prefix that ends after the last
// offset with b^2 <= floor(d^2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "sphidx/grid.hpp"

namespace sphidx {

class OffsetTable {
 public:
  OffsetTable(GridConfig config, std::vector<CellOffset> offsets)
      : config_(config), offsets_(std::move(offsets)) {
    if (offsets_.empty() || offsets_.front().b_sq != 0) {
      throw std::invalid_argument("offset table must start at the center entry");
    }
    max_entry_ = offsets_.back().b_sq;
    entry_end_.assign(max_entry_ + 1, 0);
    std::size_t pos = 0;
    for (std::uint32_t n = 0; n <= max_entry_; ++n) {
      while (pos < offsets_.size() && offsets_[pos].b_sq <= n) ++pos;
      entry_end_[n] = static_cast<std::uint32_t>(pos);
    }
    d_max_sq_ = std::nextafter(static_cast<double>(max_entry_) + 1.0, 0.0);
  }

  const GridConfig& config() const { return config_; }
  std::span<const CellOffset> offsets() const { return offsets_; }
  std::size_t size() const { return offsets_.size(); }
  const CellOffset& operator[](std::size_t i) const { return offsets_[i]; }

  std::uint32_t max_entry() const { return max_entry_; }
  /// Largest squared radius that still selects a distinct table prefix.
  double d_max_sq() const { return d_max_sq_; }

  /// Count of offsets with b^2 <= n.  Squared distances that no offset
  /// reaches (7, 15, ...) resolve to the entry just below them.
  std::size_t entry_end(std::uint32_t n) const {
    return entry_end_[std::min(n, max_entry_)];
  }
  const std::vector<std::uint32_t>& entry_end_map() const { return entry_end_; }

  /// Whether some offset has exactly this b^2.
  bool has_entry(std::uint32_t n) const {
    if (n > max_entry_) return false;
    return n == 0 ? entry_end_[0] > 0 : entry_end_[n] > entry_end_[n - 1];
  }

  std::size_t end_index_for(double d_sq) const {
    if (!(d_sq > 0.0)) return entry_end_[0];
    const double clamped = std::min(d_sq, d_max_sq_);
    return entry_end_[static_cast<std::uint32_t>(clamped)];
  }

  /// Number of rings: ring m holds offsets with m^2 <= b^2 < (m+1)^2.
  std::uint32_t ring_count() const {
    auto r = static_cast<std::uint32_t>(std::sqrt(static_cast<double>(max_entry_)));
    while (r * r > max_entry_) --r;
    while ((r + 1) * (r + 1) <= max_entry_) ++r;
    return r + 1;
  }
  std::size_t ring_begin(std::uint32_t m) const { return m == 0 ? 0 : entry_end(m * m - 1); }
  std::size_t ring_end(std::uint32_t m) const {
    const std::uint64_t next = std::uint64_t{m + 1} * (m + 1);
    return next > max_entry_ ? offsets_.size() : entry_end(static_cast<std::uint32_t>(next - 1));
  }

 private:
  GridConfig config_;
  std::vector<CellOffset> offsets_;
  std::vector<std::uint32_t> entry_end_;
  std::uint32_t max_entry_ = 0;
  double d_max_sq_ = 0.0;
};

/// Offset range per axis: half the extent each way on cyclic axes (each
/// cell exactly once), the full extent each way on bounded axes.
inline std::pair<int, int> offset_range(const GridConfig& g, int axis) {
  const auto ext = static_cast<int>(g.extent(axis));
  if (g.cyclic(axis)) return {-ext / 2, ext / 2 - 1};
  return {-(ext - 1), ext - 1};
}

inline bool offset_order(const CellOffset& a, const CellOffset& b) {
  return std::tie(a.b_sq, a.delta[2], a.delta[1], a.delta[0]) <
         std::tie(b.b_sq, b.delta[2], b.delta[1], b.delta[0]);
}

inline OffsetTable build_offset_table(const GridConfig& g) {
  const auto [x0, x1] = offset_range(g, kX);
  const auto [y0, y1] = offset_range(g, kY);
  const auto [z0, z1] = offset_range(g, kZ);
  std::vector<CellOffset> offsets;
  offsets.reserve(static_cast<std::size_t>(x1 - x0 + 1) * (y1 - y0 + 1) * (z1 - z0 + 1));
  for (int z = z0; z <= z1; ++z)
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) offsets.push_back(encode_offset({x, y, z}, g));
  std::sort(offsets.begin(), offsets.end(), offset_order);
  return OffsetTable(g, std::move(offsets));
}

}  // namespace sphidx
