#pragma once

// Precomputed traversal tables for one grid configuration: the sorted
// offset table, 64 shaved variants of every ring, and the expected number
// of offsets a query of a given squared radius walks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sphidx/cell_geometry.hpp"
#include "sphidx/offset_table.hpp"

namespace sphidx {

/// Ring slices with the offsets that a direction mask proves to lie
/// beyond the sphere removed.  Valid only for the ring m = floor(d).
class ShavedTableSet {
 public:
  struct Extent {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    friend bool operator==(Extent, Extent) = default;
  };

  ShavedTableSet() = default;
  ShavedTableSet(std::uint32_t rings, std::vector<CellOffset> data, std::vector<Extent> extents)
      : rings_(rings), data_(std::move(data)), extents_(std::move(extents)) {}

  std::uint32_t ring_count() const { return rings_; }

  std::span<const CellOffset> slice(std::uint32_t ring, unsigned mask) const {
    const Extent e = extents_[ring * kMaskCount + mask];
    return std::span<const CellOffset>(data_).subspan(e.begin, e.end - e.begin);
  }

  const std::vector<Extent>& extents() const { return extents_; }
  std::size_t total_offsets() const { return data_.size(); }

  /// Removes one offset from a slice.  Test hook for fault injection.
  void erase_for_testing(std::uint32_t ring, unsigned mask, std::size_t pos) {
    Extent& e = extents_[ring * kMaskCount + mask];
    if (pos >= e.end - e.begin) return;
    data_.erase(data_.begin() + e.begin + static_cast<std::ptrdiff_t>(pos));
    --e.end;
    for (std::size_t i = ring * kMaskCount + mask + 1; i < extents_.size(); ++i) {
      --extents_[i].begin;
      --extents_[i].end;
    }
  }

 private:
  std::uint32_t rings_ = 0;
  std::vector<CellOffset> data_;
  std::vector<Extent> extents_;
};

inline ShavedTableSet build_shaved_tables(const OffsetTable& table) {
  const std::uint32_t rings = table.ring_count();
  std::vector<CellOffset> data;
  std::vector<ShavedTableSet::Extent> extents;
  extents.reserve(static_cast<std::size_t>(rings) * kMaskCount);
  for (std::uint32_t m = 0; m < rings; ++m) {
    const auto ring = table.offsets().subspan(table.ring_begin(m), table.ring_end(m) - table.ring_begin(m));
    for (unsigned mask = 0; mask < kMaskCount; ++mask) {
      ShavedTableSet::Extent e;
      e.begin = static_cast<std::uint32_t>(data.size());
      for (const CellOffset& o : ring) {
        if (!shaved_out(o, mask)) data.push_back(o);
      }
      e.end = static_cast<std::uint32_t>(data.size());
      extents.push_back(e);
    }
  }
  return ShavedTableSet(rings, std::move(data), std::move(extents));
}

/// Offsets walked for a radius `d` with sub-cell position `f`, counting
/// lower rings in full and the final ring from its shaved slice.
inline std::size_t walked_offsets(const OffsetTable& table, const ShavedTableSet& shaved,
                                  const SubCellFractions& f, double d) {
  const double d_sq = d * d;
  if (d_sq >= table.d_max_sq()) return table.size();
  const auto ring = static_cast<std::uint32_t>(std::floor(d));
  const auto n = static_cast<std::uint32_t>(d_sq);
  const auto s = shaved.slice(ring, direction_mask(f, d - ring));
  const auto cut = std::upper_bound(s.begin(), s.end(), n,
                                    [](std::uint32_t v, const CellOffset& o) { return v < o.b_sq; });
  return table.ring_begin(ring) + static_cast<std::size_t>(cut - s.begin());
}

class ExpectedCountTable {
 public:
  ExpectedCountTable() = default;
  explicit ExpectedCountTable(std::vector<double> counts) : counts_(std::move(counts)) {}

  /// Mean walked offsets for table entry n; entries above the table top
  /// resolve to the top entry.
  double at(std::uint32_t n) const {
    return counts_[std::min<std::size_t>(n, counts_.size() - 1)];
  }
  const std::vector<double>& values() const { return counts_; }
  std::size_t size() const { return counts_.size(); }

 private:
  std::vector<double> counts_;
};

/// Averages walked_offsets over a sample_grid^3 lattice of sub-cell
/// positions and sample_grid values of frac(d^2) per entry, all taken at
/// cell midpoints of the respective unit intervals.
inline ExpectedCountTable build_expected_counts(const OffsetTable& table, const ShavedTableSet& shaved,
                                                unsigned sample_grid) {
  if (sample_grid < 2) throw std::invalid_argument("sample_grid must be at least 2");
  std::vector<SubCellFractions> positions;
  positions.reserve(static_cast<std::size_t>(sample_grid) * sample_grid * sample_grid);
  const auto mid = [&](unsigned i) { return (i + 0.5) / sample_grid; };
  for (unsigned z = 0; z < sample_grid; ++z)
    for (unsigned y = 0; y < sample_grid; ++y)
      for (unsigned x = 0; x < sample_grid; ++x) positions.push_back({{mid(x), mid(y), mid(z)}});

  std::vector<double> counts(table.max_entry() + 1, 0.0);
  for (std::uint32_t n = 0; n <= table.max_entry(); ++n) {
    double sum = 0.0;
    for (unsigned u = 0; u < sample_grid; ++u) {
      const double d = std::sqrt(n + mid(u));
      for (const auto& f : positions) sum += static_cast<double>(walked_offsets(table, shaved, f, d));
    }
    counts[n] = sum / (static_cast<double>(positions.size()) * sample_grid);
  }
  return ExpectedCountTable(std::move(counts));
}

class SphereTables {
 public:
  static constexpr unsigned kDefaultSampleGrid = 8;

  SphereTables(OffsetTable table, ShavedTableSet shaved, ExpectedCountTable expected, unsigned sample_grid)
      : table_(std::move(table)),
        shaved_(std::move(shaved)),
        expected_(std::move(expected)),
        sample_grid_(sample_grid) {}

  static SphereTables build(const GridConfig& g, unsigned sample_grid = kDefaultSampleGrid) {
    OffsetTable table = build_offset_table(g);
    ShavedTableSet shaved = build_shaved_tables(table);
    ExpectedCountTable expected = build_expected_counts(table, shaved, sample_grid);
    return SphereTables(std::move(table), std::move(shaved), std::move(expected), sample_grid);
  }

  const GridConfig& config() const { return table_.config(); }
  const OffsetTable& table() const { return table_; }
  const ShavedTableSet& shaved() const { return shaved_; }
  ShavedTableSet& shaved_for_testing() { return shaved_; }
  const ExpectedCountTable& expected() const { return expected_; }
  unsigned sample_grid() const { return sample_grid_; }

  std::size_t memory_bytes() const {
    return table_.size() * sizeof(CellOffset) + table_.entry_end_map().size() * sizeof(std::uint32_t) +
           shaved_.total_offsets() * sizeof(CellOffset) +
           shaved_.extents().size() * sizeof(ShavedTableSet::Extent) + expected_.size() * sizeof(double);
  }

  std::string size_report() const {
    std::ostringstream os;
    os << "tables for " << config().describe() << ": " << table_.size() << " offsets, max b^2 "
       << table_.max_entry() << ", " << shaved_.ring_count() << " rings x " << kMaskCount
       << " shaved slices (" << shaved_.total_offsets() << " offsets), "
       << (memory_bytes() + 512 * 1024) / (1024 * 1024) << " MiB";
    return os.str();
  }

 private:
  OffsetTable table_;
  ShavedTableSet shaved_;
  ExpectedCountTable expected_;
  unsigned sample_grid_;
};

}  // namespace sphidx
