#pragma once

// Bit-packed cell addressing for a power-of-two discretized region.
//
// A cell is addressed by its *packed* index: the ZYX concatenation of its
// integer coordinates, which is also its position in the linear cell array.
// The *unpacked* form keeps X and Z where they are and moves Y above the
// packed width, leaving zero bits between fields.  Those zero bits absorb
// per-field carries, so a neighbor offset written in per-field two's
// complement can be applied to all three axes with one 64-bit addition.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sphidx {

using Vec3 = std::array<double, 3>;
using CellCoord = std::array<std::int64_t, 3>;
using Delta = std::array<int, 3>;

/// Linear index of a cell in the cell array.  In-region values are
/// below 2^packed_width; GridConfig::outside_index() is the single
/// out-of-region sentinel.
using PackedIndex = std::uint64_t;

/// Carry-guarded layout of a cell index, see GridConfig.
struct UnpackedIndex {
  std::uint64_t bits = 0;
  friend constexpr bool operator==(UnpackedIndex, UnpackedIndex) = default;
};

enum Axis : int { kX = 0, kY = 1, kZ = 2 };

class GridConfig {
 public:
  static constexpr unsigned kMaxAxisBits = 10;
  static constexpr unsigned kMaxPackedBits = 24;

  GridConfig(std::array<unsigned, 3> bits, std::array<bool, 3> cyclic)
      : bits_(bits), cyclic_(cyclic) {
    unsigned total = 0;
    for (int a = 0; a < 3; ++a) {
      if (bits_[a] < 1 || bits_[a] > kMaxAxisBits) {
        throw std::invalid_argument("grid axis bits must be in [1, " +
                                    std::to_string(kMaxAxisBits) + "]");
      }
      total += bits_[a];
    }
    if (total > kMaxPackedBits) {
      throw std::invalid_argument("grid has more than 2^" +
                                  std::to_string(kMaxPackedBits) + " cells");
    }
    packed_width_ = total;
    packed_shift_ = {0u, bits_[kX], bits_[kX] + bits_[kY]};

    // Each unpacked field is n bits (cyclic) or n+1 bits (non-cyclic, the
    // extra bit flags a step outside the region), followed by at least one
    // zero guard bit.  X and Z keep their packed positions whenever the gap
    // below them is wide enough, which is the common case.
    const auto width = [&](int a) { return bits_[a] + (cyclic_[a] ? 0u : 1u); };
    unsigned pos_z = packed_shift_[kZ];
    if (pos_z < width(kX) + 1) pos_z = width(kX) + 1;
    unsigned pos_y = packed_width_ + bits_[kX];
    if (pos_y < pos_z + width(kZ) + 1) pos_y = pos_z + width(kZ) + 1;
    unpacked_shift_ = {0u, pos_y, pos_z};
    if (pos_y + width(kY) > 64) {
      throw std::invalid_argument("grid does not fit the unpacked word");
    }

    for (int a = 0; a < 3; ++a) {
      const std::uint64_t m = (std::uint64_t{1} << bits_[a]) - 1;
      axis_mask_[a] = m;
      field_mask_ |= m << unpacked_shift_[a];
      if (!cyclic_[a]) outside_flags_ |= std::uint64_t{1} << (unpacked_shift_[a] + bits_[a]);
    }
  }

  static GridConfig cube(unsigned bits, bool cyclic) {
    return GridConfig({bits, bits, bits}, {cyclic, cyclic, cyclic});
  }

  unsigned bits(int axis) const { return bits_[axis]; }
  bool cyclic(int axis) const { return cyclic_[axis]; }
  std::int64_t extent(int axis) const { return std::int64_t{1} << bits_[axis]; }
  const std::array<unsigned, 3>& bits() const { return bits_; }
  const std::array<bool, 3>& cyclic_flags() const { return cyclic_; }

  bool fully_cyclic() const { return cyclic_[0] && cyclic_[1] && cyclic_[2]; }
  bool has_outside() const { return !fully_cyclic(); }

  unsigned packed_width() const { return packed_width_; }
  std::uint64_t cell_count() const { return std::uint64_t{1} << packed_width_; }
  PackedIndex outside_index() const { return cell_count(); }
  /// Cell array length: every in-region cell plus the outside cell.
  std::uint64_t cell_slots() const { return cell_count() + 1; }

  unsigned packed_shift(int axis) const { return packed_shift_[axis]; }
  unsigned unpacked_shift(int axis) const { return unpacked_shift_[axis]; }
  std::uint64_t axis_mask(int axis) const { return axis_mask_[axis]; }
  std::uint64_t field_mask() const { return field_mask_; }
  std::uint64_t outside_flags() const { return outside_flags_; }

  /// Cyclicity bitfield as stored in table files: bit a set for cyclic axis a.
  std::uint32_t cyclic_bits() const {
    return (cyclic_[0] ? 1u : 0u) | (cyclic_[1] ? 2u : 0u) | (cyclic_[2] ? 4u : 0u);
  }

  friend bool operator==(const GridConfig& a, const GridConfig& b) {
    return a.bits_ == b.bits_ && a.cyclic_ == b.cyclic_;
  }

  std::string describe() const {
    std::string s = std::to_string(extent(0)) + "x" + std::to_string(extent(1)) + "x" +
                    std::to_string(extent(2));
    s += fully_cyclic() ? " cyclic" : (cyclic_bits() == 0 ? " bounded" : " mixed");
    return s;
  }

 private:
  std::array<unsigned, 3> bits_;
  std::array<bool, 3> cyclic_;
  unsigned packed_width_ = 0;
  std::array<unsigned, 3> packed_shift_{};
  std::array<unsigned, 3> unpacked_shift_{};
  std::array<std::uint64_t, 3> axis_mask_{};
  std::uint64_t field_mask_ = 0;
  std::uint64_t outside_flags_ = 0;
};

/// Per-axis position of a point inside its cell.
struct SubCellFractions {
  Vec3 frac{};
  /// Distance to the cell face in the positive direction of `axis`.
  double zeta_pos(int axis) const { return 1.0 - frac[axis]; }
  /// Distance to the cell face in the negative direction of `axis`.
  double zeta_neg(int axis) const { return frac[axis]; }
};

/// A neighbor offset relative to a center cell, in table form.
struct CellOffset {
  std::uint64_t encoded = 0;
  std::uint32_t b_sq = 0;
  std::array<std::int16_t, 3> delta{};
  /// Bit a set when axis a is cyclic and delta[a] is exactly minus half the
  /// extent: the target cell is then equally reached in both directions.
  std::uint8_t two_way = 0;

  int b(int axis) const {
    const int m = delta[axis] < 0 ? -delta[axis] : delta[axis];
    return m > 1 ? m - 1 : 0;
  }
  bool is_two_way(int axis) const { return (two_way >> axis) & 1u; }
  friend bool operator==(const CellOffset&, const CellOffset&) = default;
};

inline PackedIndex pack(const CellCoord& c, const GridConfig& g) {
  PackedIndex p = 0;
  for (int a = 0; a < 3; ++a) {
    if (c[a] < 0 || c[a] >= g.extent(a)) {
      throw std::out_of_range("pack: cell coordinate outside the region");
    }
    p |= static_cast<std::uint64_t>(c[a]) << g.packed_shift(a);
  }
  return p;
}

inline CellCoord unpack_coords(PackedIndex p, const GridConfig& g) {
  CellCoord c{};
  for (int a = 0; a < 3; ++a) {
    c[a] = static_cast<std::int64_t>((p >> g.packed_shift(a)) & g.axis_mask(a));
  }
  return c;
}

inline UnpackedIndex expand(PackedIndex p, const GridConfig& g) {
  std::uint64_t u = 0;
  for (int a = 0; a < 3; ++a) {
    u |= ((p >> g.packed_shift(a)) & g.axis_mask(a)) << g.unpacked_shift(a);
  }
  return {u};
}

/// Packs a masked post-translation word.  Returns the outside index when
/// any non-cyclic overflow flag is set.
inline PackedIndex compress(std::uint64_t u, const GridConfig& g) {
  if (u & g.outside_flags()) return g.outside_index();
  PackedIndex p = u & g.axis_mask(kX);
  p |= ((u >> (g.unpacked_shift(kY) - g.packed_shift(kY))) & (g.axis_mask(kY) << g.packed_shift(kY)));
  p |= ((u >> (g.unpacked_shift(kZ) - g.packed_shift(kZ))) & (g.axis_mask(kZ) << g.packed_shift(kZ)));
  return p;
}

inline std::uint32_t min_bound_sq(const Delta& delta) {
  std::uint32_t s = 0;
  for (int d : delta) {
    const int m = d < 0 ? -d : d;
    if (m > 1) s += static_cast<std::uint32_t>((m - 1) * (m - 1));
  }
  return s;
}

inline bool offset_representable(const Delta& delta, const GridConfig& g) {
  for (int a = 0; a < 3; ++a) {
    const std::int64_t m = delta[a] < 0 ? -std::int64_t{delta[a]} : delta[a];
    if (m > g.extent(a) - 1) return false;
  }
  return true;
}

inline CellOffset encode_offset(const Delta& delta, const GridConfig& g) {
  if (!offset_representable(delta, g)) {
    throw std::out_of_range("encode_offset: delta exceeds the grid extent");
  }
  CellOffset o;
  for (int a = 0; a < 3; ++a) {
    const unsigned width = g.bits(a) + (g.cyclic(a) ? 0u : 1u);
    const std::uint64_t field_mask = (std::uint64_t{1} << width) - 1;
    const auto twos = static_cast<std::uint64_t>(static_cast<std::int64_t>(delta[a])) & field_mask;
    o.encoded |= twos << g.unpacked_shift(a);
    o.delta[a] = static_cast<std::int16_t>(delta[a]);
    if (g.cyclic(a) && delta[a] == -static_cast<int>(g.extent(a) / 2)) {
      o.two_way |= static_cast<std::uint8_t>(1u << a);
    }
  }
  o.b_sq = min_bound_sq(delta);
  return o;
}

/// Cell reached from `center` by `offset`: one addition, one mask test,
/// one mask, one pack.
inline PackedIndex translate(UnpackedIndex center, const CellOffset& offset, const GridConfig& g) {
  const std::uint64_t sum = center.bits + offset.encoded;
  if (sum & g.outside_flags()) return g.outside_index();
  return compress(sum & g.field_mask(), g);
}

struct Location {
  PackedIndex cell = 0;
  /// floor(position), wrapped on cyclic axes; unclipped on bounded axes.
  CellCoord coords{};
  SubCellFractions fractions;
  bool inside = true;
};

inline Location locate(const Vec3& position, const GridConfig& g) {
  Location loc;
  for (int a = 0; a < 3; ++a) {
    const double p = position[a];
    if (!std::isfinite(p)) throw std::domain_error("locate: non-finite coordinate");
    const double fl = std::floor(p);
    double fr = p - fl;
    if (fr >= 1.0) fr = std::nextafter(1.0, 0.0);
    loc.fractions.frac[a] = fr;
    const double ext = static_cast<double>(g.extent(a));
    if (g.cyclic(a)) {
      double w = fl - ext * std::floor(fl / ext);
      if (w >= ext) w -= ext;
      loc.coords[a] = static_cast<std::int64_t>(w);
    } else {
      if (fl < 0.0 || fl >= ext) loc.inside = false;
      // Clamp before casting so far-away positions stay representable.
      const double c = fl < -ext ? -ext : (fl > 2 * ext ? 2 * ext : fl);
      loc.coords[a] = static_cast<std::int64_t>(c);
    }
  }
  loc.cell = loc.inside ? pack(loc.coords, g) : g.outside_index();
  return loc;
}

}  // namespace sphidx
