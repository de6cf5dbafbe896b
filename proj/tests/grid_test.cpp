#include <gtest/gtest.h>

#include <random>

#include "sphidx/grid.hpp"
#include "sphidx/offset_table.hpp"

using namespace sphidx;

namespace {

GridConfig world_32_16_8() { return GridConfig({5, 4, 3}, {true, true, true}); }

// Plain modular arithmetic, independent of the unpacked layout.
PackedIndex reference_translate(const CellCoord& c, const Delta& d, const GridConfig& g) {
  CellCoord r{};
  for (int a = 0; a < 3; ++a) {
    std::int64_t v = c[a] + d[a];
    if (g.cyclic(a)) {
      v = ((v % g.extent(a)) + g.extent(a)) % g.extent(a);
    } else if (v < 0 || v >= g.extent(a)) {
      return g.outside_index();
    }
    r[a] = v;
  }
  return pack(r, g);
}

std::vector<GridConfig> assorted_grids() {
  return {GridConfig::cube(4, true),
          GridConfig::cube(4, false),
          world_32_16_8(),
          GridConfig({5, 4, 3}, {false, false, false}),
          GridConfig({3, 5, 2}, {true, false, true}),
          GridConfig({1, 1, 1}, {true, false, true}),
          GridConfig({1, 6, 1}, {false, true, false}),
          GridConfig({8, 8, 8}, {false, true, false}),
          GridConfig({10, 4, 10}, {true, true, false})};
}

}  // namespace

TEST(Grid, PacksWorkedExample) {
  const auto g = world_32_16_8();
  EXPECT_EQ(pack({22, 10, 3}, g), 0b011'1010'10110u);
  EXPECT_EQ(pack({22, 10, 3}, g), 1878u);
  EXPECT_EQ(unpack_coords(1878, g), (CellCoord{22, 10, 3}));
}

TEST(Grid, EncodesWorkedExampleOffset) {
  const auto g = world_32_16_8();
  const CellOffset o = encode_offset({-5, 4, 3}, g);
  EXPECT_EQ(o.encoded, 0b0100'00000'011'0000'11011u);
  EXPECT_EQ(translate(expand(pack({22, 10, 3}, g), g), o, g), pack({17, 14, 6}, g));
}

TEST(Grid, TranslateWrapsToZeroOnCyclicAxes) {
  const auto g = world_32_16_8();
  const auto c = expand(pack({31, 15, 7}, g), g);
  EXPECT_EQ(translate(c, encode_offset({1, 1, 1}, g), g), 0u);
}

TEST(Grid, TranslateLeavingBoundedRegionGivesOutside) {
  const auto g = GridConfig::cube(4, false);
  const auto c = expand(pack({0, 5, 5}, g), g);
  EXPECT_EQ(translate(c, encode_offset({-1, 0, 0}, g), g), g.outside_index());
  EXPECT_EQ(g.outside_index(), 4096u);
  const auto top = expand(pack({15, 15, 15}, g), g);
  EXPECT_EQ(translate(top, encode_offset({0, 0, 1}, g), g), g.outside_index());
}

TEST(Grid, PackRejectsOutOfRange) {
  const auto g = world_32_16_8();
  EXPECT_THROW(pack({32, 0, 0}, g), std::out_of_range);
  EXPECT_THROW(pack({0, -1, 0}, g), std::out_of_range);
  EXPECT_THROW(encode_offset({32, 0, 0}, g), std::out_of_range);
}

TEST(Grid, RejectsBadConfigs) {
  EXPECT_THROW(GridConfig({0, 4, 4}, {true, true, true}), std::invalid_argument);
  EXPECT_THROW(GridConfig({11, 4, 4}, {true, true, true}), std::invalid_argument);
  EXPECT_THROW(GridConfig({10, 10, 10}, {true, true, true}), std::invalid_argument);
}

TEST(Grid, PackUnpackRoundTripsEveryCell) {
  for (const auto& g : assorted_grids()) {
    for (PackedIndex p = 0; p < g.cell_count(); ++p) {
      const CellCoord c = unpack_coords(p, g);
      ASSERT_EQ(pack(c, g), p);
      ASSERT_EQ(compress(expand(p, g).bits, g), p);
    }
  }
}

TEST(Grid, GuardBitsIsolateFields) {
  for (const auto& g : assorted_grids()) {
    std::uint64_t seen = 0;
    for (int a = 0; a < 3; ++a) {
      const unsigned w = g.bits(a) + (g.cyclic(a) ? 0u : 1u);
      const std::uint64_t field = ((std::uint64_t{1} << w) - 1) << g.unpacked_shift(a);
      const std::uint64_t guard = std::uint64_t{1} << (g.unpacked_shift(a) + w);
      EXPECT_EQ(seen & (field | guard), 0u) << g.describe();
      seen |= field | guard;
    }
  }
}

TEST(Grid, RandomTranslationsMatchModularReference) {
  std::mt19937_64 rng(42);
  for (const auto& g : assorted_grids()) {
    std::array<std::pair<int, int>, 3> ranges{offset_range(g, 0), offset_range(g, 1), offset_range(g, 2)};
    for (int i = 0; i < 100000; ++i) {
      const PackedIndex p = rng() % g.cell_count();
      Delta d{};
      for (int a = 0; a < 3; ++a) {
        const auto [lo, hi] = ranges[a];
        d[a] = lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
      }
      ASSERT_EQ(translate(expand(p, g), encode_offset(d, g), g), reference_translate(unpack_coords(p, g), d, g))
          << g.describe() << " cell " << p << " delta " << d[0] << "," << d[1] << "," << d[2];
    }
  }
}

TEST(Grid, MinBoundMatchesSampledCellDistance) {
  // Smallest distance between a point of the center cell and a point of the
  // offset cell, found by brute force over a lattice of both cells; axes are
  // independent, so a per-axis minimum over a fine 1D lattice suffices.
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    Delta d{};
    for (int& v : d) v = static_cast<int>(rng() % 15) - 7;
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      double best = 1e9;
      for (int u = 0; u <= 16; ++u)
        for (int v = 0; v <= 16; ++v) best = std::min(best, std::abs((d[a] + v / 16.0) - u / 16.0));
      s += best * best;
    }
    EXPECT_NEAR(static_cast<double>(min_bound_sq(d)), s, 1e-12);
  }
}

TEST(Grid, LocateSplitsCellAndFraction) {
  const auto g = GridConfig::cube(4, true);
  const Location l = locate({3.25, 15.999, 0.0}, g);
  EXPECT_EQ(l.coords, (CellCoord{3, 15, 0}));
  EXPECT_DOUBLE_EQ(l.fractions.frac[0], 0.25);
  EXPECT_DOUBLE_EQ(l.fractions.zeta_pos(0), 0.75);
  EXPECT_DOUBLE_EQ(l.fractions.zeta_neg(0), 0.25);
  EXPECT_TRUE(l.inside);
}

TEST(Grid, LocateWrapsCyclicCoordinates) {
  const auto g = GridConfig::cube(4, true);
  EXPECT_EQ(locate({16.5, -0.5, 33.0}, g).coords, (CellCoord{0, 15, 1}));
  EXPECT_EQ(locate({-16.0, 0, 0}, g).coords, (CellCoord{0, 0, 0}));
}

TEST(Grid, LocateFlagsBoundedOutside) {
  const auto g = GridConfig::cube(4, false);
  EXPECT_EQ(locate({-0.1, 3, 3}, g).cell, g.outside_index());
  EXPECT_FALSE(locate({16.0, 3, 3}, g).inside);
  EXPECT_TRUE(locate({15.99, 3, 3}, g).inside);
  EXPECT_EQ(locate({1e300, 0, 0}, g).cell, g.outside_index());
  EXPECT_THROW(locate({std::nan(""), 0, 0}, g), std::domain_error);
}

TEST(Grid, LocateKeepsFractionBelowOne) {
  const auto g = GridConfig::cube(4, true);
  const double tiny = -1e-20;  // floor gives -1, fraction rounds to 1.0
  const Location l = locate({tiny, 0, 0}, g);
  EXPECT_LT(l.fractions.frac[0], 1.0);
  EXPECT_EQ(l.coords[0], 15);
}
