// Acceptance criteria, one PASS/FAIL line each.
//   acceptance                 run all
//   acceptance --criterion N   run one

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "sphidx/bench.hpp"
#include "sphidx/oracle.hpp"

using namespace sphidx;
using namespace sphidx::bench;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<GridConfig> matrix_grids() {
  return {GridConfig::cube(4, true), GridConfig::cube(4, false), GridConfig({5, 4, 3}, {false, false, false})};
}
const double kLoads[] = {1.0, 5.0, 10.0};

BenchScenario matrix_scenario(const GridConfig& g, double load, std::uint64_t seed) {
  BenchScenario s;
  s.grid = g;
  s.load = load;
  s.seed = seed;
  s.d_min = 0.1;
  s.d_max = 12.0;
  s.d_step = 0.1;
  return s;
}

/// Visits every (scenario, distance, center) of the sweep matrix.
void for_each_matrix_query(std::size_t centers,
                           const std::function<void(const BenchScenario&, const Store&, const SphereTables&, double,
                                                    const Vec3&)>& f) {
  std::uint64_t seed = 100;
  for (const auto& g : matrix_grids()) {
    const SphereTables tables = SphereTables::build(g);
    for (double load : kLoads) {
      const BenchScenario s = matrix_scenario(g, load, ++seed);
      const Store store = generate_scene(s);
      const auto ds = s.distances();
      for (std::size_t row = 0; row < ds.size(); ++row) {
        for (const Vec3& c : row_centers(s, row, centers)) f(s, store, tables, ds[row], c);
      }
    }
  }
}

Outcome worked_example() {
  const GridConfig g({5, 4, 3}, {true, true, true});
  const PackedIndex p = pack({22, 10, 3}, g);
  const PackedIndex moved = translate(expand(p, g), encode_offset({-5, 4, 3}, g), g);
  const CellCoord c = unpack_coords(moved, g);
  std::ostringstream os;
  os << "pack=" << p << " (want 1878) translated to (" << c[0] << "," << c[1] << "," << c[2] << ")";
  return {p == 0b011'1010'10110u && c == CellCoord{17, 14, 6}, os.str()};
}

Outcome cardinalities() {
  const auto t = build_offset_table(GridConfig::cube(4, true));
  std::vector<std::size_t> n(8, 0);
  for (const auto& o : t.offsets())
    if (o.b_sq < n.size()) ++n[o.b_sq];
  std::ostringstream os;
  os << "entries 0..4 = " << n[0] << "," << n[1] << "," << n[2] << "," << n[3] << "," << n[4]
     << "; entry 7 " << (t.has_entry(7) ? "present" : "absent");
  const bool ok = n[0] == 27 && n[1] == 54 && n[2] == 36 && n[3] == 8 && n[4] == 54 && n[7] == 0 && !t.has_entry(7);
  return {ok, os.str()};
}

Outcome oracle_equivalence() {
  std::size_t queries = 0, mismatches = 0;
  std::string first;
  // Sized for the largest scene in the matrix: 10 objects per cell of 4096.
  auto checker = std::make_unique<bench::detail::HitSetChecker>(10 * 4096 + 1);
  std::vector<Hit> hits;
  for_each_matrix_query(100, [&](const BenchScenario& s, const Store& store, const SphereTables& tables, double d,
                                 const Vec3& c) {
    checker->set_reference(naive_scan(c, d, store));
    const auto ctx = QueryContext::prepare(c, d, tables);
    for (Method m : {Method::sphere, Method::box, Method::nonempty}) {
      hits.clear();
      query_using(m, ctx, store, tables, [&](const Hit& h) { hits.push_back(h); });
      ++queries;
      if (auto why = checker->compare(hits); !why.empty()) {
        if (mismatches++ == 0) first = s.grid.describe() + " " + to_string(m) + " d=" + std::to_string(d) + ": " + why;
      }
    }
    hits.clear();
    query_all(c, d, store, tables, s.weights, [&](const Hit& h) { hits.push_back(h); });
    ++queries;
    if (auto why = checker->compare(hits); !why.empty()) {
      if (mismatches++ == 0) first = "auto d=" + std::to_string(d) + ": " + why;
    }
  });
  std::string detail = std::to_string(queries) + " queries, " + std::to_string(mismatches) + " mismatches";
  if (!first.empty()) detail += "; first: " + first;
  return {mismatches == 0 && queries == 3 * 3 * 120 * 100 * 4, detail};
}

Outcome shaving_safety() {
  std::size_t checks = 0, failures = 0;
  std::string first;
  std::uint64_t seed = 7;
  const auto grids = matrix_grids();
  const std::size_t per_grid[] = {3334, 3333, 3333};
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const SphereTables tables = SphereTables::build(grids[i]);
    const auto r = check_shaving_safety(tables, per_grid[i], 12.0, ++seed);
    checks += r.checks;
    failures += r.failures;
    if (!r.passed && first.empty()) first = r.detail + " seed=" + std::to_string(r.failing_seed);
  }
  std::string detail = std::to_string(checks) + " checks, " + std::to_string(failures) + " dropped-cell cases";
  if (!first.empty()) detail += "; first: " + first;
  return {failures == 0 && checks >= 10000, detail};
}

Outcome knn_equivalence() {
  std::size_t queries = 0, mismatches = 0;
  std::string first;
  std::vector<double> ref;
  for_each_matrix_query(20, [&](const BenchScenario& s, const Store& store, const SphereTables& tables, double d,
                                const Vec3& c) {
    ref.clear();
    for (const auto& h : naive_scan(c, d, store)) ref.push_back(h.dist_sq);
    std::sort(ref.begin(), ref.end());
    for (std::size_t k : {1u, 8u, 32u}) {
      const auto got = query_knn(c, k, d, store, tables, s.weights);
      ++queries;
      bool same = got.size() == std::min(k, ref.size());
      for (std::size_t i = 0; same && i < got.size(); ++i) same = got[i].dist_sq == ref[i];
      if (!same && mismatches++ == 0) {
        first = s.grid.describe() + " k=" + std::to_string(k) + " d=" + std::to_string(d);
      }
    }
  });
  std::string detail = std::to_string(queries) + " queries, " + std::to_string(mismatches) + " mismatches";
  if (!first.empty()) detail += "; first: " + first;
  return {mismatches == 0 && queries == 3 * 3 * 120 * 20 * 3, detail};
}

Outcome sphere_cube_ratio() {
  const auto t = build_offset_table(GridConfig::cube(6, true));
  const double d = 20.0;
  const auto n = static_cast<std::uint32_t>(std::floor(d * d));
  const double cells = static_cast<double>(t.entry_end(n));
  const double side = 2.0 * std::floor(d) + 1.0;
  const double ratio = cells / (side * side * side);
  const double target = std::numbers::pi / 6.0;
  // The b^2 <= floor(d^2) set reaches out to |delta| = floor(d) + 1 on each
  // axis, so its own bounding cube is two cells wider.
  const double wide = side + 2.0;
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << cells << " cells / " << side << "^3 = " << ratio << ", target " << target << " +- 0.02"
     << " (informational: against " << wide << "^3 = " << cells / (wide * wide * wide) << ")";
  return {std::abs(ratio - target) <= 0.02, os.str()};
}

Outcome cell_visit_dominance() {
  std::size_t queries = 0, violations = 0;
  std::string first;
  for_each_matrix_query(100, [&](const BenchScenario& s, const Store& store, const SphereTables& tables, double d,
                                 const Vec3& c) {
    const auto ctx = QueryContext::prepare(c, d, tables);
    const auto none = [](const Hit&) {};
    const auto sphere = query_using(Method::sphere, ctx, store, tables, none).cells_visited;
    const auto box = query_using(Method::box, ctx, store, tables, none).cells_visited;
    ++queries;
    if (sphere > box && violations++ == 0) {
      first = s.grid.describe() + " d=" + std::to_string(d) + " sphere " + std::to_string(sphere) + " box " +
              std::to_string(box);
    }
  });
  std::string detail = std::to_string(queries) + " queries, " + std::to_string(violations) + " violations";
  if (!first.empty()) detail += "; first: " + first;
  return {violations == 0, detail};
}

Outcome protocol() {
  BenchScenario s;  // 16^3 cyclic, load 1, protocol defaults
  const SphereTables tables = SphereTables::build(s.grid);
  const Store store = generate_scene(s);
  const auto rows = run_sweep(s, store, tables);
  std::ostringstream csv;
  write_csv(csv, rows);
  std::size_t lines = 0;
  for (char ch : csv.str()) lines += ch == '\n';

  bool ok = s.queries == 150 && s.repeats == 40 && s.discard == 10 && rows.size() == 120 && lines == 121;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    ok = ok && r.queries_per_batch == 150 && r.batches_timed == 40 && r.batches_discarded == 10 &&
         r.queries_per_sec > 0.0 && std::abs(r.distance - 0.1 * static_cast<double>(i + 1)) < 1e-9;
  }
  ok = ok && std::abs(rows.back().distance - 12.0) < 1e-9;

  // Throughput is hardware dependent: reported, never gating.
  BenchScenario hot;
  hot.load = 10.0;
  hot.d_min = 4.0;
  hot.d_max = 4.0;
  hot.method = Method::sphere;
  const Store dense = generate_scene(hot);
  const auto hot_rows = run_sweep(hot, dense, tables);
  const double ratio = hot_rows.front().ratio_vs_box;

  std::ostringstream os;
  os.precision(3);
  os << rows.size() << " rows x 150 queries x 40 repeats (10 discarded), csv lines " << lines
     << "; info: sphere/box throughput at 16^3 cyclic load 10 d=4 = " << std::fixed << ratio
     << (ratio < 1.0 ? " (below 1, flagged)" : "");
  return {ok, os.str()};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "worked example", worked_example},
    {2, "table cardinalities", cardinalities},
    {3, "oracle equivalence", oracle_equivalence},
    {4, "shaving safety", shaving_safety},
    {5, "k-NN equivalence", knn_equivalence},
    {6, "sphere/cube ratio", sphere_cube_ratio},
    {7, "cell-visit dominance", cell_visit_dominance},
    {8, "benchmark protocol", protocol},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  bool all_ok = true;
  bool ran = false;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    ran = true;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    all_ok = all_ok && o.pass;
  }
  if (!ran) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return all_ok ? 0 : 1;
}
