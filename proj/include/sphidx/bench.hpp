#pragma once

// Benchmark and validation harness.
//
// A measurement is `queries` randomly centered queries timed as one batch,
// repeated `repeats` times; the `discard` slowest batches are dropped and
// the rest averaged.  Every row is also measured with the box method so the
// throughput ratio is taken on identical centers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sphidx/oracle.hpp"
#include "sphidx/query.hpp"

namespace sphidx::bench {

struct BenchObject {
  std::uint64_t id = 0;
  double weight = 1.0;
};

using Store = ObjectStore<BenchObject>;
using Hit = NeighborHit<BenchObject>;

struct BenchScenario {
  GridConfig grid = GridConfig::cube(4, true);
  double load = 1.0;
  std::uint64_t seed = 1;
  double d_min = 0.1;
  std::optional<double> d_max;  // default: 3/4 of the largest extent
  double d_step = 0.1;
  std::size_t queries = 150;
  std::size_t repeats = 40;
  std::size_t discard = 10;
  std::optional<Method> method;  // empty: automatic selection
  std::optional<std::size_t> knn;
  SelectionWeights weights;

  void validate() const {
    if (!(load > 0.0)) throw std::invalid_argument("load must be > 0");
    if (!(d_step > 0.0)) throw std::invalid_argument("distance step must be > 0");
    if (!(d_min >= 0.0)) throw std::invalid_argument("minimum distance must be >= 0");
    if (effective_d_max() < d_min) throw std::invalid_argument("maximum distance below minimum");
    if (repeats == 0 || discard >= repeats) throw std::invalid_argument("need discard < repeats");
    if (queries == 0) throw std::invalid_argument("need at least one query per measurement");
    if (knn && *knn == 0) throw std::invalid_argument("k must be at least 1");
    if (knn && method == Method::nonempty) throw std::invalid_argument("k-NN has no non-empty-list traversal");
    weights.validate();
  }

  double effective_d_max() const {
    if (d_max) return *d_max;
    std::int64_t ext = 0;
    for (int a = 0; a < 3; ++a) ext = std::max(ext, grid.extent(a));
    return 0.75 * static_cast<double>(ext);
  }

  std::vector<double> distances() const {
    std::vector<double> out;
    const double top = effective_d_max() + 1e-9;
    for (std::size_t i = 0;; ++i) {
      const double d = d_min + static_cast<double>(i) * d_step;
      if (d > top) break;
      out.push_back(d);
    }
    return out;
  }
};

/// mt19937_64 with explicit bit-to-double conversion, so scenes are
/// identical across standard libraries.
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline Vec3 random_point(const GridConfig& g, SceneRng& rng) {
  return {rng.uniform(0.0, static_cast<double>(g.extent(kX))), rng.uniform(0.0, static_cast<double>(g.extent(kY))),
          rng.uniform(0.0, static_cast<double>(g.extent(kZ)))};
}

inline std::size_t scene_object_count(const BenchScenario& s) {
  return static_cast<std::size_t>(std::ceil(s.load * static_cast<double>(s.grid.cell_count()) - 1e-9));
}

inline Store generate_scene(const BenchScenario& s) {
  Store store(s.grid);
  SceneRng rng(mix_seed(s.seed, 0));
  const std::size_t n = scene_object_count(s);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = random_point(s.grid, rng);
    store.insert(p, BenchObject{i, 1.0 + static_cast<double>(i % 7)});
  }
  return store;
}

/// Query centers for the sweep row at `row`.
inline std::vector<Vec3> row_centers(const BenchScenario& s, std::size_t row, std::size_t count) {
  SceneRng rng(mix_seed(s.seed, 1000 + row));
  std::vector<Vec3> out(count);
  for (auto& c : out) c = random_point(s.grid, rng);
  return out;
}

struct BenchRow {
  double distance = 0.0;
  std::string method;
  double queries_per_sec = 0.0;
  double cells_visited_mean = 0.0;
  double neighbors_mean = 0.0;
  double ratio_vs_box = 0.0;
  // Protocol bookkeeping, not part of the CSV.
  std::size_t batches_timed = 0;
  std::size_t batches_discarded = 0;
  std::size_t queries_per_batch = 0;
};

inline constexpr const char* kCsvHeader =
    "distance,method,queries_per_sec,cells_visited_mean,neighbors_mean,ratio_vs_box";

inline void write_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << std::fixed << std::setprecision(2) << r.distance << ',' << r.method << ',' << std::setprecision(3)
       << r.queries_per_sec << ',' << r.cells_visited_mean << ',' << r.neighbors_mean << ','
       << std::setprecision(4) << r.ratio_vs_box << '\n';
  }
  os.unsetf(std::ios::floatfield);
}

namespace detail {

struct BatchOutcome {
  std::size_t cells = 0;
  std::size_t neighbors = 0;
  std::map<Method, std::size_t> methods;
};

/// Runs one batch.  The visitor reads the neighbor payload so every hit
/// touches the object's memory.
inline BatchOutcome run_batch(const BenchScenario& s, std::optional<Method> method, const std::vector<Vec3>& centers,
                              double d, const Store& store, const SphereTables& tables, double& sink) {
  BatchOutcome out;
  if (s.knn) {
    SelectionWeights w = s.weights;
    if (method == Method::box) w.revert_distance_knn = std::numeric_limits<double>::infinity();
    for (const Vec3& c : centers) {
      if (method == Method::naive) {
        auto hits = naive_scan(c, d, store);
        const std::size_t k = std::min(*s.knn, hits.size());
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                          [](const Hit& a, const Hit& b) { return a.dist_sq < b.dist_sq; });
        for (std::size_t i = 0; i < k; ++i) sink += hits[i].payload->weight;
        out.neighbors += k;
        out.cells += store.config().cell_count();
        ++out.methods[Method::naive];
        continue;
      }
      QueryStats st;
      const auto hits = query_knn(c, *s.knn, std::max(d, 1e-9), store, tables, w, &st);
      for (const auto& h : hits) sink += h.payload->weight;
      out.neighbors += hits.size();
      out.cells += st.cells_visited;
      ++out.methods[st.method];
    }
    return out;
  }
  const auto touch = [&](const Hit& h) { sink += h.payload->weight; };
  for (const Vec3& c : centers) {
    const QueryContext ctx = QueryContext::prepare(c, d, tables);
    const Method m = method ? *method : select_method(ctx, store, tables, s.weights);
    const QueryStats st = query_using(m, ctx, store, tables, touch);
    out.neighbors += st.hits;
    out.cells += st.cells_visited;
    ++out.methods[st.method];
  }
  return out;
}

struct Measurement {
  double queries_per_sec = 0.0;
  BatchOutcome first;
  std::size_t timed = 0;
  std::size_t discarded = 0;
};

inline Measurement measure(const BenchScenario& s, std::optional<Method> method, const std::vector<Vec3>& centers,
                           double d, const Store& store, const SphereTables& tables, double& sink) {
  using clock = std::chrono::steady_clock;
  Measurement m;
  std::vector<double> seconds;
  seconds.reserve(s.repeats);
  for (std::size_t rep = 0; rep < s.repeats; ++rep) {
    const auto t0 = clock::now();
    BatchOutcome o = run_batch(s, method, centers, d, store, tables, sink);
    const auto t1 = clock::now();
    seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    if (rep == 0) m.first = std::move(o);
  }
  std::sort(seconds.begin(), seconds.end());
  seconds.resize(seconds.size() - s.discard);
  double mean = 0.0;
  for (double t : seconds) mean += t;
  mean /= static_cast<double>(seconds.size());
  // Guard against a zero reading from a coarse clock.
  mean = std::max(mean, 1e-9);
  m.queries_per_sec = static_cast<double>(centers.size()) / mean;
  m.timed = s.repeats;
  m.discarded = s.discard;
  return m;
}

inline std::string dominant_method(const BatchOutcome& o) {
  Method best = Method::sphere;
  std::size_t count = 0;
  for (const auto& [m, n] : o.methods) {
    if (n > count) {
      best = m;
      count = n;
    }
  }
  return to_string(best);
}

}  // namespace detail

/// Measures one distance.  `row` selects the reproducible center set.
inline BenchRow measure_row(const BenchScenario& s, std::size_t row, double d, const Store& store,
                            const SphereTables& tables, double& sink) {
  const auto centers = row_centers(s, row, s.queries);
  const auto main = detail::measure(s, s.method, centers, d, store, tables, sink);
  BenchRow r;
  r.distance = d;
  r.method = detail::dominant_method(main.first);
  r.queries_per_sec = main.queries_per_sec;
  r.cells_visited_mean = static_cast<double>(main.first.cells) / static_cast<double>(centers.size());
  r.neighbors_mean = static_cast<double>(main.first.neighbors) / static_cast<double>(centers.size());
  if (s.method == Method::box) {
    r.ratio_vs_box = 1.0;
  } else {
    const auto box = detail::measure(s, Method::box, centers, d, store, tables, sink);
    r.ratio_vs_box = main.queries_per_sec / box.queries_per_sec;
  }
  r.batches_timed = main.timed;
  r.batches_discarded = main.discarded;
  r.queries_per_batch = centers.size();
  return r;
}

inline std::vector<BenchRow> run_sweep(const BenchScenario& s, const Store& store, const SphereTables& tables,
                                       const std::function<void(const BenchRow&)>& on_row = {}) {
  s.validate();
  std::vector<BenchRow> rows;
  double sink = 0.0;
  const auto ds = s.distances();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    rows.push_back(measure_row(s, i, ds[i], store, tables, sink));
    if (on_row) on_row(rows.back());
  }
  // Keeps the payload reads observable.
  if (sink == -1.0) rows.clear();
  return rows;
}

// ---------------------------------------------------------------------------
// Validation

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::uint64_t failing_seed = 0;  // seed of the first failing case
  std::string detail;
};

struct ValidationReport {
  std::vector<PropertyResult> properties;
  bool ok() const {
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed; });
  }
  std::string to_string() const {
    std::ostringstream os;
    for (const auto& p : properties) {
      os << (p.passed ? "PASS " : "FAIL ") << p.name << "  checks=" << p.checks << " failures=" << p.failures;
      if (!p.passed) os << " seed=" << p.failing_seed << "  " << p.detail;
      os << '\n';
    }
    return os.str();
  }
};

struct ValidationOptions {
  std::size_t centers_per_distance = 20;
  std::size_t shaving_checks = 2000;
  std::vector<std::size_t> knn_ks{1, 8, 32};
  /// Applied to the freshly built tables before any check runs.
  std::function<void(SphereTables&)> tamper;
};

namespace detail {

inline void record_failure(PropertyResult& p, std::uint64_t seed, const std::string& what) {
  if (p.failures == 0) {
    p.failing_seed = seed;
    p.detail = what;
  }
  ++p.failures;
  p.passed = false;
}

/// Hit-set comparison through per-slot stamps, linear in the hit count.
class HitSetChecker {
 public:
  explicit HitSetChecker(std::size_t slots) : dist_(slots), ref_stamp_(slots, 0), seen_stamp_(slots, 0) {}

  void set_reference(const std::vector<Hit>& hits) {
    ++ref_;
    ref_count_ = hits.size();
    for (const auto& h : hits) {
      ref_stamp_[h.handle.slot] = ref_;
      dist_[h.handle.slot] = h.dist_sq;
    }
  }

  /// Empty string when `hits` equals the reference exactly.
  template <class Range>
  std::string compare(const Range& hits) {
    ++seen_;
    std::size_t n = 0;
    for (const auto& h : hits) {
      const auto s = h.handle.slot;
      if (ref_stamp_[s] != ref_) return "extra object " + std::to_string(s);
      if (seen_stamp_[s] == seen_) return "object " + std::to_string(s) + " delivered twice";
      if (dist_[s] != h.dist_sq) return "distance differs for object " + std::to_string(s);
      seen_stamp_[s] = seen_;
      ++n;
    }
    if (n != ref_count_) return "missing " + std::to_string(ref_count_ - n) + " objects";
    return {};
  }

 private:
  std::vector<double> dist_;
  std::vector<std::uint64_t> ref_stamp_, seen_stamp_;
  std::uint64_t ref_ = 0, seen_ = 0;
  std::size_t ref_count_ = 0;
};

}  // namespace detail

/// Cells walked by the sphere traversal before per-cell tests, as marks
/// over the packed index space.
inline void mark_walked_cells(const QueryContext& ctx, const SphereTables& tables, std::vector<std::uint8_t>& marks) {
  const GridConfig& g = tables.config();
  std::fill(marks.begin(), marks.end(), 0);
  for_each_walked_offset(ctx, tables, [&](const CellOffset& o) {
    const PackedIndex p = translate(ctx.center_unpacked, o, g);
    if (p != g.outside_index()) marks[p] = 1;
  });
}

/// Checks the shaved traversal against the per-cell distance oracle.
inline PropertyResult check_shaving_safety(const SphereTables& tables, std::size_t checks, double d_max,
                                           std::uint64_t seed) {
  const GridConfig& g = tables.config();
  PropertyResult p{"shaving-safety"};
  std::vector<std::uint8_t> marks(g.cell_count());
  for (std::size_t i = 0; i < checks; ++i) {
    const std::uint64_t case_seed = mix_seed(seed, 500000 + i);
    SceneRng rng(case_seed);
    const Vec3 c = random_point(g, rng);
    const double d = rng.uniform(0.0, d_max);
    const QueryContext ctx = QueryContext::prepare(c, d, tables);
    mark_walked_cells(ctx, tables, marks);
    ++p.checks;
    for (PackedIndex cell : oracle::cells_within(c, d, g)) {
      if (!marks[cell]) {
        std::ostringstream os;
        os << "cell " << cell << " dropped for center (" << c[0] << "," << c[1] << "," << c[2] << ") d=" << d;
        detail::record_failure(p, case_seed, os.str());
        break;
      }
    }
  }
  return p;
}

inline ValidationReport run_validation(const BenchScenario& s, const ValidationOptions& opt = {}) {
  s.validate();
  ValidationReport report;
  SphereTables tables = SphereTables::build(s.grid);
  if (opt.tamper) opt.tamper(tables);
  const GridConfig& g = s.grid;

  {
    PropertyResult p{"table-order"};
    const auto offs = tables.table().offsets();
    ++p.checks;
    if (offs.front().b_sq != 0 ||
        !std::is_sorted(offs.begin(), offs.end(), [](const auto& a, const auto& b) { return a.b_sq < b.b_sq; })) {
      detail::record_failure(p, s.seed, "offsets not sorted by b^2");
    }
    for (std::uint32_t n = 0; n <= tables.table().max_entry(); ++n) {
      ++p.checks;
      const auto expect = static_cast<std::size_t>(
          std::count_if(offs.begin(), offs.end(), [n](const auto& o) { return o.b_sq <= n; }));
      if (tables.table().entry_end(n) != expect) detail::record_failure(p, s.seed, "entry_end(" + std::to_string(n) + ")");
    }
    report.properties.push_back(std::move(p));
  }

  report.properties.push_back(
      check_shaving_safety(tables, opt.shaving_checks, std::max(s.effective_d_max(), 1.0), s.seed));

  const Store store = generate_scene(s);
  detail::HitSetChecker checker(store.size() + 1);
  PropertyResult eq{"method-equivalence"};
  PropertyResult dom{"cell-visit-dominance"};
  PropertyResult knn{"knn-equivalence"};
  const auto ds = s.distances();
  std::vector<Hit> hits;
  for (std::size_t row = 0; row < ds.size(); ++row) {
    const double d = ds[row];
    const auto centers = row_centers(s, row, opt.centers_per_distance);
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const std::uint64_t case_seed = mix_seed(s.seed, 1000 + row) ^ ci;
      const Vec3& c = centers[ci];
      const auto reference = naive_scan(c, d, store);
      checker.set_reference(reference);
      const QueryContext ctx = QueryContext::prepare(c, d, tables);
      std::size_t sphere_cells = 0, box_cells = 0;
      for (Method m : {Method::sphere, Method::box, Method::nonempty}) {
        hits.clear();
        const QueryStats st = query_using(m, ctx, store, tables, [&](const Hit& h) { hits.push_back(h); });
        if (m == Method::sphere) sphere_cells = st.cells_visited;
        if (m == Method::box) box_cells = st.cells_visited;
        ++eq.checks;
        if (auto why = checker.compare(hits); !why.empty()) {
          detail::record_failure(eq, case_seed, std::string(to_string(m)) + " d=" + std::to_string(d) + ": " + why);
        }
      }
      hits.clear();
      query_all(c, d, store, tables, s.weights, [&](const Hit& h) { hits.push_back(h); });
      ++eq.checks;
      if (auto why = checker.compare(hits); !why.empty()) {
        detail::record_failure(eq, case_seed, "auto d=" + std::to_string(d) + ": " + why);
      }
      ++dom.checks;
      if (ctx.sphere_available() && sphere_cells > box_cells) {
        detail::record_failure(dom, case_seed,
                               "d=" + std::to_string(d) + " sphere " + std::to_string(sphere_cells) + " > box " +
                                   std::to_string(box_cells));
      }
      if (d > 0.0) {
        std::vector<double> ref_d;
        ref_d.reserve(reference.size());
        for (const auto& h : reference) ref_d.push_back(h.dist_sq);
        std::sort(ref_d.begin(), ref_d.end());
        for (std::size_t k : opt.knn_ks) {
          const auto got = query_knn(c, k, d, store, tables, s.weights);
          ++knn.checks;
          const std::size_t expect_n = std::min(k, ref_d.size());
          bool same = got.size() == expect_n;
          for (std::size_t i = 0; same && i < expect_n; ++i) same = got[i].dist_sq == ref_d[i];
          if (!same) {
            detail::record_failure(knn, case_seed, "k=" + std::to_string(k) + " d=" + std::to_string(d));
          }
        }
      }
    }
  }
  report.properties.push_back(std::move(eq));
  report.properties.push_back(std::move(dom));
  report.properties.push_back(std::move(knn));
  return report;
}

}  // namespace sphidx::bench
