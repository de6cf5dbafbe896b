#pragma once

// Neighbor queries over an ObjectStore.
//
// Three traversals answer the same question, "every object within d of C":
//   sphere   - walk the distance-sorted offset table from the center cell
//              outwards, using the shaved slice for the final ring;
//   box      - the bin-lattice triple loop over the clipped bounding box;
//   nonempty - walk the list of occupied cells and reject far ones.
// select_method picks the one expected to touch the fewest cells.  The
// naive scan is kept as the reference every other path is checked against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sphidx/cell_geometry.hpp"
#include "sphidx/object_store.hpp"
#include "sphidx/sphere_tables.hpp"

namespace sphidx {

enum class Method { sphere, box, nonempty, naive };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::sphere: return "sphere";
    case Method::box: return "box";
    case Method::nonempty: return "nonempty";
    case Method::naive: return "naive";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "sphere") return Method::sphere;
  if (s == "box") return Method::box;
  if (s == "nonempty") return Method::nonempty;
  if (s == "naive") return Method::naive;
  return std::nullopt;
}

struct SelectionWeights {
  double sphere = 1.0;
  double box = 1.0;
  double nonempty = 1.0;
  /// Below this radius all-neighbor queries use the box method.
  std::optional<double> revert_distance_all;
  /// Below this search cap k-nearest queries use the box method.
  std::optional<double> revert_distance_knn;

  void validate() const {
    if (!(sphere > 0) || !(box > 0) || !(nonempty > 0)) {
      throw std::invalid_argument("selection weights must be positive");
    }
  }
};

template <class Payload>
struct NeighborHit {
  ObjectHandle handle;
  const Payload* payload = nullptr;
  Vec3 position{};
  double dist_sq = 0.0;
};

struct QueryStats {
  Method method = Method::sphere;
  /// Distinct in-region cells whose contents were read.
  std::size_t cells_visited = 0;
  std::size_t objects_tested = 0;
  std::size_t hits = 0;
  /// Box method only: the box covered the whole region.
  bool whole_world = false;
};

/// Per-query state shared by every traversal.
struct QueryContext {
  Vec3 center{};
  double d = 0.0;
  double d_sq = 0.0;
  Location loc;
  UnpackedIndex center_unpacked;
  /// d^2 reaches past the last table entry: walk the whole table unshaved.
  bool clamped = false;
  std::uint32_t ring = 0;
  double frac_d = 0.0;
  unsigned mask = 0;

  bool sphere_available() const { return loc.inside; }

  static QueryContext prepare(const Vec3& center, double d, const SphereTables& tables) {
    if (!std::isfinite(d) || d < 0.0) throw std::invalid_argument("query radius must be finite and >= 0");
    QueryContext ctx;
    const GridConfig& g = tables.config();
    ctx.center = center;
    ctx.d = d;
    ctx.d_sq = d * d;
    ctx.loc = locate(center, g);
    if (ctx.loc.inside) ctx.center_unpacked = expand(ctx.loc.cell, g);
    ctx.clamped = ctx.d_sq >= tables.table().d_max_sq();
    if (!ctx.clamped) {
      ctx.ring = static_cast<std::uint32_t>(std::floor(d));
      ctx.frac_d = d - ctx.ring;
      ctx.mask = direction_mask(ctx.loc.fractions, ctx.frac_d);
    }
    return ctx;
  }
};

namespace detail {

inline constexpr double kSqrt3 = 1.7320508075688772;

template <class Payload, class Visitor>
inline void visit_cell_objects(const ObjectStore<Payload>& store, PackedIndex cell, const QueryContext& ctx,
                               bool unconditional, QueryStats& st, Visitor& visit) {
  const GridConfig& g = store.config();
  for (const auto& e : store.cell(cell)) {
    const double dsq = distance_sq(e.position, ctx.center, g);
    ++st.objects_tested;
    if (unconditional || dsq <= ctx.d_sq) {
      ++st.hits;
      visit(NeighborHit<Payload>{store.handle_at(e.slot), &store.payload_at(e.slot), e.position, dsq});
    }
  }
}

/// Per-axis cell range of the bounding box, already clipped or wrapped.
struct AxisRange {
  std::int64_t lo = 0;     // first cell (may be negative or >= extent on cyclic axes)
  std::int64_t count = 0;  // cells on this axis, <= extent
  bool full = false;
  bool leaves_region = false;
};

inline std::int64_t floor_to_i64(double v) {
  constexpr double lim = 1e12;
  return static_cast<std::int64_t>(std::floor(std::clamp(v, -lim, lim)));
}

inline AxisRange box_axis(const GridConfig& g, int a, double c, double d) {
  const std::int64_t ext = g.extent(a);
  std::int64_t lo = floor_to_i64(c - d);
  std::int64_t hi = floor_to_i64(c + d);
  AxisRange r;
  if (g.cyclic(a)) {
    if (hi - lo + 1 >= ext) {
      r.lo = 0;
      r.count = ext;
      r.full = true;
    } else {
      r.lo = lo;
      r.count = hi - lo + 1;
    }
    return r;
  }
  if (lo < 0 || hi >= ext) r.leaves_region = true;
  lo = std::max<std::int64_t>(lo, 0);
  hi = std::min<std::int64_t>(hi, ext - 1);
  r.lo = lo;
  r.count = hi >= lo ? hi - lo + 1 : 0;
  r.full = lo == 0 && hi == ext - 1;
  return r;
}

inline std::int64_t wrap(std::int64_t v, std::int64_t ext) {
  const std::int64_t m = v % ext;
  return m < 0 ? m + ext : m;
}

}  // namespace detail

/// Number of in-region cells in the clipped bounding box of the query.
inline std::uint64_t box_cell_count(const QueryContext& ctx, const GridConfig& g) {
  std::uint64_t n = 1;
  for (int a = 0; a < 3; ++a) n *= static_cast<std::uint64_t>(detail::box_axis(g, a, ctx.center[a], ctx.d).count);
  return n;
}

/// Calls `f` for every offset the sphere traversal walks before any
/// per-cell test: lower rings in full, then the final ring's shaved slice
/// up to floor(d^2).  Past the table top the whole table is walked.
template <class F>
void for_each_walked_offset(const QueryContext& ctx, const SphereTables& tables, F&& f) {
  const OffsetTable& table = tables.table();
  if (ctx.clamped) {
    for (const CellOffset& o : table.offsets()) f(o);
    return;
  }
  for (const CellOffset& o : table.offsets().first(table.ring_begin(ctx.ring))) f(o);
  const auto cut = static_cast<std::uint32_t>(ctx.d_sq);
  for (const CellOffset& o : tables.shaved().slice(ctx.ring, ctx.mask)) {
    if (o.b_sq > cut) break;
    f(o);
  }
}

/// Offset-table traversal.  Requires a center inside the region.
template <class Payload, class Visitor>
QueryStats query_sphere(const QueryContext& ctx, const ObjectStore<Payload>& store, const SphereTables& tables,
                        Visitor&& visit) {
  if (!ctx.sphere_available()) throw std::logic_error("sphere traversal needs a center inside the region");
  const GridConfig& g = tables.config();
  QueryStats st;
  st.method = Method::sphere;

  // Cells at b^2 <= (d-1)^2 are kept without the exact test; below d < 1
  // every cell is tested.  Cells with b <= d - 2*sqrt(3) lie wholly inside.
  const double test_above = ctx.d >= 1.0 ? (ctx.d - 1.0) * (ctx.d - 1.0) : -1.0;
  const double interior_b = ctx.d - 2.0 * detail::kSqrt3 - kBoundarySlack;
  const double interior_sq = interior_b > 0.0 ? interior_b * interior_b : -1.0;
  const double reject_sq = ctx.d_sq + kBoundarySlack;
  const double include_sq = ctx.d_sq - kBoundarySlack;
  const SubCellFractions& frac = ctx.loc.fractions;
  bool outside_touched = false;

  const auto process = [&](const CellOffset& o) {
    const double b_sq = static_cast<double>(o.b_sq);
    if (b_sq > test_above && min_dist_sq(o, frac) > reject_sq) return;
    const PackedIndex cell = translate(ctx.center_unpacked, o, g);
    if (cell == g.outside_index()) {
      outside_touched = true;
      return;
    }
    ++st.cells_visited;
    if (store.cell_size(cell) == 0) return;
    const bool inside = b_sq <= interior_sq || farthest_sq(o, frac) <= include_sq;
    detail::visit_cell_objects(store, cell, ctx, inside, st, visit);
  };

  for_each_walked_offset(ctx, tables, process);
  if (outside_touched) detail::visit_cell_objects(store, g.outside_index(), ctx, false, st, visit);
  return st;
}

/// Bin-lattice traversal of the bounding box clipped to the region.
template <class Payload, class Visitor>
QueryStats query_box(const QueryContext& ctx, const ObjectStore<Payload>& store, Visitor&& visit) {
  const GridConfig& g = store.config();
  QueryStats st;
  st.method = Method::box;
  std::array<detail::AxisRange, 3> r;
  bool leaves = false;
  bool whole = true;
  for (int a = 0; a < 3; ++a) {
    r[a] = detail::box_axis(g, a, ctx.center[a], ctx.d);
    leaves = leaves || r[a].leaves_region;
    whole = whole && r[a].full;
  }
  st.cells_visited = static_cast<std::size_t>(r[0].count * r[1].count * r[2].count);

  if (whole) {
    // The box is the region: skip cell addressing and take the occupied
    // cells directly.  When the ball also covers the whole torus no
    // distance test can fail.
    st.whole_world = true;
    bool unconditional = false;
    if (g.fully_cyclic()) {
      double reach = 0.0;
      for (int a = 0; a < 3; ++a) reach += 0.25 * static_cast<double>(g.extent(a) * g.extent(a));
      unconditional = ctx.d_sq >= reach + kBoundarySlack;
    }
    for (const auto& [cell, entries] : store.nonempty()) {
      if (cell == g.outside_index() && !leaves) continue;
      detail::visit_cell_objects(store, cell, ctx, unconditional && cell != g.outside_index(), st, visit);
    }
    return st;
  }

  for (std::int64_t z = 0; z < r[2].count; ++z) {
    const std::uint64_t cz = static_cast<std::uint64_t>(detail::wrap(r[2].lo + z, g.extent(kZ))) << g.packed_shift(kZ);
    for (std::int64_t y = 0; y < r[1].count; ++y) {
      const std::uint64_t cy = static_cast<std::uint64_t>(detail::wrap(r[1].lo + y, g.extent(kY)))
                               << g.packed_shift(kY);
      for (std::int64_t x = 0; x < r[0].count; ++x) {
        const PackedIndex cell = cz | cy | static_cast<std::uint64_t>(detail::wrap(r[0].lo + x, g.extent(kX)));
        if (store.cell_size(cell) == 0) continue;
        detail::visit_cell_objects(store, cell, ctx, false, st, visit);
      }
    }
  }
  if (leaves && store.cell_size(g.outside_index()) > 0) {
    detail::visit_cell_objects(store, g.outside_index(), ctx, false, st, visit);
  }
  return st;
}

/// Geometry of `cell` relative to the query's center cell, with the
/// shortest wrap on cyclic axes.
inline CellGeometry relative_geometry(const CellCoord& cell, const QueryContext& ctx, const GridConfig& g) {
  CellGeometry geo;
  for (int a = 0; a < 3; ++a) {
    std::int64_t delta = cell[a] - ctx.loc.coords[a];
    if (g.cyclic(a)) {
      const std::int64_t ext = g.extent(a);
      delta = detail::wrap(delta + ext / 2, ext) - ext / 2;
      if (delta == -ext / 2) geo.two_way |= static_cast<std::uint8_t>(1u << a);
    }
    geo.delta[a] = static_cast<int>(delta);
  }
  return geo;
}

/// Occupied-cell list traversal.  Every object in a surviving cell is
/// distance tested.
template <class Payload, class Visitor>
QueryStats query_nonempty(const QueryContext& ctx, const ObjectStore<Payload>& store, Visitor&& visit) {
  const GridConfig& g = store.config();
  QueryStats st;
  st.method = Method::nonempty;
  const double reject_sq = ctx.d_sq + kBoundarySlack;
  for (const auto& [cell, entries] : store.nonempty()) {
    if (cell != g.outside_index()) {
      ++st.cells_visited;
      const CellGeometry geo = relative_geometry(unpack_coords(cell, g), ctx, g);
      if (min_dist_sq(geo, ctx.loc.fractions) > reject_sq) continue;
    }
    detail::visit_cell_objects(store, cell, ctx, false, st, visit);
  }
  return st;
}

template <class Payload, class Visitor>
QueryStats query_naive(const QueryContext& ctx, const ObjectStore<Payload>& store, Visitor&& visit) {
  const GridConfig& g = store.config();
  QueryStats st;
  st.method = Method::naive;
  store.for_each_object([&](ObjectHandle h, const Vec3& p, const Payload& payload) {
    const double dsq = distance_sq(p, ctx.center, g);
    ++st.objects_tested;
    if (dsq <= ctx.d_sq) {
      ++st.hits;
      visit(NeighborHit<Payload>{h, &payload, p, dsq});
    }
  });
  return st;
}

/// Reference O(n) scan.
template <class Payload>
std::vector<NeighborHit<Payload>> naive_scan(const Vec3& center, double d, const ObjectStore<Payload>& store) {
  if (!std::isfinite(d) || d < 0.0) throw std::invalid_argument("query radius must be finite and >= 0");
  for (double c : center) {
    if (!std::isfinite(c)) throw std::domain_error("non-finite query center");
  }
  QueryContext ctx;
  ctx.center = center;
  ctx.d = d;
  ctx.d_sq = d * d;
  std::vector<NeighborHit<Payload>> out;
  query_naive(ctx, store, [&](const NeighborHit<Payload>& h) { out.push_back(h); });
  return out;
}

struct MethodCosts {
  std::optional<double> sphere;  // empty when the center is outside a bounded region
  double box = 0.0;
  double nonempty = 0.0;
};

template <class Payload>
MethodCosts method_costs(const QueryContext& ctx, const ObjectStore<Payload>& store, const SphereTables& tables,
                         const SelectionWeights& w) {
  MethodCosts c;
  if (ctx.sphere_available()) {
    const double walked = ctx.clamped ? static_cast<double>(tables.table().size())
                                      : tables.expected().at(static_cast<std::uint32_t>(ctx.d_sq));
    c.sphere = w.sphere * walked;
  }
  c.box = w.box * static_cast<double>(box_cell_count(ctx, store.config()));
  c.nonempty = w.nonempty * static_cast<double>(store.nonempty_size());
  return c;
}

template <class Payload>
Method select_method(const QueryContext& ctx, const ObjectStore<Payload>& store, const SphereTables& tables,
                     const SelectionWeights& w) {
  if (w.revert_distance_all && ctx.d < *w.revert_distance_all) return Method::box;
  const MethodCosts c = method_costs(ctx, store, tables, w);
  if (c.sphere && *c.sphere <= c.box && *c.sphere <= c.nonempty) return Method::sphere;
  return c.box <= c.nonempty ? Method::box : Method::nonempty;
}

/// Runs one specific traversal.  Sphere falls back to box when the center
/// lies outside a bounded region.
template <class Payload, class Visitor>
QueryStats query_using(Method m, const QueryContext& ctx, const ObjectStore<Payload>& store,
                       const SphereTables& tables, Visitor&& visit) {
  switch (m) {
    case Method::sphere:
      if (ctx.sphere_available()) return query_sphere(ctx, store, tables, visit);
      return query_box(ctx, store, visit);
    case Method::box: return query_box(ctx, store, visit);
    case Method::nonempty: return query_nonempty(ctx, store, visit);
    case Method::naive: return query_naive(ctx, store, visit);
  }
  throw std::logic_error("unknown method");
}

/// All objects within `d` of `center`, delivered once each to `visit`.
template <class Payload, class Visitor>
QueryStats query_all(const Vec3& center, double d, const ObjectStore<Payload>& store, const SphereTables& tables,
                     const SelectionWeights& weights, Visitor&& visit) {
  weights.validate();
  const QueryContext ctx = QueryContext::prepare(center, d, tables);
  return query_using(select_method(ctx, store, tables, weights), ctx, store, tables, visit);
}

namespace detail {

template <class Payload>
class KnnCollector {
 public:
  KnnCollector(std::size_t k, double cap_sq) : k_(k), limit_sq_(cap_sq) { heap_.reserve(k); }

  void offer(const NeighborHit<Payload>& h) {
    if (heap_.size() < k_) {
      if (h.dist_sq > limit_sq_) return;
      heap_.push_back(h);
      std::push_heap(heap_.begin(), heap_.end(), farther);
      if (heap_.size() == k_) limit_sq_ = heap_.front().dist_sq;
    } else if (h.dist_sq < heap_.front().dist_sq) {
      std::pop_heap(heap_.begin(), heap_.end(), farther);
      heap_.back() = h;
      std::push_heap(heap_.begin(), heap_.end(), farther);
      limit_sq_ = heap_.front().dist_sq;
    }
  }

  /// Current search radius squared: the cap, or the k-th distance once full.
  double limit_sq() const { return limit_sq_; }

  std::vector<NeighborHit<Payload>> sorted() && {
    std::sort_heap(heap_.begin(), heap_.end(), farther);
    return std::move(heap_);
  }

 private:
  static bool farther(const NeighborHit<Payload>& a, const NeighborHit<Payload>& b) { return a.dist_sq < b.dist_sq; }

  std::size_t k_;
  double limit_sq_;
  std::vector<NeighborHit<Payload>> heap_;
};

template <class Payload>
void offer_cell(const ObjectStore<Payload>& store, PackedIndex cell, const Vec3& center, KnnCollector<Payload>& heap,
                QueryStats& st) {
  const GridConfig& g = store.config();
  for (const auto& e : store.cell(cell)) {
    ++st.objects_tested;
    heap.offer({store.handle_at(e.slot), &store.payload_at(e.slot), e.position, distance_sq(e.position, center, g)});
  }
}

}  // namespace detail

/// The k nearest objects within `d_init` of `center`, nearest first.
/// Walks offsets center to edge and stops once the next offset's minimum
/// bound exceeds the k-th best distance found so far.
template <class Payload>
std::vector<NeighborHit<Payload>> query_knn(const Vec3& center, std::size_t k, double d_init,
                                            const ObjectStore<Payload>& store, const SphereTables& tables,
                                            const SelectionWeights& weights, QueryStats* stats = nullptr) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (!(d_init > 0.0) || !std::isfinite(d_init)) throw std::invalid_argument("k-NN search cap must be > 0");
  weights.validate();
  const QueryContext ctx = QueryContext::prepare(center, d_init, tables);
  const GridConfig& g = tables.config();
  detail::KnnCollector<Payload> heap(k, ctx.d_sq);
  QueryStats st;

  const bool revert = weights.revert_distance_knn && d_init < *weights.revert_distance_knn;
  if (revert || !ctx.sphere_available()) {
    st = query_box(ctx, store, [&](const NeighborHit<Payload>& h) { heap.offer(h); });
    st.hits = 0;
  } else {
    st.method = Method::sphere;
    const OffsetTable& table = tables.table();
    const std::size_t end = table.end_index_for(ctx.d_sq);
    bool outside_touched = false;
    for (std::size_t i = 0; i < end; ++i) {
      const CellOffset& o = table[i];
      const double limit = heap.limit_sq() + kBoundarySlack;
      if (static_cast<double>(o.b_sq) > limit) break;
      if (min_dist_sq(o, ctx.loc.fractions) > limit) continue;
      const PackedIndex cell = translate(ctx.center_unpacked, o, g);
      if (cell == g.outside_index()) {
        outside_touched = true;
        continue;
      }
      ++st.cells_visited;
      detail::offer_cell(store, cell, ctx.center, heap, st);
    }
    if (outside_touched) detail::offer_cell(store, g.outside_index(), ctx.center, heap, st);
  }
  auto out = std::move(heap).sorted();
  st.hits = out.size();
  if (stats) *stats = st;
  return out;
}

}  // namespace sphidx
