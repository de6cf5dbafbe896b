// Small flock in a wrapping 16^3 world: radius and k-nearest queries.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "sphidx/sphidx.hpp"

struct Boid {
  std::string name;
};

int main() {
  const auto grid = sphidx::GridConfig::cube(4, true);
  const auto tables = sphidx::SphereTables::build(grid);
  sphidx::ObjectStore<Boid> store(grid);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 16.0);
  for (int i = 0; i < 2000; ++i) store.insert({u(rng), u(rng), u(rng)}, Boid{"boid" + std::to_string(i)});

  // One boid sits right across the wrap seam from the query center.
  const auto seam = store.insert({15.8, 8.0, 8.0}, Boid{"seam"});

  const sphidx::Vec3 center{0.3, 8.0, 8.0};
  const sphidx::SelectionWeights weights;
  std::size_t count = 0;
  const auto st = sphidx::query_all(center, 2.5, store, tables, weights,
                                    [&](const sphidx::NeighborHit<Boid>& h) {
                                      ++count;
                                      if (h.handle == seam) std::printf("found %s at %.2f\n", h.payload->name.c_str(),
                                                                        std::sqrt(h.dist_sq));
                                    });
  std::printf("%zu neighbors within 2.5 using %s, %zu cells visited\n", count, sphidx::to_string(st.method),
              st.cells_visited);

  for (const auto& h : sphidx::query_knn(center, 5, 4.0, store, tables, weights)) {
    std::printf("  %-8s %.3f\n", h.payload->name.c_str(), std::sqrt(h.dist_sq));
  }

  store.relocate(seam, {3.0, 3.0, 3.0});
  count = 0;
  sphidx::query_all(center, 2.5, store, tables, weights, [&](const auto&) { ++count; });
  std::printf("%zu neighbors after moving the seam boid away\n", count);
}
