#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "gridshield/case_io.hpp"
#include "gridshield/grid_model.hpp"
#include "gridshield/random.hpp"
#include "gridshield/types.hpp"

namespace testing {

using gridshield::GridCase;
using gridshield::Matrix;
using gridshield::Rng;
using gridshield::Vector;

inline GridCase path3() {
  GridCase g;
  g.name = "path3";
  g.n_bus = 3;
  g.slack_bus = 0;
  g.branches = {{0, 1, 1.0, 0.0}, {1, 2, 1.0, 0.0}};
  g.bus_ids = {1, 2, 3};
  return g;
}

/// Random spanning tree plus up to n extra edges, weights in [0.5, 2].
inline GridCase random_connected(Rng& rng, int n) {
  GridCase g;
  g.name = "random";
  g.n_bus = n;
  g.slack_bus = 0;
  std::uniform_real_distribution<double> weight(0.5, 2.0);
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (int v = 1; v < n; ++v) {
    const int u = std::uniform_int_distribution<int>(0, v - 1)(rng);
    g.branches.push_back({u, v, weight(rng), 0.1 * weight(rng)});
    adj[u][v] = adj[v][u] = true;
  }
  const int extra = std::uniform_int_distribution<int>(0, n)(rng);
  for (int e = 0; e < extra; ++e) {
    const int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (a == b || adj[a][b]) continue;
    adj[a][b] = adj[b][a] = true;
    g.branches.push_back({std::min(a, b), std::max(a, b), weight(rng), 0.1 * weight(rng)});
  }
  for (int i = 0; i < n; ++i) g.bus_ids.push_back(i + 1);
  return g;
}

/// Laplacian straight from the edge list, sum of w (e_a - e_b)(e_a - e_b)^T.
inline Matrix laplacian_from_edges(const GridCase& g) {
  Matrix L = Matrix::Zero(g.n_bus, g.n_bus);
  for (const auto& br : g.branches) {
    Vector d = Vector::Zero(g.n_bus);
    d(br.from) = 1.0;
    d(br.to) = -1.0;
    L += br.susceptance * d * d.transpose();
  }
  return L;
}

inline std::vector<int> random_subset(Rng& rng, int n, int size) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace testing

namespace testing {

/// Grid, Laplacian and full-meter DC model held together so that
/// AttackSetting references stay valid.
struct Fixture {
  gridshield::GridCase grid;
  gridshield::Matrix L;
  gridshield::MeasurementModel model;

  explicit Fixture(gridshield::GridCase g, double noise_var = 1e-3)
      : grid(std::move(g)),
        L(gridshield::build_laplacian(grid)),
        model(gridshield::build_measurement_model(grid, gridshield::MeterConfig::full(grid), noise_var)) {}

  std::vector<int> rows_for(const std::vector<int>& buses) const {
    return gridshield::derive_secured_rows(buses, model, grid).rows;
  }
};

}  // namespace testing
