#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "amodrl/errors.hpp"
#include "amodrl/tensor.hpp"

namespace amodrl {

/// Station graph: symmetric 0/1 adjacency plus per-edge travel cost
/// (currency per vehicle per hop). Immutable after construction.
struct Graph {
  int n = 0;
  int grid_rows = 0;  // 0 when not grid-built
  int grid_cols = 0;
  std::vector<std::pair<int, int>> edges;  // undirected, i < j
  Tensor A;                                // n x n, entries in {0,1}, zero diagonal
  Tensor edge_cost;                        // n x n, positive exactly where A is 1

  std::vector<int> neighbors(int i) const {
    std::vector<int> out;
    for (int j = 0; j < n; ++j)
      if (A(i, j) != 0.0) out.push_back(j);
    return out;
  }
};

inline void validate_graph(const Graph& g) {
  if (g.n <= 0) throw ArgumentError("graph: empty node set");
  if (g.A.rows != g.n || g.A.cols != g.n || g.edge_cost.rows != g.n || g.edge_cost.cols != g.n)
    throw DimensionError("graph: matrix sizes do not match node count");
  for (int i = 0; i < g.n; ++i) {
    if (g.A(i, i) != 0.0) throw ArgumentError("graph: nonzero adjacency diagonal");
    for (int j = 0; j < g.n; ++j) {
      const double a = g.A(i, j);
      if (a != 0.0 && a != 1.0) throw ArgumentError("graph: adjacency entries must be 0/1");
      if (a != g.A(j, i)) throw ArgumentError("graph: adjacency not symmetric");
      if (g.edge_cost(i, j) != g.edge_cost(j, i))
        throw ArgumentError("graph: edge costs not symmetric");
      if (a == 1.0 && !(g.edge_cost(i, j) > 0.0))
        throw ArgumentError("graph: edge without positive cost");
      if (a == 0.0 && g.edge_cost(i, j) != 0.0)
        throw ArgumentError("graph: cost on a non-edge");
    }
  }
}

/// Rectangular lattice with row-major node numbering. 4-neighborhood by
/// default; `eight_neighborhood` adds the diagonals.
inline Graph build_grid_rect(int rows, int cols, double base_cost,
                             bool eight_neighborhood = false) {
  if (rows < 1 || cols < 1) throw ArgumentError("build_grid: grid dimensions must be >= 1");
  if (!(base_cost > 0.0)) throw ArgumentError("build_grid: base cost must be positive");
  Graph g;
  g.n = rows * cols;
  g.grid_rows = rows;
  g.grid_cols = cols;
  g.A = Tensor::zeros(g.n, g.n);
  g.edge_cost = Tensor::zeros(g.n, g.n);
  auto id = [cols](int r, int c) { return r * cols + c; };
  auto connect = [&](int u, int v) {
    g.edges.emplace_back(std::min(u, v), std::max(u, v));
    g.A(u, v) = g.A(v, u) = 1.0;
    g.edge_cost(u, v) = g.edge_cost(v, u) = base_cost;
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) connect(id(r, c), id(r, c + 1));
      if (r + 1 < rows) connect(id(r, c), id(r + 1, c));
      if (eight_neighborhood && r + 1 < rows) {
        if (c + 1 < cols) connect(id(r, c), id(r + 1, c + 1));
        if (c - 1 >= 0) connect(id(r, c), id(r + 1, c - 1));
      }
    }
  return g;
}

/// k-by-k station grid.
inline Graph build_grid(int k, double base_cost, bool eight_neighborhood = false) {
  if (k < 1) throw ArgumentError("build_grid: k must be >= 1");
  return build_grid_rect(k, k, base_cost, eight_neighborhood);
}

/// Symmetric-normalized propagation matrix with self-loops.
struct PropagationMatrix {
  Tensor P;
};

/// P = Dhat^{-1/2} (W + I) Dhat^{-1/2} for a nonnegative symmetric W (the 0/1
/// adjacency, Pro-GNN's refined matrix, or PTDNet's masked adjacency).
/// Computed as P_ij = (W+I)_ij * (r_i * r_j) with r = 1/sqrt(degree); the
/// on-tape variant uses the identical expression so both paths agree
/// bit-for-bit.
inline PropagationMatrix normalize_adjacency(const Tensor& W) {
  if (W.rows != W.cols) throw DimensionError("normalize_adjacency: matrix must be square");
  const int n = W.rows;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (W(i, j) < 0.0)
        throw ArgumentError("normalize_adjacency: negative weight at (" + std::to_string(i) +
                            "," + std::to_string(j) + ")");
      if (std::abs(W(i, j) - W(j, i)) > 1e-12)
        throw ArgumentError("normalize_adjacency: matrix not symmetric");
    }
  Tensor ahat = W;
  for (int i = 0; i < n; ++i) ahat(i, i) += 1.0;
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) {
    double d = 0.0;
    for (int j = 0; j < n; ++j) d += ahat(i, j);
    if (!(d > 0.0))
      throw DegenerateError("normalize_adjacency: node " + std::to_string(i) +
                            " has non-positive augmented degree");
    r[i] = 1.0 / std::sqrt(d);
  }
  PropagationMatrix pm;
  pm.P = Tensor(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) pm.P(i, j) = ahat(i, j) * (r[i] * r[j]);
  return pm;
}

inline PropagationMatrix normalize_adjacency(const Graph& g) { return normalize_adjacency(g.A); }

/// All-pairs shortest-path cost under edge_cost (Floyd-Warshall).
inline Tensor shortest_path_costs(const Graph& g) {
  const int n = g.n;
  const double inf = HUGE_VAL;
  Tensor d(n, n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      d(i, j) = i == j ? 0.0 : (g.A(i, j) != 0.0 ? g.edge_cost(i, j) : inf);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      const double dik = d(i, k);
      if (dik == inf) continue;
      for (int j = 0; j < n; ++j) {
        const double via = dik + d(k, j);
        if (via < d(i, j)) d(i, j) = via;
      }
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (d(i, j) == inf)
        throw ConnectivityError("shortest_path_costs: graph is disconnected (no path " +
                                std::to_string(i) + " -> " + std::to_string(j) + ")");
  return d;
}

/// Relabel nodes: node i of the input becomes node perm[i] of the output.
inline Tensor permute_matrix(const Tensor& m, const std::vector<int>& perm) {
  if (m.rows != m.cols || static_cast<int>(perm.size()) != m.rows)
    throw DimensionError("permute_matrix: size mismatch");
  Tensor out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(perm[i], perm[j]) = m(i, j);
  return out;
}

}  // namespace amodrl
