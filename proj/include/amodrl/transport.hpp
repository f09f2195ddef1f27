#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "amodrl/errors.hpp"
#include "amodrl/tensor.hpp"

namespace amodrl {

/// Apportion `total` integer units proportionally to nonnegative `shares`:
/// floor the exact quotas, then hand the leftover units to the largest
/// fractional remainders (ties broken toward the lower index). The result
/// always sums to `total` exactly.
inline std::vector<int> round_largest_remainder(const std::vector<double>& shares, int total) {
  if (total < 0) throw ArgumentError("round_largest_remainder: negative total");
  if (shares.empty()) throw ArgumentError("round_largest_remainder: empty share vector");
  double sum = 0.0;
  for (double s : shares) {
    if (!(s >= 0.0) || !std::isfinite(s))
      throw ArgumentError("round_largest_remainder: shares must be finite and nonnegative");
    sum += s;
  }
  if (!(sum > 0.0)) throw DegenerateError("round_largest_remainder: shares sum to zero");
  const int n = static_cast<int>(shares.size());
  std::vector<int> out(n, 0);
  std::vector<double> rem(n, 0.0);
  int assigned = 0;
  for (int i = 0; i < n; ++i) {
    const double quota = shares[i] / sum * total;
    out[i] = static_cast<int>(std::floor(quota));
    rem[i] = quota - out[i];
    assigned += out[i];
  }
  int leftover = total - assigned;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int k = 0; k < leftover; ++k) out[order[k]] += 1;
  return out;
}

/// A rebalancing plan: integer vehicle moves and their total travel cost.
struct TransportPlan {
  Tensor flow;   // n x n, flow(i,j) vehicles moved i -> j
  double cost = 0.0;
  std::vector<std::tuple<int, int, int>> moves;  // (from, to, count), flow > 0 only
};

namespace detail {

/// Min-cost max-flow on a small bipartite instance via successive
/// shortest augmenting paths (Bellman-Ford handles the residual negative
/// costs). Instances here are tiny — a few dozen nodes, flow equal to the
/// fleet size — so simplicity wins over asymptotics.
class MinCostFlow {
 public:
  explicit MinCostFlow(int num_nodes) : head_(num_nodes, -1) {}

  /// Returns the index of the forward edge (for edge_flow lookups).
  int add_edge(int from, int to, int cap, double cost) {
    const int idx = static_cast<int>(edges_.size());
    edges_.push_back({to, head_[from], cap, cost});
    head_[from] = idx;
    edges_.push_back({from, head_[to], 0, -cost});
    head_[to] = idx + 1;
    return idx;
  }

  /// Pushes as much flow as possible from s to t; returns (flow, cost).
  std::pair<int, double> run(int s, int t) {
    const int n = static_cast<int>(head_.size());
    int total_flow = 0;
    double total_cost = 0.0;
    while (true) {
      std::vector<double> dist(n, std::numeric_limits<double>::infinity());
      std::vector<int> in_edge(n, -1);
      dist[s] = 0.0;
      for (int round = 0; round < n; ++round) {  // Bellman-Ford relaxation
        bool changed = false;
        for (int u = 0; u < n; ++u) {
          if (!std::isfinite(dist[u])) continue;
          for (int e = head_[u]; e != -1; e = edges_[e].next) {
            if (edges_[e].cap <= 0) continue;
            const double nd = dist[u] + edges_[e].cost;
            if (nd < dist[edges_[e].to] - 1e-15) {
              dist[edges_[e].to] = nd;
              in_edge[edges_[e].to] = e;
              changed = true;
            }
          }
        }
        if (!changed) break;
      }
      if (!std::isfinite(dist[t])) break;
      int push = std::numeric_limits<int>::max();
      for (int v = t; v != s; v = edges_[in_edge[v] ^ 1].to)
        push = std::min(push, edges_[in_edge[v]].cap);
      for (int v = t; v != s; v = edges_[in_edge[v] ^ 1].to) {
        edges_[in_edge[v]].cap -= push;
        edges_[in_edge[v] ^ 1].cap += push;
      }
      total_flow += push;
      total_cost += push * dist[t];
    }
    return {total_flow, total_cost};
  }

  int edge_flow(int edge_index) const { return edges_[edge_index ^ 1].cap; }

 private:
  struct Edge {
    int to;
    int next;
    int cap;
    double cost;
  };
  std::vector<Edge> edges_;
  std::vector<int> head_;
};

}  // namespace detail

/// Minimum-cost integer flows moving surplus vehicles to deficit stations.
/// `pair_cost(i,j)` is the cost of moving one vehicle i -> j (typically the
/// all-pairs shortest-path cost). Requires sum(surplus) == sum(deficit).
inline TransportPlan solve_transportation(const std::vector<int>& surplus,
                                          const std::vector<int>& deficit,
                                          const Tensor& pair_cost) {
  const int n = static_cast<int>(surplus.size());
  if (static_cast<int>(deficit.size()) != n || pair_cost.rows != n || pair_cost.cols != n)
    throw DimensionError("solve_transportation: size mismatch");
  long long s_sum = 0, d_sum = 0;
  for (int i = 0; i < n; ++i) {
    if (surplus[i] < 0 || deficit[i] < 0)
      throw ArgumentError("solve_transportation: negative supply or demand");
    s_sum += surplus[i];
    d_sum += deficit[i];
  }
  if (s_sum != d_sum)
    throw ArgumentError("solve_transportation: total surplus " + std::to_string(s_sum) +
                        " != total deficit " + std::to_string(d_sum));

  TransportPlan plan;
  plan.flow = Tensor::zeros(n, n);
  if (s_sum == 0) return plan;

  // Nodes: 0 source, 1..n surplus stations, n+1..2n deficit stations, 2n+1 sink.
  detail::MinCostFlow mcf(2 * n + 2);
  const int src = 0, snk = 2 * n + 1;
  std::vector<std::tuple<int, int, int>> cross;  // (edge index, i, j)
  for (int i = 0; i < n; ++i)
    if (surplus[i] > 0) mcf.add_edge(src, 1 + i, surplus[i], 0.0);
  for (int i = 0; i < n; ++i)
    if (surplus[i] > 0)
      for (int j = 0; j < n; ++j)
        if (deficit[j] > 0) {
          if (!(pair_cost(i, j) >= 0.0))
            throw ArgumentError("solve_transportation: negative pair cost");
          const int e = mcf.add_edge(1 + i, 1 + n + j, static_cast<int>(s_sum), pair_cost(i, j));
          cross.emplace_back(e, i, j);
        }
  for (int j = 0; j < n; ++j)
    if (deficit[j] > 0) mcf.add_edge(1 + n + j, snk, deficit[j], 0.0);

  auto [flow, cost] = mcf.run(src, snk);
  if (flow != s_sum)
    throw DegenerateError("solve_transportation: could not route all surplus (routed " +
                          std::to_string(flow) + " of " + std::to_string(s_sum) + ")");
  plan.cost = cost;
  for (auto& [e, i, j] : cross) {
    const int f = mcf.edge_flow(e);
    if (f > 0) {
      plan.flow(i, j) = f;
      plan.moves.emplace_back(i, j, f);
    }
  }
  return plan;
}

/// Turn current/desired station counts into a min-cost move plan.
inline TransportPlan plan_rebalancing(const std::vector<int>& current,
                                      const std::vector<int>& desired,
                                      const Tensor& pair_cost) {
  const int n = static_cast<int>(current.size());
  if (static_cast<int>(desired.size()) != n)
    throw DimensionError("plan_rebalancing: count vectors differ in length");
  long long c_sum = 0, d_sum = 0;
  for (int i = 0; i < n; ++i) {
    if (current[i] < 0 || desired[i] < 0)
      throw ArgumentError("plan_rebalancing: negative vehicle count");
    c_sum += current[i];
    d_sum += desired[i];
  }
  if (c_sum != d_sum)
    throw ArgumentError("plan_rebalancing: fleet size changed (" + std::to_string(c_sum) +
                        " -> " + std::to_string(d_sum) + ")");
  std::vector<int> surplus(n, 0), deficit(n, 0);
  for (int i = 0; i < n; ++i) {
    const int diff = current[i] - desired[i];
    if (diff > 0) surplus[i] = diff;
    else deficit[i] = -diff;
  }
  return solve_transportation(surplus, deficit, pair_cost);
}

}  // namespace amodrl
