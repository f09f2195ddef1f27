#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "amodrl/errors.hpp"
#include "amodrl/graph.hpp"
#include "amodrl/rng.hpp"
#include "amodrl/tensor.hpp"
#include "amodrl/transport.hpp"

namespace amodrl {

/// Time profile of the demand rates.
enum class DemandProfile { kConstant, kPulse };

/// Commuter-pulse parameters: for the first half of the horizon, demand into
/// the center region is amplified and demand out of it damped; the second
/// half reverses the direction (evening flow back out).
struct DemandPulse {
  double strength = 3.0;
  std::vector<int> center;  // empty = pick automatically (nodes nearest the centroid)
};

struct DemandModel {
  double base_rate = 0.5;  // trips/step on every directed adjacent pair
  std::vector<std::tuple<int, int, double>> rate_overrides;  // directed (i, j, rate)
  DemandProfile profile = DemandProfile::kConstant;
  DemandPulse pulse;
};

/// Full description of one simulated city: graph, fleet, horizon, prices,
/// and the demand process. build() must be called once before use.
struct Scenario {
  int grid_rows = 4;
  int grid_cols = 4;
  bool eight_neighborhood = false;
  double base_cost = 1.0;
  std::vector<std::tuple<int, int, double>> cost_overrides;  // undirected (i, j, cost)

  int fleet_size = 8;
  int horizon = 20;
  double price_per_trip = 10.0;
  DemandModel demand;
  bool carry_over = false;  // queueing of unserved demand; only `false` is supported
  uint64_t seed_salt = 0;

  // Built by build():
  Graph graph;
  Tensor base_rates;   // n x n directed rates, nonzero only on adjacent pairs
  Tensor pair_costs;   // all-pairs shortest-path costs
  std::vector<int> center_nodes;
  bool built = false;

  int n() const { return graph.n; }

  void build() {
    if (fleet_size < 1) throw ConfigError("scenario: fleet_size must be >= 1");
    if (horizon < 1) throw ConfigError("scenario: horizon must be >= 1");
    if (price_per_trip < 0.0) throw ConfigError("scenario: price_per_trip must be >= 0");
    if (carry_over)
      throw ConfigError("scenario: carry_over demand queueing is not supported (set false)");
    if (demand.base_rate < 0.0) throw ConfigError("scenario: base_rate must be >= 0");
    if (!(demand.pulse.strength >= 1.0))
      throw ConfigError("scenario: pulse strength must be >= 1");
    graph = build_grid_rect(grid_rows, grid_cols, base_cost, eight_neighborhood);
    for (auto& [i, j, c] : cost_overrides) {
      if (i < 0 || i >= graph.n || j < 0 || j >= graph.n || graph.A(i, j) == 0.0)
        throw ConfigError("scenario: cost override on non-edge (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
      if (!(c > 0.0)) throw ConfigError("scenario: edge costs must be positive");
      graph.edge_cost(i, j) = graph.edge_cost(j, i) = c;
    }
    base_rates = Tensor::zeros(graph.n, graph.n);
    for (int i = 0; i < graph.n; ++i)
      for (int j = 0; j < graph.n; ++j)
        if (graph.A(i, j) != 0.0) base_rates(i, j) = demand.base_rate;
    for (auto& [i, j, r] : demand.rate_overrides) {
      if (i < 0 || i >= graph.n || j < 0 || j >= graph.n || graph.A(i, j) == 0.0)
        throw ConfigError("scenario: demand rate on non-adjacent pair (" + std::to_string(i) +
                          "," + std::to_string(j) + ")");
      if (r < 0.0) throw ConfigError("scenario: demand rates must be >= 0");
      base_rates(i, j) = r;
    }
    pair_costs = shortest_path_costs(graph);
    center_nodes = demand.pulse.center;
    if (demand.profile == DemandProfile::kPulse && center_nodes.empty())
      center_nodes = auto_center(graph);
    for (int c : center_nodes)
      if (c < 0 || c >= graph.n) throw ConfigError("scenario: center node out of range");
    built = true;
  }

  /// The ceil(n/4) nodes nearest the grid centroid (stable tie-break by
  /// index) — a deterministic "downtown" for the commuter pulse.
  static std::vector<int> auto_center(const Graph& g) {
    const int rows = g.grid_rows > 0 ? g.grid_rows : 1;
    const int cols = g.grid_cols > 0 ? g.grid_cols : g.n;
    const double cr = (rows - 1) / 2.0, cc = (cols - 1) / 2.0;
    std::vector<int> order(g.n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> d2(g.n);
    for (int v = 0; v < g.n; ++v) {
      const double dr = v / cols - cr, dc = v % cols - cc;
      d2[v] = dr * dr + dc * dc;
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d2[a] < d2[b]; });
    const int take = (g.n + 3) / 4;
    return std::vector<int>(order.begin(), order.begin() + take);
  }

  bool is_center(int v) const {
    return std::find(center_nodes.begin(), center_nodes.end(), v) != center_nodes.end();
  }

  /// Multiplier applied to base_rates(i,j) at step t.
  double rate_multiplier(int t, int i, int j) const {
    if (demand.profile == DemandProfile::kConstant) return 1.0;
    const bool morning = t < horizon / 2;
    const bool into_center = !is_center(i) && is_center(j);
    const bool out_of_center = is_center(i) && !is_center(j);
    if (morning) {
      if (into_center) return demand.pulse.strength;
      if (out_of_center) return 1.0 / demand.pulse.strength;
    } else {
      if (out_of_center) return demand.pulse.strength;
      if (into_center) return 1.0 / demand.pulse.strength;
    }
    return 1.0;
  }
};

/// Simulator state: step clock, per-node vehicle counts, and the current
/// step's outstanding trip requests (integer-valued n-by-n matrix).
struct AmodState {
  int t = 0;
  std::vector<int> vehicles;
  Tensor pending_demand;
  uint64_t episode_seed = 0;

  int total_vehicles() const { return std::accumulate(vehicles.begin(), vehicles.end(), 0); }
};

/// Per-step accounting. reward is computed once as revenue - rebal_cost.
struct StepOutcome {
  double reward = 0.0;
  int served = 0;
  double rebal_cost = 0.0;
  double revenue = 0.0;
  std::vector<std::tuple<int, int, int>> flows;
};

namespace detail {
inline uint64_t demand_stream_key(const AmodState& st, int n, int t, int i, int j) {
  const uint64_t cell = static_cast<uint64_t>(t) * n * n + static_cast<uint64_t>(i) * n + j;
  return derive_key(derive_key(st.episode_seed, kStreamDemand), cell);
}
}  // namespace detail

/// Poisson demand for step t, one independent stream per directed edge so the
/// draw order can never matter. Zero-rate edges consume no randomness.
inline Tensor synthesize_demand(const Scenario& sc, const AmodState& st, int t) {
  if (!sc.built) throw ContractError("scenario not built");
  if (t < 0 || t >= sc.horizon) throw ContractError("synthesize_demand: step out of range");
  const int n = sc.n();
  Tensor d = Tensor::zeros(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double rate = sc.base_rates(i, j) * sc.rate_multiplier(t, i, j);
      if (rate <= 0.0) continue;
      StreamRng rng(detail::demand_stream_key(st, n, t, i, j));
      d(i, j) = static_cast<double>(rng.poisson(rate));
    }
  return d;
}

/// Fresh episode: uniform fleet split (remainder to the lowest-index nodes)
/// and the first step's demand already synthesized.
inline AmodState reset(const Scenario& sc, uint64_t seed) {
  if (!sc.built) throw ContractError("scenario not built");
  AmodState st;
  st.t = 0;
  st.episode_seed = mix64(seed + mix64(sc.seed_salt));
  const int n = sc.n();
  st.vehicles.assign(n, sc.fleet_size / n);
  for (int i = 0; i < sc.fleet_size % n; ++i) st.vehicles[i] += 1;
  st.pending_demand = synthesize_demand(sc, st, 0);
  return st;
}

struct MatchResult {
  Tensor served;            // n x n, integer-valued
  int total_served = 0;
  double revenue = 0.0;
  std::vector<int> vehicles_after;
};

/// Serve this step's demand with the vehicles on hand. An origin short on
/// vehicles rations its outgoing trips proportionally (largest-remainder,
/// deterministic); served vehicles relocate to their destination within the
/// step; unserved requests are dropped.
inline MatchResult match_demand(const AmodState& st, const Scenario& sc) {
  const int n = sc.n();
  MatchResult res;
  res.served = Tensor::zeros(n, n);
  res.vehicles_after = st.vehicles;
  for (int i = 0; i < n; ++i) {
    long long total = 0;
    for (int j = 0; j < n; ++j) total += static_cast<long long>(st.pending_demand(i, j));
    if (total == 0) continue;
    const int avail = st.vehicles[i];
    if (total <= avail) {
      for (int j = 0; j < n; ++j) res.served(i, j) = st.pending_demand(i, j);
    } else if (avail > 0) {
      std::vector<double> row(n);
      for (int j = 0; j < n; ++j) row[j] = st.pending_demand(i, j);
      std::vector<int> ration = round_largest_remainder(row, avail);
      for (int j = 0; j < n; ++j) res.served(i, j) = ration[j];
    }
    for (int j = 0; j < n; ++j) {
      const int s = static_cast<int>(res.served(i, j));
      if (s == 0) continue;
      res.total_served += s;
      res.vehicles_after[i] -= s;
      res.vehicles_after[j] += s;
    }
  }
  res.revenue = sc.price_per_trip * res.total_served;
  return res;
}

struct RebalanceResult {
  std::vector<std::tuple<int, int, int>> flows;
  double cost = 0.0;
  std::vector<int> vehicles_after;
};

/// Move vehicles toward the desired fleet distribution (a point on the
/// simplex). Integer targets come from largest-remainder rounding; the moves
/// are a min-cost transportation plan under shortest-path costs.
inline RebalanceResult rebalance(const std::vector<int>& vehicles, const Scenario& sc,
                                 const std::vector<double>& desired) {
  const int n = sc.n();
  if (static_cast<int>(desired.size()) != n)
    throw ActionError("rebalance: action length " + std::to_string(desired.size()) +
                      ", expected " + std::to_string(n));
  double sum = 0.0;
  for (double a : desired) {
    if (!std::isfinite(a) || a < 0.0)
      throw ActionError("rebalance: action entries must be finite and nonnegative");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ActionError("rebalance: action must sum to 1 (got " + std::to_string(sum) + ")");
  std::vector<int> targets = round_largest_remainder(desired, sc.fleet_size);
  TransportPlan plan = plan_rebalancing(vehicles, targets, sc.pair_costs);
  RebalanceResult res;
  res.flows = plan.moves;
  res.cost = plan.cost;
  res.vehicles_after = std::move(targets);
  return res;
}

/// Advance one step: match demand, rebalance (skipped when no action is
/// given — the do-nothing baseline), tick the clock, synthesize the next
/// step's demand. Throws once the horizon is exhausted.
inline StepOutcome step(AmodState& st, const Scenario& sc,
                        const std::optional<std::vector<double>>& action) {
  if (st.t >= sc.horizon)
    throw EpisodeCompleteError("step: episode already ran its " +
                               std::to_string(sc.horizon) + " steps");
  StepOutcome out;
  MatchResult match = match_demand(st, sc);
  out.served = match.total_served;
  out.revenue = match.revenue;
  st.vehicles = match.vehicles_after;
  if (action) {
    RebalanceResult reb = rebalance(st.vehicles, sc, *action);
    out.rebal_cost = reb.cost;
    out.flows = std::move(reb.flows);
    st.vehicles = reb.vehicles_after;
  }
  out.reward = out.revenue - out.rebal_cost;
  st.t += 1;
  st.pending_demand =
      st.t < sc.horizon ? synthesize_demand(sc, st, st.t) : Tensor::zeros(sc.n(), sc.n());
  return out;
}

/// Per-node observation rows: [vehicles/fleet, outgoing demand/fleet,
/// incoming demand/fleet, t/T]. Price never enters (it only shapes reward).
inline Tensor node_features(const AmodState& st, const Scenario& sc) {
  const int n = sc.n();
  Tensor x(n, 4);
  const double fleet = sc.fleet_size;
  for (int i = 0; i < n; ++i) {
    double out_d = 0.0, in_d = 0.0;
    for (int j = 0; j < n; ++j) {
      out_d += st.pending_demand(i, j);
      in_d += st.pending_demand(j, i);
    }
    x(i, 0) = st.vehicles[i] / fleet;
    x(i, 1) = out_d / fleet;
    x(i, 2) = in_d / fleet;
    x(i, 3) = static_cast<double>(st.t) / sc.horizon;
  }
  return x;
}

/// One line of the trajectory dump.
struct TrajectoryRow {
  int t = 0;
  std::vector<int> vehicles;  // counts entering the step
  int served = 0;
  double revenue = 0.0;
  double rebal_cost = 0.0;
  double reward = 0.0;
};

}  // namespace amodrl
