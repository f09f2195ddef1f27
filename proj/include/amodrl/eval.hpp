#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "amodrl/a2c.hpp"
#include "amodrl/env.hpp"
#include "amodrl/errors.hpp"
#include "amodrl/policy.hpp"
#include "amodrl/rng.hpp"

namespace amodrl {

/// Shortest-roundtrip decimal text for a double (deterministic across runs,
/// exact on re-parse) — the one float formatter every CSV writer uses.
inline std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw NumericError("fmt_double: value not representable");
  return std::string(buf, ptr);
}

// ---- policies ----

/// A policy maps the observed state to a rebalancing action (nullopt = leave
/// the fleet alone). Implementations must be deterministic in
/// (state, ep_seed, t).
using PolicyFn = std::function<std::optional<std::vector<double>>(
    const AmodState& st, const Scenario& sc, uint64_t ep_seed, int t)>;

enum class BaselineKind { kNoRebalance, kUniform, kRandomDirichlet };

inline std::string baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::kNoRebalance: return "no_rebalance";
    case BaselineKind::kUniform: return "uniform_distribution";
    case BaselineKind::kRandomDirichlet: return "random_dirichlet";
  }
  throw ArgumentError("unknown baseline");
}

inline BaselineKind parse_baseline(const std::string& s) {
  if (s == "no_rebalance") return BaselineKind::kNoRebalance;
  if (s == "uniform_distribution") return BaselineKind::kUniform;
  if (s == "random_dirichlet") return BaselineKind::kRandomDirichlet;
  throw ConfigError("unknown baseline '" + s +
                    "' (expected no_rebalance|uniform_distribution|random_dirichlet)");
}

inline PolicyFn make_baseline_policy(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kNoRebalance:
      return [](const AmodState&, const Scenario&, uint64_t, int) { return std::nullopt; };
    case BaselineKind::kUniform:
      return [](const AmodState&, const Scenario& sc, uint64_t,
                int) -> std::optional<std::vector<double>> {
        return std::vector<double>(sc.n(), 1.0 / sc.n());
      };
    case BaselineKind::kRandomDirichlet:
      return [](const AmodState&, const Scenario& sc, uint64_t ep_seed,
                int t) -> std::optional<std::vector<double>> {
        StreamRng rng(derive_key(derive_key(ep_seed, kStreamBaseline), t));
        return sample_dirichlet(std::vector<double>(sc.n(), 1.0), rng);
      };
  }
  throw ArgumentError("unknown baseline");
}

/// Wrap a policy stack as an evaluation policy. Deterministic mode acts on
/// the Dirichlet mean; stochastic mode replays the training-time streams.
inline PolicyFn make_stack_policy(PolicyStack& stack, bool stochastic, double tau) {
  return [&stack, stochastic, tau](const AmodState& st, const Scenario& sc, uint64_t ep_seed,
                                   int t) -> std::optional<std::vector<double>> {
    PtdNoise ptd;
    ptd.tau = tau;
    ptd.stochastic = stochastic && stack.cfg.backbone == Backbone::kPtdNet;
    if (ptd.stochastic) {
      StreamRng nrng(derive_key(derive_key(ep_seed, kStreamEdgeNoise), t));
      ptd.noise = ptdnet_draw_noise(static_cast<int>(sc.graph.edges.size()), nrng);
    }
    Tape tape;
    StackForward fwd = stack.forward(tape, sc.graph, node_features(st, sc), ptd);
    const Tensor& cv = tape.value(fwd.concentration);
    std::vector<double> c(cv.data.begin(), cv.data.end());
    if (stochastic) {
      StreamRng arng(derive_key(derive_key(ep_seed, kStreamAction), t));
      return sample_dirichlet(c, arng);
    }
    return dirichlet_mean(c);
  };
}

// ---- episodes & metrics ----

struct EpisodeMetrics {
  double total_reward = 0.0;
  int demand_served = 0;
  double rebal_cost = 0.0;
  std::optional<double> dev_vs_oracle;  // percent, when an oracle value exists
};

struct EpisodeRun {
  EpisodeMetrics metrics;
  std::vector<TrajectoryRow> trajectory;
};

/// Play one full episode under `policy` with the episode seed `seed`.
inline EpisodeRun run_episode(const Scenario& sc, const PolicyFn& policy, uint64_t seed) {
  EpisodeRun run;
  AmodState st = reset(sc, seed);
  for (int t = 0; t < sc.horizon; ++t) {
    TrajectoryRow row;
    row.t = t;
    row.vehicles = st.vehicles;
    std::optional<std::vector<double>> action = policy(st, sc, seed, t);
    StepOutcome out = step(st, sc, action);
    row.served = out.served;
    row.revenue = out.revenue;
    row.rebal_cost = out.rebal_cost;
    row.reward = out.reward;
    run.metrics.total_reward += out.reward;
    run.metrics.demand_served += out.served;
    run.metrics.rebal_cost += out.rebal_cost;
    run.trajectory.push_back(std::move(row));
  }
  return run;
}

/// Trajectory dump: t, per-node vehicle counts, then the step accounting.
inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows,
                                 int n) {
  os << "t";
  for (int i = 0; i < n; ++i) os << ",v" << i;
  os << ",served,revenue,rebal_cost,reward\n";
  for (const TrajectoryRow& r : rows) {
    os << r.t;
    for (int v : r.vehicles) os << "," << v;
    os << "," << r.served << "," << fmt_double(r.revenue) << "," << fmt_double(r.rebal_cost)
       << "," << fmt_double(r.reward) << "\n";
  }
}

// ---- brute-force oracle ----

/// All compositions of `denominator` into n parts, emitted with the first
/// coordinate descending, as simplex actions (parts / denominator).
inline std::vector<std::vector<double>> simplex_grid(int n, int denominator) {
  if (n < 1 || denominator < 1) throw ArgumentError("simplex_grid: n and denominator must be >= 1");
  std::vector<std::vector<double>> out;
  std::vector<int> parts(n, 0);
  std::function<void(int, int)> rec = [&](int idx, int left) {
    if (idx == n - 1) {
      parts[idx] = left;
      std::vector<double> a(n);
      for (int i = 0; i < n; ++i) a[i] = static_cast<double>(parts[i]) / denominator;
      out.push_back(std::move(a));
      return;
    }
    for (int take = left; take >= 0; --take) {
      parts[idx] = take;
      rec(idx + 1, left - take);
    }
  };
  rec(0, denominator);
  return out;
}

struct OracleResult {
  double best_reward = 0.0;
  // One entry per step: nullopt = no rebalancing that step.
  std::vector<std::optional<std::vector<double>>> best_actions;
};

/// Exhaustive best undiscounted episode reward against the frozen demand
/// realization of `seed`: dynamic program over (step, vehicle placement)
/// with actions from the discretized simplex plus the explicit no-op.
/// Refuses instances beyond n <= 3, fleet <= 6, horizon <= 64.
inline OracleResult oracle_search(const Scenario& sc, uint64_t seed, int denominator = 4) {
  if (!sc.built) throw ContractError("scenario not built");
  const int n = sc.n();
  if (n > 3 || sc.fleet_size > 6 || sc.horizon > 64)
    throw ArgumentError("oracle_search: instance too large (limits: n<=3, fleet<=6, T<=64; got n=" +
                        std::to_string(n) + ", fleet=" + std::to_string(sc.fleet_size) +
                        ", T=" + std::to_string(sc.horizon) + ")");
  // Freeze the demand sequence exactly as reset/step would draw it.
  AmodState probe = reset(sc, seed);
  std::vector<Tensor> demand(sc.horizon);
  for (int t = 0; t < sc.horizon; ++t) demand[t] = synthesize_demand(sc, probe, t);

  const std::vector<std::vector<double>> grid = simplex_grid(n, denominator);
  std::vector<std::vector<int>> targets;  // unique integer targets, index-aligned with actions
  std::vector<std::optional<std::vector<double>>> actions;
  actions.emplace_back(std::nullopt);  // evaluated first so ties prefer the no-op
  targets.emplace_back();              // placeholder, unused for the no-op
  for (const auto& a : grid) {
    actions.emplace_back(a);
    targets.push_back(round_largest_remainder(a, sc.fleet_size));
  }

  const long long radix = sc.fleet_size + 1;
  auto encode = [&](const std::vector<int>& v) {
    long long code = 0;
    for (int i = 0; i < n; ++i) code = code * radix + v[i];
    return code;
  };
  struct Entry {
    double value;
    int action;  // index into `actions`
    std::vector<int> next;
  };
  std::vector<std::unordered_map<long long, Entry>> memo(sc.horizon);

  std::function<double(int, const std::vector<int>&)> solve =
      [&](int t, const std::vector<int>& vehicles) -> double {
    if (t == sc.horizon) return 0.0;
    const long long key = encode(vehicles);
    auto it = memo[t].find(key);
    if (it != memo[t].end()) return it->second.value;
    AmodState st;
    st.t = t;
    st.vehicles = vehicles;
    st.pending_demand = demand[t];
    MatchResult match = match_demand(st, sc);
    Entry best{-HUGE_VAL, -1, {}};
    for (int ai = 0; ai < static_cast<int>(actions.size()); ++ai) {
      double cost = 0.0;
      std::vector<int> next = match.vehicles_after;
      if (actions[ai]) {
        TransportPlan plan = plan_rebalancing(match.vehicles_after, targets[ai], sc.pair_costs);
        cost = plan.cost;
        next = targets[ai];
      }
      const double value = match.revenue - cost + solve(t + 1, next);
      if (value > best.value) best = Entry{value, ai, std::move(next)};
    }
    memo[t].emplace(key, best);
    return best.value;
  };

  std::vector<int> start = reset(sc, seed).vehicles;
  OracleResult res;
  res.best_reward = solve(0, start);
  std::vector<int> cur = start;
  for (int t = 0; t < sc.horizon; ++t) {
    const Entry& e = memo[t].at(encode(cur));
    res.best_actions.push_back(actions[e.action]);
    cur = e.next;
  }
  return res;
}

// ---- aggregation ----

struct EvalResult {
  std::string model;     // "gcn-trained", "no_rebalance", ...
  std::string backbone;  // "" for baselines
  int k = 0;             // grid edge length (or max(rows, cols) off-square)
  uint64_t seed = 0;     // training seed (models) or eval root seed (baselines)
  int episodes = 0;
  double reward_mean = 0.0;
  double reward_se = 0.0;
  double served_mean = 0.0;
  double cost_mean = 0.0;
  std::optional<double> dev_pct;
};

inline void write_results_header(std::ostream& os) {
  os << "model,backbone,k,seed,episodes,reward_mean,reward_se,served_mean,cost_mean,dev_pct\n";
}

inline void write_results_row(std::ostream& os, const EvalResult& r) {
  os << r.model << "," << r.backbone << "," << r.k << "," << r.seed << "," << r.episodes << ","
     << fmt_double(r.reward_mean) << "," << fmt_double(r.reward_se) << ","
     << fmt_double(r.served_mean) << "," << fmt_double(r.cost_mean) << ","
     << (r.dev_pct ? fmt_double(*r.dev_pct) : std::string()) << "\n";
}

/// Episode seeds for evaluation: index-derived so runs are reproducible and
/// parallel workers can fill a pre-sized result slot each.
inline uint64_t eval_episode_seed(uint64_t root_seed, int index) {
  return derive_key(derive_key(root_seed, kStreamEval), static_cast<uint64_t>(index));
}

/// Evaluate a policy over `episodes` seeded episodes; optionally measures the
/// per-episode frozen-seed oracle and reports the mean percent deviation.
/// `workers` > 1 runs episodes in parallel; results are merged by episode
/// index so the output never depends on scheduling.
inline EvalResult evaluate(const Scenario& sc, const PolicyFn& policy, const std::string& model,
                           const std::string& backbone, uint64_t seed, int episodes,
                           uint64_t eval_root, bool with_oracle = false, int workers = 1,
                           int oracle_denominator = 4) {
  if (episodes < 1) throw ArgumentError("evaluate: episodes must be >= 1");
  std::vector<EpisodeMetrics> per(episodes);
  auto run_range = [&](int lo, int hi) {
    for (int e = lo; e < hi; ++e)
      per[e] = run_episode(sc, policy, eval_episode_seed(eval_root, e)).metrics;
  };
  if (workers <= 1) {
    run_range(0, episodes);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (episodes + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int lo = w * chunk, hi = std::min(episodes, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  EvalResult res;
  res.model = model;
  res.backbone = backbone;
  res.k = std::max(sc.grid_rows, sc.grid_cols);
  res.seed = seed;
  res.episodes = episodes;
  for (const EpisodeMetrics& m : per) {
    res.reward_mean += m.total_reward;
    res.served_mean += m.demand_served;
    res.cost_mean += m.rebal_cost;
  }
  res.reward_mean /= episodes;
  res.served_mean /= episodes;
  res.cost_mean /= episodes;
  double ss = 0.0;
  for (const EpisodeMetrics& m : per) {
    const double d = m.total_reward - res.reward_mean;
    ss += d * d;
  }
  res.reward_se = episodes > 1 ? std::sqrt(ss / (episodes - 1.0) / episodes) : 0.0;
  if (with_oracle) {
    double oracle_mean = 0.0;
    for (int e = 0; e < episodes; ++e)
      oracle_mean += oracle_search(sc, eval_episode_seed(eval_root, e), oracle_denominator)
                         .best_reward;
    oracle_mean /= episodes;
    if (oracle_mean != 0.0)
      res.dev_pct = 100.0 * (res.reward_mean - oracle_mean) / oracle_mean;
  }
  return res;
}

// ---- scenario families ----

/// Two-station sanity scenario: all demand flows 0 -> 1, so profit hinges on
/// pulling vehicles back to node 0 every step. The demand rate is modest so
/// the fleet has slack — the returns of clairvoyance stay small and a
/// non-anticipating rebalancing policy can sit close to the frozen-seed
/// oracle.
inline Scenario make_sanity_scenario(double rate = 0.5) {
  Scenario sc;
  sc.grid_rows = 1;
  sc.grid_cols = 2;
  sc.base_cost = 1.0;
  sc.fleet_size = 4;
  sc.horizon = 10;
  sc.price_per_trip = 10.0;
  sc.demand.base_rate = 0.0;
  sc.demand.rate_overrides = {{0, 1, rate}};
  sc.build();
  return sc;
}

/// Commuter-pulse city at grid size k: morning flow into the center region,
/// evening flow back out. Fleet and demand scale with the node count so the
/// same policy transfers across k.
inline Scenario make_pulse_scenario(int k) {
  if (k < 2) throw ArgumentError("make_pulse_scenario: k must be >= 2");
  Scenario sc;
  sc.grid_rows = k;
  sc.grid_cols = k;
  sc.base_cost = 1.0;
  // One vehicle per zone and a per-edge rate low enough that the fleet is
  // scarce: placement decides what gets served, so rebalancing carries value
  // instead of every policy saturating identically.
  sc.fleet_size = k * k;
  sc.horizon = 20;
  sc.price_per_trip = 10.0;
  sc.demand.base_rate = 0.15;
  sc.demand.profile = DemandProfile::kPulse;
  sc.demand.pulse.strength = 3.0;
  sc.build();
  return sc;
}

/// Zero-shot granularity sweep: evaluate the same weights on every k.
struct SweepRow {
  int k = 0;
  std::string backbone;
  double reward = 0.0;
  double served = 0.0;
  double cost = 0.0;
};

inline void write_sweep_header(std::ostream& os) { os << "k,backbone,reward,served,cost\n"; }

inline void write_sweep_row(std::ostream& os, const SweepRow& r) {
  os << r.k << "," << r.backbone << "," << fmt_double(r.reward) << "," << fmt_double(r.served)
     << "," << fmt_double(r.cost) << "\n";
}

inline std::vector<SweepRow> sweep_granularity(PolicyStack& stack, const std::vector<int>& k_list,
                                               int episodes, uint64_t eval_root, int workers = 1) {
  std::vector<SweepRow> rows;
  const ProGnnState trained_state = stack.prognn_state;
  for (int k : k_list) {
    if (k < 2) throw ConfigError("sweep: grid size must be >= 2, got " + std::to_string(k));
    Scenario sc = make_pulse_scenario(k);
    // Re-bind graph-shaped state (Pro-GNN's S is n-by-n) to the current grid so
    // the same weights transfer zero-shot across scales. The refined S learned
    // at the training scale is kept whenever that scale comes up again.
    if (trained_state.S.rows == sc.n())
      stack.prognn_state = trained_state;
    else
      stack.attach_graph(sc.graph);
    PolicyFn policy = make_stack_policy(stack, /*stochastic=*/false, stack.cfg.ptd_tau_end);
    EvalResult r = evaluate(sc, policy, backbone_name(stack.cfg.backbone) + "-trained",
                            backbone_name(stack.cfg.backbone), eval_root, episodes, eval_root,
                            /*with_oracle=*/false, workers);
    SweepRow row;
    row.k = k;
    row.backbone = backbone_name(stack.cfg.backbone);
    row.reward = r.reward_mean;
    row.served = r.served_mean;
    row.cost = r.cost_mean;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace amodrl
