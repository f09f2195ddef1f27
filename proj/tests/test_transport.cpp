#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "amodrl/rng.hpp"
#include "amodrl/transport.hpp"

#include "helpers.hpp"

using namespace amodrl;

namespace {

/// Exhaustive minimum over all nonnegative integer flow matrices with the
/// given row sums (surplus) and column sums (deficit).
double brute_force_min_cost(const std::vector<int>& surplus, const std::vector<int>& deficit,
                            const Tensor& cost) {
  const int n = static_cast<int>(surplus.size());
  double best = HUGE_VAL;
  std::vector<int> row(surplus), col(deficit);
  std::function<void(int, double)> rec = [&](int cell, double acc) {
    if (acc >= best) return;
    if (cell == n * n) {
      for (int i = 0; i < n; ++i)
        if (row[i] != 0 || col[i] != 0) return;
      best = acc;
      return;
    }
    const int i = cell / n, j = cell % n;
    const int cap = std::min(row[i], col[j]);
    for (int f = 0; f <= cap; ++f) {
      row[i] -= f;
      col[j] -= f;
      rec(cell + 1, acc + f * cost(i, j));
      row[i] += f;
      col[j] += f;
    }
  };
  rec(0, 0.0);
  return best;
}

void check_plan_consistency(const TransportPlan& plan, const std::vector<int>& surplus,
                            const std::vector<int>& deficit, const Tensor& cost) {
  const int n = static_cast<int>(surplus.size());
  double recomputed = 0.0;
  for (int i = 0; i < n; ++i) {
    double out = 0.0, in = 0.0;
    for (int j = 0; j < n; ++j) {
      const double f = plan.flow(i, j);
      REQUIRE(f >= 0.0);
      REQUIRE(f == std::floor(f));  // integer flows
      out += f;
      in += plan.flow(j, i);
      recomputed += f * cost(i, j);
    }
    REQUIRE(out == static_cast<double>(surplus[i]));
    REQUIRE(in == static_cast<double>(deficit[i]));
  }
  REQUIRE(plan.cost == Catch::Approx(recomputed).margin(1e-9));
  // The move list mirrors the positive flow entries.
  Tensor from_moves = Tensor::zeros(n, n);
  for (auto [i, j, c] : plan.moves) {
    REQUIRE(c > 0);
    from_moves(i, j) += c;
  }
  REQUIRE(from_moves.data == plan.flow.data);
}

}  // namespace

TEST_CASE("largest-remainder apportionment hand values", "[transport]") {
  SECTION("uniform shares, divisible total") {
    REQUIRE(round_largest_remainder({1, 1, 1, 1}, 8) == std::vector<int>{2, 2, 2, 2});
  }
  SECTION("uniform shares, remainder goes to the lowest index") {
    REQUIRE(round_largest_remainder({1, 1, 1, 1}, 5) == std::vector<int>{2, 1, 1, 1});
  }
  SECTION("two ties, two leftovers") {
    REQUIRE(round_largest_remainder({1, 1, 1, 1}, 6) == std::vector<int>{2, 2, 1, 1});
  }
  SECTION("proportional split") {
    REQUIRE(round_largest_remainder({0.7, 0.3}, 10) == std::vector<int>{7, 3});
  }
  SECTION("zero share stays zero") {
    REQUIRE(round_largest_remainder({0.0, 1.0}, 3) == std::vector<int>{0, 3});
  }
  SECTION("unnormalized shares are rescaled") {
    REQUIRE(round_largest_remainder({2.0, 2.0}, 4) == std::vector<int>{2, 2});
  }
  SECTION("zero total") {
    REQUIRE(round_largest_remainder({1.0, 1.0}, 0) == std::vector<int>{0, 0});
  }
}

TEST_CASE("apportionment always sums to the requested total", "[transport]") {
  StreamRng rng(derive_key(11, 1));
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 6.0);
    const int total = static_cast<int>(rng.uniform() * 20.0);
    std::vector<double> shares(n);
    for (double& s : shares) s = rng.uniform();
    shares[0] += 1e-9;  // guard against an all-zero draw
    auto out = round_largest_remainder(shares, total);
    REQUIRE(std::accumulate(out.begin(), out.end(), 0) == total);
    for (size_t i = 0; i < out.size(); ++i) {
      // Largest-remainder apportionments never stray more than one unit
      // from the exact quota.
      const double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
      const double quota = shares[i] / sum * total;
      REQUIRE(std::abs(out[i] - quota) < 1.0 + 1e-9);
    }
  }
}

TEST_CASE("apportionment input validation", "[transport]") {
  REQUIRE_THROWS_AS(round_largest_remainder({}, 3), ArgumentError);
  REQUIRE_THROWS_AS(round_largest_remainder({1.0}, -1), ArgumentError);
  REQUIRE_THROWS_AS(round_largest_remainder({-0.5, 1.0}, 3), ArgumentError);
  REQUIRE_THROWS_AS(round_largest_remainder({0.0, 0.0}, 3), DegenerateError);
}

TEST_CASE("transportation hand example: five vehicles across one edge", "[transport]") {
  Tensor cost = Tensor::zeros(2, 2);
  cost(0, 1) = cost(1, 0) = 1.0;
  TransportPlan plan = solve_transportation({5, 0}, {0, 5}, cost);
  REQUIRE(plan.flow(0, 1) == 5.0);
  REQUIRE(plan.cost == 5.0);
  REQUIRE(plan.moves.size() == 1);
  check_plan_consistency(plan, {5, 0}, {0, 5}, cost);
}

TEST_CASE("zero surplus yields an empty plan", "[transport]") {
  Tensor cost = Tensor::zeros(2, 2);
  TransportPlan plan = solve_transportation({0, 0}, {0, 0}, cost);
  REQUIRE(plan.cost == 0.0);
  REQUIRE(plan.moves.empty());
  REQUIRE(max_abs(plan.flow) == 0.0);
}

TEST_CASE("cheaper route wins", "[transport]") {
  // Two surplus nodes, one deficit node; node 1 is closer.
  Tensor cost(3, 3, 0.0);
  cost(0, 2) = 4.0;
  cost(1, 2) = 1.0;
  TransportPlan plan = solve_transportation({1, 1, 0}, {0, 0, 2}, cost);
  REQUIRE(plan.cost == Catch::Approx(5.0).margin(1e-12));
  check_plan_consistency(plan, {1, 1, 0}, {0, 0, 2}, cost);
}

TEST_CASE("transportation input validation", "[transport]") {
  Tensor cost = Tensor::zeros(2, 2);
  REQUIRE_THROWS_AS(solve_transportation({1, 0}, {0, 2}, cost), ArgumentError);
  REQUIRE_THROWS_AS(solve_transportation({-1, 1}, {0, 0}, cost), ArgumentError);
  REQUIRE_THROWS_AS(solve_transportation({1}, {0, 1}, cost), DimensionError);
}

TEST_CASE("solver matches exhaustive enumeration on all tiny disjoint instances",
          "[transport]") {
  // Every surplus/deficit pair on 3 nodes with disjoint support and at most
  // 4 vehicles, against a fixed asymmetric cost matrix.
  Tensor cost(3, 3, 0.0);
  cost(0, 1) = 1.0;
  cost(1, 0) = 1.0;
  cost(0, 2) = 2.5;
  cost(2, 0) = 2.5;
  cost(1, 2) = 1.5;
  cost(2, 1) = 1.5;
  int checked = 0;
  auto enumerate = [&](auto&& self, std::vector<int>& v, int idx, int remaining,
                       auto&& consume) -> void {
    if (idx == 3) {
      if (remaining == 0) consume(v);
      return;
    }
    for (int x = 0; x <= remaining; ++x) {
      v[idx] = x;
      self(self, v, idx + 1, remaining - x, consume);
    }
    v[idx] = 0;
  };
  for (int total = 1; total <= 4; ++total) {
    std::vector<int> s(3, 0), d(3, 0);
    enumerate(enumerate, s, 0, total, [&](const std::vector<int>& sv) {
      enumerate(enumerate, d, 0, total, [&](const std::vector<int>& dv) {
        for (int i = 0; i < 3; ++i)
          if (sv[i] > 0 && dv[i] > 0) return;  // overlapping support not used by the env
        TransportPlan plan = solve_transportation(sv, dv, cost);
        check_plan_consistency(plan, sv, dv, cost);
        REQUIRE(plan.cost == Catch::Approx(brute_force_min_cost(sv, dv, cost)).margin(1e-9));
        ++checked;
      });
    });
  }
  // Disjoint-support pairs on 3 nodes summing to T: 6, 12, 18, 24 for T=1..4.
  REQUIRE(checked == 60);
}

TEST_CASE("solver matches enumeration on random costs up to six vehicles", "[transport]") {
  StreamRng rng(derive_key(11, 2));
  for (int trial = 0; trial < 60; ++trial) {
    CAPTURE(trial);
    Tensor cost(3, 3, 0.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) cost(i, j) = 0.1 + 2.9 * rng.uniform();
    const int total = 1 + static_cast<int>(rng.uniform() * 6.0);
    std::vector<int> roles(3);
    for (int& r : roles) r = rng.uniform() < 0.5 ? 0 : 1;
    roles[0] = 0;
    roles[1] = 1;  // guarantee at least one surplus and one deficit node
    std::vector<double> share_s, share_d;
    for (int i = 0; i < 3; ++i) {
      share_s.push_back(roles[i] == 0 ? rng.uniform() + 0.01 : 0.0);
      share_d.push_back(roles[i] == 1 ? rng.uniform() + 0.01 : 0.0);
    }
    const std::vector<int> sv = round_largest_remainder(share_s, total);
    const std::vector<int> dv = round_largest_remainder(share_d, total);
    TransportPlan plan = solve_transportation(sv, dv, cost);
    check_plan_consistency(plan, sv, dv, cost);
    REQUIRE(plan.cost == Catch::Approx(brute_force_min_cost(sv, dv, cost)).margin(1e-9));
  }
}
