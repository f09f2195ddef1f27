#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "amodrl/rng.hpp"

using namespace amodrl;

TEST_CASE("streams reproduce bit-for-bit from the key", "[rng]") {
  StreamRng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct keys give distinct streams", "[rng]") {
  StreamRng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += a.next_u64() == b.next_u64();
  REQUIRE(equal == 0);
}

TEST_CASE("derive_key folds components order-sensitively", "[rng]") {
  REQUIRE(derive_key(7, 1) != derive_key(7, 2));
  REQUIRE(derive_key(derive_key(7, 1), 2) != derive_key(derive_key(7, 2), 1));
  REQUIRE(derive_key(7, {1, 2}) == derive_key(derive_key(7, 1), 2));
}

TEST_CASE("stream draws are independent of interleaving order", "[rng]") {
  // Two consumers with derived keys: whether they draw alternately or in
  // blocks must not change either sequence.
  const uint64_t k1 = derive_key(99, kStreamDemand), k2 = derive_key(99, kStreamAction);
  std::vector<uint64_t> block1, block2, inter1, inter2;
  {
    StreamRng r1(k1), r2(k2);
    for (int i = 0; i < 10; ++i) block1.push_back(r1.next_u64());
    for (int i = 0; i < 10; ++i) block2.push_back(r2.next_u64());
  }
  {
    StreamRng r1(k1), r2(k2);
    for (int i = 0; i < 10; ++i) {
      inter1.push_back(r1.next_u64());
      inter2.push_back(r2.next_u64());
    }
  }
  REQUIRE(block1 == inter1);
  REQUIRE(block2 == inter2);
}

TEST_CASE("uniform stays in [0,1) and uniform_open in (0,1)", "[rng]") {
  StreamRng r(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double v = r.uniform_open();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("uniform mean and variance", "[rng]") {
  StreamRng r(17);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n, var = sq / n - mean * mean;
  REQUIRE(mean == Catch::Approx(0.5).margin(0.005));
  REQUIRE(var == Catch::Approx(1.0 / 12.0).margin(0.002));
}

TEST_CASE("poisson matches closed-form pmf at small rate", "[rng]") {
  StreamRng r(23);
  const double lambda = 1.5;
  const int n = 200000;
  std::map<long, int> hist;
  for (int i = 0; i < n; ++i) hist[r.poisson(lambda)] += 1;
  double fact = 1.0;
  for (long k = 0; k <= 5; ++k) {
    if (k > 0) fact *= k;
    const double pmf = std::exp(-lambda) * std::pow(lambda, k) / fact;
    REQUIRE(static_cast<double>(hist[k]) / n == Catch::Approx(pmf).margin(0.005));
  }
}

TEST_CASE("poisson chunking keeps mean and variance at large rate", "[rng]") {
  StreamRng r(29);
  const double lambda = 40.0;  // forces the 16-per-chunk path
  const int n = 50000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(r.poisson(lambda));
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n, var = sq / n - mean * mean;
  REQUIRE(mean == Catch::Approx(lambda).epsilon(0.01));
  REQUIRE(var == Catch::Approx(lambda).epsilon(0.05));
}

TEST_CASE("poisson rejects negative rate and handles zero", "[rng]") {
  StreamRng r(1);
  REQUIRE_THROWS_AS(r.poisson(-0.5), ArgumentError);
  for (int i = 0; i < 10; ++i) REQUIRE(r.poisson(0.0) == 0);
}

TEST_CASE("gamma sample moments", "[rng]") {
  StreamRng r(31);
  for (double shape : {0.5, 1.0, 3.5}) {
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = r.gamma(shape);
      sum += x;
      sq += x * x;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    REQUIRE(mean == Catch::Approx(shape).epsilon(0.02));
    REQUIRE(var == Catch::Approx(shape).epsilon(0.05));
  }
  REQUIRE_THROWS_AS(r.gamma(0.0), ArgumentError);
}

TEST_CASE("normal sample moments", "[rng]") {
  StreamRng r(37);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  REQUIRE(sum / n == Catch::Approx(0.0).margin(0.01));
  REQUIRE(sq / n == Catch::Approx(1.0).epsilon(0.02));
}

TEST_CASE("gumbel sample mean is the Euler-Mascheroni constant", "[rng]") {
  StreamRng r(41);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += r.gumbel();
  REQUIRE(sum / n == Catch::Approx(0.5772156649).margin(0.02));
}
