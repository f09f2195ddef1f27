#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "amodrl/special.hpp"

using namespace amodrl;

TEST_CASE("log_gamma against the standard library", "[special]") {
  for (double x : {0.01, 0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 9.99, 10.0, 25.0, 123.4}) {
    REQUIRE(log_gamma(x) == Catch::Approx(std::lgamma(x)).margin(1e-10));
  }
  REQUIRE(log_gamma(1.0) == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(log_gamma(5.0) == Catch::Approx(std::log(24.0)).margin(1e-12));
}

TEST_CASE("digamma known values", "[special]") {
  const double euler = 0.57721566490153286;
  REQUIRE(digamma(1.0) == Catch::Approx(-euler).margin(1e-12));
  // psi(2) = 1 - euler; psi(1/2) = -euler - 2 log 2
  REQUIRE(digamma(2.0) == Catch::Approx(1.0 - euler).margin(1e-12));
  REQUIRE(digamma(0.5) == Catch::Approx(-euler - 2.0 * std::log(2.0)).margin(1e-12));
}

TEST_CASE("digamma is the derivative of log_gamma", "[special]") {
  for (double x : {0.3, 1.1, 2.5, 7.0, 40.0}) {
    const double h = 1e-6;
    const double fd = (log_gamma(x + h) - log_gamma(x - h)) / (2.0 * h);
    REQUIRE(digamma(x) == Catch::Approx(fd).margin(1e-7));
  }
}

TEST_CASE("trigamma known values and derivative relation", "[special]") {
  const double pi = 3.14159265358979323846;
  REQUIRE(trigamma(1.0) == Catch::Approx(pi * pi / 6.0).margin(1e-12));
  REQUIRE(trigamma(0.5) == Catch::Approx(pi * pi / 2.0).margin(1e-10));
  for (double x : {0.4, 1.3, 3.3, 15.0}) {
    const double h = 1e-6;
    const double fd = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
    REQUIRE(trigamma(x) == Catch::Approx(fd).margin(1e-6));
  }
}

TEST_CASE("recurrence consistency", "[special]") {
  // Gamma(x+1) = x Gamma(x); psi(x+1) = psi(x) + 1/x.
  for (double x : {0.2, 0.9, 3.4}) {
    REQUIRE(log_gamma(x + 1.0) == Catch::Approx(log_gamma(x) + std::log(x)).margin(1e-12));
    REQUIRE(digamma(x + 1.0) == Catch::Approx(digamma(x) + 1.0 / x).margin(1e-12));
    REQUIRE(trigamma(x + 1.0) == Catch::Approx(trigamma(x) - 1.0 / (x * x)).margin(1e-10));
  }
}

TEST_CASE("domain errors for non-positive arguments", "[special]") {
  REQUIRE_THROWS_AS(log_gamma(0.0), DomainError);
  REQUIRE_THROWS_AS(log_gamma(-1.5), DomainError);
  REQUIRE_THROWS_AS(digamma(0.0), DomainError);
  REQUIRE_THROWS_AS(trigamma(-0.1), DomainError);
}
