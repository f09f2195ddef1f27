#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "amodrl/errors.hpp"

namespace amodrl {

// Counter-based randomness. A stream is (key, counter); the i-th output is
// mix64(key + i * GAMMA), i.e. the splitmix64 sequence seeded at `key`.
// Streams with distinct keys are independent, so draws can be made in any
// order across streams and still reproduce bit-for-bit.
//
// Key derivation: every consumer derives its key from the one 64-bit root
// seed by folding stream-id components (see StreamId below), never by
// sharing a mutable generator.

inline constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline uint64_t derive_key(uint64_t key, uint64_t component) {
  return mix64((key ^ mix64(component + kGolden)) + kGolden);
}

inline uint64_t derive_key(uint64_t key, std::initializer_list<uint64_t> components) {
  for (uint64_t c : components) key = derive_key(key, c);
  return key;
}

/// Fixed stream-id components, folded after the root/episode seed.
enum StreamId : uint64_t {
  kStreamDemand = 1,
  kStreamAction = 2,
  kStreamEdgeNoise = 3,
  kStreamInit = 4,
  kStreamEval = 5,
  kStreamEpisode = 6,
  kStreamBaseline = 7,
};

class StreamRng {
 public:
  explicit StreamRng(uint64_t key) : key_(key) {}
  StreamRng(uint64_t key, std::initializer_list<uint64_t> components)
      : key_(derive_key(key, components)) {}

  uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1); safe under log().
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  /// Integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  /// Gumbel(0, 1).
  double gumbel() { return -std::log(-std::log(uniform_open())); }

  /// Poisson(lambda), exact: chunked Knuth product-of-uniforms. Splitting a
  /// large rate into chunks keeps exp(-lambda) well away from underflow while
  /// staying exactly Poisson in distribution.
  long poisson(double lambda) {
    if (lambda < 0.0) throw ArgumentError("poisson: negative rate");
    long total = 0;
    while (lambda > 16.0) {
      total += poisson_knuth(16.0);
      lambda -= 16.0;
    }
    return total + poisson_knuth(lambda);
  }

  /// Gamma(shape, 1) by Marsaglia-Tsang; shape >= 1 handled directly,
  /// shape < 1 via the boost Gamma(a+1) * U^(1/a).
  double gamma(double shape) {
    if (shape <= 0.0) throw ArgumentError("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform_open();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
      const double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }

 private:
  long poisson_knuth(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    double p = 1.0;
    long k = 0;
    do {
      ++k;
      p *= uniform_open();
    } while (p > limit);
    return k - 1;
  }

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace amodrl
