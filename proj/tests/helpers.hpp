#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "amodrl/rng.hpp"
#include "amodrl/tensor.hpp"

namespace testutil {

inline amodrl::Tensor random_tensor(int rows, int cols, amodrl::StreamRng& rng, double lo = -1.0,
                                    double hi = 1.0) {
  amodrl::Tensor t = amodrl::Tensor::zeros(rows, cols);
  for (double& v : t.data) v = lo + (hi - lo) * rng.uniform();
  return t;
}

inline amodrl::Tensor random_symmetric(int n, amodrl::StreamRng& rng, double lo = -1.0,
                                       double hi = 1.0) {
  amodrl::Tensor t = random_tensor(n, n, rng, lo, hi);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) t(j, i) = t(i, j);
  return t;
}

/// Unique fresh directory under the system temp root, removed by the caller if
/// it cares; contents are tiny.
inline std::filesystem::path fresh_dir(const std::string& stem) {
  static int counter = 0;
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() /
      (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(path);
  return path;
}

}  // namespace testutil
