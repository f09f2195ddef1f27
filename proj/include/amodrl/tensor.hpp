#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "amodrl/errors.hpp"

namespace amodrl {

/// Dense row-major fp64 matrix. Every numeric object in the library (node
/// features, weights, adjacency, gradients) is one of these; vectors are
/// n-by-1 or 1-by-n, scalars 1-by-1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw DimensionError("negative tensor dimension");
  }
  Tensor(int r, int c, std::initializer_list<double> vals) : rows(r), cols(c), data(vals) {
    if (static_cast<size_t>(r) * c != data.size())
      throw DimensionError("initializer size does not match shape " + shape_str());
  }

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const {
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c, 0.0); }
  static Tensor ones(int r, int c) { return Tensor(r, c, 1.0); }
  static Tensor identity(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

// ---- plain (untaped) dense helpers -----------------------------------------

/// C = A * B with the canonical i-k-j loop. Both the tape op and every plain
/// caller go through this one routine so forward values are bitwise identical
/// no matter which path computes them.
inline Tensor matmul_plain(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows)
    throw DimensionError("matmul: inner dimensions disagree, " + a.shape_str() + " * " +
                         b.shape_str());
  Tensor c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
    double* crow = &c.data[static_cast<size_t>(i) * c.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

inline Tensor transpose_plain(const Tensor& a) {
  Tensor t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline Tensor add_plain(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
  return c;
}

inline Tensor sub_plain(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

inline Tensor mul_plain(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

inline Tensor scale_plain(const Tensor& a, double s) {
  Tensor c = a;
  for (double& v : c.data) v *= s;
  return c;
}

inline double frob_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

inline double l1_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += std::abs(v);
  return s;
}

inline double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

inline bool is_symmetric(const Tensor& a, double tol = 1e-12) {
  if (a.rows != a.cols) return false;
  for (int i = 0; i < a.rows; ++i)
    for (int j = i + 1; j < a.cols; ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol) return false;
  return true;
}

}  // namespace amodrl
