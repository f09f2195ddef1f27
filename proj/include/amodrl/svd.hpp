#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "amodrl/errors.hpp"
#include "amodrl/tensor.hpp"

namespace amodrl {

/// M = U * diag(sigma) * V^T with sigma sorted descending. Columns of U
/// belonging to (numerically) zero singular values are left as zero vectors;
/// V is orthogonal by construction.
struct SvdResult {
  Tensor U;
  std::vector<double> sigma;
  Tensor V;

  Tensor reconstruct() const {
    const int m = U.rows, n = V.rows;
    Tensor out(m, n, 0.0);
    const int r = static_cast<int>(sigma.size());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < r; ++k) s += U(i, k) * sigma[k] * V(j, k);
        out(i, j) = s;
      }
    return out;
  }
};

/// One-sided Jacobi SVD: rotates column pairs of a working copy until every
/// pair is orthogonal to within `tol` (relative to the column norms), then
/// reads singular values off the column norms. Deterministic cyclic pair
/// order, so repeated runs agree exactly. Columns whose norm falls below a
/// tiny fraction of the Frobenius norm are numerically zero (null-space
/// directions): their inner products are pure rotation round-off, so they are
/// excluded from the convergence criterion and reported as zero singular
/// values — otherwise rank-deficient inputs (e.g. grid adjacencies) cycle
/// forever on noise.
inline SvdResult svd_jacobi(const Tensor& a, double tol = 1e-10, int max_sweeps = 100) {
  if (a.rows < 1 || a.cols < 1) throw DimensionError("svd_jacobi: empty matrix");
  if (!a.all_finite()) throw NumericError("svd_jacobi: non-finite input");
  const int m = a.rows, n = a.cols;
  Tensor b = a;                     // columns get orthogonalized in place
  Tensor v = Tensor::identity(n);   // accumulates the right rotations

  auto col_dot = [&](const Tensor& t, int p, int q) {
    double s = 0.0;
    for (int i = 0; i < t.rows; ++i) s += t(i, p) * t(i, q);
    return s;
  };
  auto rotate_cols = [](Tensor& t, int p, int q, double c, double s) {
    for (int i = 0; i < t.rows; ++i) {
      const double tp = t(i, p), tq = t(i, q);
      t(i, p) = c * tp + s * tq;
      t(i, q) = -s * tp + c * tq;
    }
  };

  // Frobenius norm is invariant under the right rotations, so this floor is
  // computed once. 1e-14 relative sits well above rotation round-off (~1e-16)
  // and well below anything resolvable as a genuine singular value.
  double f2 = 0.0;
  for (int j = 0; j < n; ++j) f2 += col_dot(b, j, j);
  const double floor2 = 1e-28 * f2;

  bool converged = false;
  int sweeps = 0;
  for (; sweeps < max_sweeps && !converged; ++sweeps) {
    converged = true;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = col_dot(b, p, q);
        const double app = col_dot(b, p, p);
        const double aqq = col_dot(b, q, q);
        if (app <= floor2 || aqq <= floor2) continue;  // numerically zero column
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
        converged = false;
        // Jacobi rotation zeroing the (p,q) inner product; with the
        // column update (bp, bq) <- (c*bp + s*bq, -s*bp + c*bq) the
        // annihilating tangent solves t^2 + 2*zeta*t - 1 = 0 for
        // zeta = (app - aqq) / (2*apq).
        const double zeta = (app - aqq) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_cols(b, p, q, c, s);
        rotate_cols(v, p, q, c, s);
      }
  }
  if (!converged)
    throw NumericError("svd_jacobi: no convergence after " + std::to_string(max_sweeps) +
                       " sweeps");

  SvdResult out;
  out.sigma.resize(n);
  out.U = Tensor::zeros(m, n);
  out.V = v;
  for (int j = 0; j < n; ++j) {
    const double norm2 = col_dot(b, j, j);
    if (norm2 <= floor2) continue;  // sigma stays 0, U column stays zero
    out.sigma[j] = std::sqrt(norm2);
    for (int i = 0; i < m; ++i) out.U(i, j) = b(i, j) / out.sigma[j];
  }
  // Sort descending by singular value; stable on ties so runs stay identical.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return out.sigma[x] > out.sigma[y]; });
  SvdResult sorted;
  sorted.sigma.resize(n);
  sorted.U = Tensor::zeros(m, n);
  sorted.V = Tensor::zeros(n, n);
  for (int j = 0; j < n; ++j) {
    sorted.sigma[j] = out.sigma[order[j]];
    for (int i = 0; i < m; ++i) sorted.U(i, j) = out.U(i, order[j]);
    for (int i = 0; i < n; ++i) sorted.V(i, j) = out.V(i, order[j]);
  }
  return sorted;
}

}  // namespace amodrl
