#pragma once

#include <algorithm>
#include <cmath>

#include "amodrl/errors.hpp"
#include "amodrl/svd.hpp"
#include "amodrl/tensor.hpp"

namespace amodrl {

/// Hyperparameters of the adjacency-refinement backbone: the refined matrix S
/// tracks A under an L1 (sparsity) and nuclear-norm (low-rank) penalty,
/// updated by proximal gradient steps between policy updates.
struct ProGnnConfig {
  double alpha = 0.01;        // L1 weight
  double beta = 0.01;         // nuclear-norm weight
  double eta = 0.01;          // proximal step size
  int tau_s = 1;              // S-steps per outer iteration (0 disables refinement)
  bool allow_fill_in = false; // keep S supported on A's edges only
  bool joint_task_gradient = true;  // include the policy-loss gradient in the S step

  void validate() const {
    if (alpha < 0.0 || beta < 0.0) throw ArgumentError("prognn: penalty weights must be >= 0");
    if (!(eta > 0.0)) throw ArgumentError("prognn: step size must be positive");
    if (tau_s < 0) throw ArgumentError("prognn: tau_s must be >= 0");
  }
};

/// The refined adjacency plus bookkeeping flags.
struct ProGnnState {
  Tensor S;
  bool degeneracy_floored = false;  // set when the all-zero floor kicked in
  long long refine_steps = 0;
};

inline ProGnnState prognn_init(const Tensor& a) {
  if (a.rows != a.cols) throw DimensionError("prognn_init: adjacency must be square");
  ProGnnState st;
  st.S = a;
  return st;
}

/// Elementwise soft threshold sign(s) * max(|s| - thresh, 0); the proximal
/// operator of thresh * ||.||_1.
inline Tensor soft_threshold(const Tensor& s, double thresh) {
  if (thresh < 0.0) throw ArgumentError("soft_threshold: negative threshold");
  Tensor out = s;
  for (double& v : out.data) {
    const double mag = std::abs(v) - thresh;
    v = mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

/// Proximal operator of thresh * ||.||_*: shrink every singular value by
/// thresh (dropping those that hit zero) and reconstruct.
inline Tensor nuclear_prox(const Tensor& s, double thresh) {
  if (thresh < 0.0) throw ArgumentError("nuclear_prox: negative threshold");
  if (thresh == 0.0) return s;  // identity prox; avoids SVD round-off
  SvdResult svd = svd_jacobi(s);
  for (double& sv : svd.sigma) sv = std::max(sv - thresh, 0.0);
  return svd.reconstruct();
}

/// Combined structural prox used by one refine step: L1 first, then nuclear.
inline Tensor prognn_prox(const Tensor& s, double l1_thresh, double nuclear_thresh) {
  return nuclear_prox(soft_threshold(s, l1_thresh), nuclear_thresh);
}

inline double nuclear_norm(const Tensor& s) {
  SvdResult svd = svd_jacobi(s);
  double total = 0.0;
  for (double sv : svd.sigma) total += sv;
  return total;
}

/// One proximal-gradient update of S:
///   1. gradient step on ||A - S||_F^2 (plus the task gradient when given),
///   2. soft threshold by alpha*eta,
///   3. nuclear prox by beta*eta,
///   4. symmetrize,
///   5. clamp to [0,1], zero the diagonal,
/// then (unless allow_fill_in) restrict support to A's edges, and floor an
/// all-zero collapse back to 0.05*A with the degeneracy flag set.
inline void prognn_refine_step(const Tensor& a, ProGnnState& st, const ProGnnConfig& cfg,
                               const Tensor* task_gradient = nullptr) {
  cfg.validate();
  if (a.rows != a.cols || st.S.rows != a.rows || st.S.cols != a.cols)
    throw DimensionError("prognn_refine_step: shape mismatch between A and S");
  if (task_gradient && (task_gradient->rows != a.rows || task_gradient->cols != a.cols))
    throw DimensionError("prognn_refine_step: task gradient shape mismatch");
  if (!is_symmetric(a, 1e-12)) throw ArgumentError("prognn_refine_step: A must be symmetric");

  const int n = a.rows;
  Tensor s = st.S;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double g = 2.0 * (s(i, j) - a(i, j));
      if (task_gradient) g += (*task_gradient)(i, j);
      s(i, j) -= cfg.eta * g;
    }
  s = prognn_prox(s, cfg.alpha * cfg.eta, cfg.beta * cfg.eta);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double sym = 0.5 * (s(i, j) + s(j, i));
      s(i, j) = s(j, i) = sym;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      s(i, j) = std::clamp(s(i, j), 0.0, 1.0);
      if (i == j) s(i, j) = 0.0;
      if (!cfg.allow_fill_in && a(i, j) == 0.0) s(i, j) = 0.0;
    }
  st.degeneracy_floored = max_abs(s) == 0.0;
  if (st.degeneracy_floored)
    for (size_t i = 0; i < s.size(); ++i) s.data[i] = std::max(s.data[i], 0.05 * a.data[i]);
  st.S = std::move(s);
  st.refine_steps += 1;
}

}  // namespace amodrl
