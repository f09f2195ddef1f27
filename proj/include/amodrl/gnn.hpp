#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "amodrl/errors.hpp"
#include "amodrl/graph.hpp"
#include "amodrl/tape.hpp"
#include "amodrl/tensor.hpp"

namespace amodrl {

/// On-tape P = Dhat^{-1/2} (W + I) Dhat^{-1/2}, differentiable w.r.t. W.
/// Mirrors the plain normalize_adjacency() expression term for term
/// (same summation order, same 1/sqrt), so a constant input produces a
/// bit-identical propagation matrix.
inline Var normalize_adjacency_tape(Tape& t, Var w) {
  const Tensor& wv = t.value(w);
  if (wv.rows != wv.cols) throw DimensionError("normalize_adjacency_tape: matrix must be square");
  const int n = wv.rows;
  Var ahat = t.add(w, t.constant(Tensor::identity(n)));
  Var deg = t.matmul(ahat, t.constant(Tensor::ones(n, 1)));  // row sums
  Var r = t.rsqrt(deg);                                      // n x 1
  Var outer = t.matmul(r, t.transpose(r));                   // r_i * r_j
  return t.mul(ahat, outer);
}

/// Single graph-convolution layer: relu(P X W).
struct GcnLayer {
  Parameter W;

  GcnLayer() = default;
  GcnLayer(std::string name, int d_in, int d_out)
      : W(std::move(name) + ".W", Tensor::zeros(d_in, d_out)) {}

  std::vector<Parameter*> params() { return {&W}; }

  /// p: n-by-n propagation matrix (constant or differentiable), x: n-by-d_in.
  Var forward(Tape& t, Var p, Var x) {
    const Tensor& xv = t.value(x);
    if (xv.cols != W.value.rows)
      throw DimensionError("gcn_forward: features have " + std::to_string(xv.cols) +
                           " columns, weight expects " + std::to_string(W.value.rows));
    return t.relu(t.matmul(t.matmul(p, x), t.param(W)));
  }
};

/// Multi-head graph attention layer. Per head k:
///   e_ij = LeakyReLU(a_k^T [W_k h_i || W_k h_j])   for j in N(i) + self,
///   alpha = masked row softmax(e),
///   out   = relu((1/K) sum_k alpha_k (X W_k)).
/// The 2*d_out attention vector is stored whole; its halves are split with
/// constant selection matrices so the gradient reaches both.
struct GatLayer {
  int heads = 1;
  int d_in = 0;
  int d_out = 0;
  double leaky_slope = 0.2;
  std::vector<Parameter> W;  // per head, d_in x d_out
  std::vector<Parameter> a;  // per head, 2*d_out x 1

  GatLayer() = default;
  GatLayer(const std::string& name, int d_in_, int d_out_, int heads_)
      : heads(heads_), d_in(d_in_), d_out(d_out_) {
    if (heads < 1) throw ArgumentError("gat: head count must be >= 1");
    W.reserve(heads);
    a.reserve(heads);
    for (int k = 0; k < heads; ++k) {
      const std::string h = name + ".h" + std::to_string(k);
      W.emplace_back(h + ".W", Tensor::zeros(d_in, d_out));
      a.emplace_back(h + ".a", Tensor::zeros(2 * d_out, 1));
    }
  }

  std::vector<Parameter*> params() {
    std::vector<Parameter*> out;
    for (int k = 0; k < heads; ++k) {
      out.push_back(&W[k]);
      out.push_back(&a[k]);
    }
    return out;
  }

  /// Optional `attention_out` receives the K row-stochastic attention
  /// matrices of this forward pass.
  Var forward(Tape& t, const Graph& g, Var x, std::vector<Tensor>* attention_out = nullptr) {
    const Tensor& xv = t.value(x);
    if (xv.rows != g.n || xv.cols != d_in)
      throw DimensionError("gat_forward: features " + xv.shape_str() + ", expected " +
                           std::to_string(g.n) + "x" + std::to_string(d_in));
    const int n = g.n;
    // Neighborhood mask: graph neighbors plus self-loop.
    std::vector<uint8_t> mask(static_cast<size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i) {
      mask[static_cast<size_t>(i) * n + i] = 1;
      for (int j = 0; j < n; ++j)
        if (g.A(i, j) != 0.0) mask[static_cast<size_t>(i) * n + j] = 1;
    }
    // Constant splitters for the two halves of `a`.
    Tensor top = Tensor::zeros(d_out, 2 * d_out), bot = Tensor::zeros(d_out, 2 * d_out);
    for (int i = 0; i < d_out; ++i) {
      top(i, i) = 1.0;
      bot(i, d_out + i) = 1.0;
    }
    Var ones_row = t.constant(Tensor::ones(1, n));
    Var ones_col = t.constant(Tensor::ones(n, 1));
    Var sum;
    if (attention_out) attention_out->clear();
    for (int k = 0; k < heads; ++k) {
      Var h = t.matmul(x, t.param(W[k]));                       // n x d_out
      Var a_var = t.param(a[k]);
      Var a_left = t.matmul(t.constant(top), a_var);            // d_out x 1
      Var a_right = t.matmul(t.constant(bot), a_var);
      Var s1 = t.matmul(h, a_left);                             // n x 1: a_l . W h_i
      Var s2 = t.matmul(h, a_right);                            // n x 1: a_r . W h_j
      Var e_pre = t.add(t.matmul(s1, ones_row), t.matmul(ones_col, t.transpose(s2)));
      Var e = t.leaky_relu(e_pre, leaky_slope);
      Var alpha = t.row_softmax(e, &mask);
      if (attention_out) attention_out->push_back(t.value(alpha));
      Var head = t.matmul(alpha, h);
      sum = k == 0 ? head : t.add(sum, head);
    }
    return t.relu(heads == 1 ? sum : t.mul_scalar(sum, 1.0 / heads));
  }
};

}  // namespace amodrl
