#pragma once

#include <string>
#include <vector>

#include "amodrl/errors.hpp"
#include "amodrl/gnn.hpp"
#include "amodrl/graph.hpp"
#include "amodrl/rng.hpp"
#include "amodrl/tape.hpp"
#include "amodrl/tensor.hpp"

namespace amodrl {

/// Edge-dropping sampler: a two-layer dense network phi maps the
/// concatenated endpoint features of each edge to a keep-logit; the logit is
/// turned into a soft mask either deterministically (sigmoid) or by a
/// binary-concrete draw at temperature tau.
struct PtdNetSampler {
  int d_in = 0;      // per-node feature width; phi input is 2*d_in
  int hidden = 32;
  Parameter w1, b1, w2, b2;

  PtdNetSampler() = default;
  PtdNetSampler(const std::string& name, int d_in_, int hidden_ = 32)
      : d_in(d_in_),
        hidden(hidden_),
        w1(name + ".w1", Tensor::zeros(2 * d_in_, hidden_)),
        b1(name + ".b1", Tensor::zeros(1, hidden_)),
        w2(name + ".w2", Tensor::zeros(hidden_, 1)),
        b2(name + ".b2", Tensor::zeros(1, 1)) {}

  std::vector<Parameter*> params() { return {&w1, &b1, &w2, &b2}; }
};

/// Per-edge symmetrized keep-logits, one row per undirected edge of g (in
/// g.edges order): l_e = phi(x_i || x_j) + phi(x_j || x_i).
inline Var ptdnet_logits(Tape& t, const Graph& g, Var x, PtdNetSampler& s) {
  const Tensor& xv = t.value(x);
  if (xv.rows != g.n || xv.cols != s.d_in)
    throw DimensionError("ptdnet_logits: features " + xv.shape_str() + ", expected " +
                         std::to_string(g.n) + "x" + std::to_string(s.d_in));
  const int e_count = static_cast<int>(g.edges.size());
  if (e_count == 0) throw DegenerateError("ptdnet_logits: graph has no edges");
  const int d = s.d_in;
  // Row selectors: row 2e of the pair matrix reads node i, row 2e+1 node j.
  Tensor sel_a = Tensor::zeros(2 * e_count, g.n);  // first slot of the concat
  Tensor sel_b = Tensor::zeros(2 * e_count, g.n);  // second slot
  for (int e = 0; e < e_count; ++e) {
    const auto [i, j] = g.edges[e];
    sel_a(2 * e, i) = 1.0;
    sel_b(2 * e, j) = 1.0;
    sel_a(2 * e + 1, j) = 1.0;
    sel_b(2 * e + 1, i) = 1.0;
  }
  // Column lifts d -> 2d placing a block in the left or right half.
  Tensor lift_l = Tensor::zeros(d, 2 * d), lift_r = Tensor::zeros(d, 2 * d);
  for (int c = 0; c < d; ++c) {
    lift_l(c, c) = 1.0;
    lift_r(c, d + c) = 1.0;
  }
  Var pair = t.add(t.matmul(t.matmul(t.constant(sel_a), x), t.constant(lift_l)),
                   t.matmul(t.matmul(t.constant(sel_b), x), t.constant(lift_r)));
  Var h1 = t.relu(t.add_rowvec(t.matmul(pair, t.param(s.w1)), t.param(s.b1)));
  Var raw = t.add_rowvec(t.matmul(h1, t.param(s.w2)), t.param(s.b2));  // 2E x 1
  // Symmetrize: logit of edge e = raw(2e) + raw(2e+1).
  Tensor fold = Tensor::zeros(e_count, 2 * e_count);
  for (int e = 0; e < e_count; ++e) {
    fold(e, 2 * e) = 1.0;
    fold(e, 2 * e + 1) = 1.0;
  }
  return t.matmul(t.constant(fold), raw);  // E x 1
}

/// Draw the logistic noise (difference of two Gumbels) for every edge from
/// the given stream; recorded so an update pass can replay the exact draw.
inline std::vector<double> ptdnet_draw_noise(int edge_count, StreamRng& rng) {
  std::vector<double> z(edge_count);
  for (int e = 0; e < edge_count; ++e) {
    const double g1 = rng.gumbel();
    const double g2 = rng.gumbel();
    z[e] = g1 - g2;
  }
  return z;
}

/// Soft edge mask scattered to an n-by-n matrix. Stochastic draws use
/// m_e = sigmoid((l_e + z_e)/tau) with the provided frozen noise z;
/// deterministic mode (noise == nullptr) uses m_e = sigmoid(l_e) with no
/// temperature. Non-edges stay exactly zero.
inline Var ptdnet_mask(Tape& t, const Graph& g, Var logits, double tau,
                       const std::vector<double>* noise) {
  const int e_count = static_cast<int>(g.edges.size());
  const Tensor& lv = t.value(logits);
  if (lv.rows != e_count || lv.cols != 1)
    throw DimensionError("ptdnet_mask: expected " + std::to_string(e_count) + "x1 logits, got " +
                         lv.shape_str());
  Var m;
  if (noise) {
    if (!(tau > 0.0)) throw ArgumentError("ptdnet_mask: temperature must be positive");
    if (static_cast<int>(noise->size()) != e_count)
      throw DimensionError("ptdnet_mask: noise length does not match edge count");
    Tensor z(e_count, 1);
    for (int e = 0; e < e_count; ++e) z(e, 0) = (*noise)[e];
    m = t.sigmoid(t.mul_scalar(t.add(logits, t.constant(z)), 1.0 / tau));
  } else {
    m = t.sigmoid(logits);
  }
  // Scatter the per-edge mask onto both symmetric slots of the adjacency.
  Tensor scat = Tensor::zeros(g.n * g.n, e_count);
  for (int e = 0; e < e_count; ++e) {
    const auto [i, j] = g.edges[e];
    scat(i * g.n + j, e) = 1.0;
    scat(j * g.n + i, e) = 1.0;
  }
  return t.reshape(t.matmul(t.constant(scat), m), g.n, g.n);
}

/// Linear temperature anneal tau_start -> tau_end over `total` episodes.
inline double ptdnet_temperature(double tau_start, double tau_end, long long episode,
                                 long long total) {
  if (!(tau_start > 0.0) || !(tau_end > 0.0))
    throw ArgumentError("ptdnet_temperature: temperatures must be positive");
  if (total <= 1) return tau_end;
  const double f = std::min(1.0, static_cast<double>(episode) / static_cast<double>(total - 1));
  return tau_start + (tau_end - tau_start) * f;
}

}  // namespace amodrl
