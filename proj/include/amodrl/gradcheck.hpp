#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "amodrl/a2c.hpp"
#include "amodrl/env.hpp"
#include "amodrl/errors.hpp"
#include "amodrl/gnn.hpp"
#include "amodrl/graph.hpp"
#include "amodrl/policy.hpp"
#include "amodrl/ptdnet.hpp"
#include "amodrl/rng.hpp"
#include "amodrl/tape.hpp"

namespace amodrl {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 1e-4;
  bool pass = false;
};

/// Evaluates the scalar loss at the current parameter values AND (on the
/// same call) writes the analytic gradient into every Parameter::grad —
/// i.e. runs the forward plus backward() once. It must rebuild its tape from
/// scratch each call so parameter perturbations take effect.
using LossWithGrads = std::function<double()>;

/// Central-difference check of the analytic gradients of `loss_fn` w.r.t.
/// every element of every parameter. The relative error uses a floor scaled
/// by the loss magnitude so near-zero gradient pairs do not blow up the
/// ratio.
inline GradCheckResult check_gradients(const std::string& name,
                                       const std::vector<Parameter*>& params,
                                       const LossWithGrads& loss_fn, double eps = 1e-6,
                                       double tol = 1e-4) {
  GradCheckResult res;
  res.name = name;
  res.tolerance = tol;
  const double f0 = loss_fn();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) {
    if (!p->grad.same_shape(p->value))
      throw ContractError("check_gradients: " + p->name + " has no gradient after loss_fn");
    analytic.push_back(p->grad);
  }
  const double floor = 1e-4 * (1.0 + std::abs(f0));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data[i];
      p->value.data[i] = saved + eps;
      const double fp = loss_fn();
      p->value.data[i] = saved - eps;
      const double fm = loss_fn();
      p->value.data[i] = saved;
      const double fd = (fp - fm) / (2.0 * eps);
      const double a = analytic[pi].data[i];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
      res.max_rel_err = std::max(res.max_rel_err, rel);
    }
  }
  loss_fn();  // restore gradients for the unperturbed point
  res.pass = res.max_rel_err < tol;
  return res;
}

namespace detail {

inline Tensor random_tensor(int rows, int cols, StreamRng& rng, double lo, double hi) {
  Tensor t(rows, cols);
  for (double& v : t.data) v = lo + (hi - lo) * rng.uniform();
  return t;
}

/// Scalarize an op output against fixed random cotangent weights so every
/// output element influences the loss differently.
inline Var weighted_sum(Tape& t, Var y, const Tensor& weights) {
  return t.sum_all(t.mul(y, t.constant(weights)));
}

}  // namespace detail

/// Finite-difference suite over every differentiable tape operation,
/// `instances` random instances each.
inline std::vector<GradCheckResult> gradcheck_ops(uint64_t seed, int instances = 3) {
  std::vector<GradCheckResult> results;
  auto simple = [&](const std::string& op, int a_rows, int a_cols, double lo, double hi,
                    const std::function<Var(Tape&, Var)>& apply) {
    for (int inst = 0; inst < instances; ++inst) {
      StreamRng rng(derive_key(derive_key(seed, PolicyStack::hash_name(op)), inst));
      Parameter a(op + ".a", detail::random_tensor(a_rows, a_cols, rng, lo, hi));
      Tensor w;
      std::vector<Parameter*> params = {&a};
      auto fn = [&]() {
        Tape t;
        Var y = apply(t, t.param(a));
        const Tensor& yv = t.value(y);
        if (!w.same_shape(yv)) {
          StreamRng wr(derive_key(derive_key(seed, PolicyStack::hash_name(op + ".w")), inst));
          w = detail::random_tensor(yv.rows, yv.cols, wr, -1.0, 1.0);
        }
        Var loss = detail::weighted_sum(t, y, w);
        t.backward(loss);
        return t.value(loss)(0, 0);
      };
      results.push_back(check_gradients(op + "[" + std::to_string(inst) + "]", params, fn));
    }
  };

  simple("neg", 3, 4, -2.0, 2.0, [](Tape& t, Var a) { return t.neg(a); });
  simple("add_scalar", 3, 4, -2.0, 2.0,
         [](Tape& t, Var a) { return t.add_scalar(a, 0.7); });
  simple("mul_scalar", 3, 4, -2.0, 2.0,
         [](Tape& t, Var a) { return t.mul_scalar(a, -1.3); });
  // Keep relu/leaky inputs away from the kink so FD is valid.
  simple("relu", 3, 4, 0.2, 2.0, [](Tape& t, Var a) { return t.relu(a); });
  simple("relu_neg", 3, 4, -2.0, -0.2, [](Tape& t, Var a) { return t.relu(a); });
  simple("leaky_relu", 3, 4, 0.2, 2.0,
         [](Tape& t, Var a) { return t.leaky_relu(a, 0.2); });
  simple("leaky_relu_neg", 3, 4, -2.0, -0.2,
         [](Tape& t, Var a) { return t.leaky_relu(a, 0.2); });
  simple("sigmoid", 3, 4, -2.0, 2.0, [](Tape& t, Var a) { return t.sigmoid(a); });
  simple("exp", 3, 4, -1.5, 1.5, [](Tape& t, Var a) { return t.exp(a); });
  simple("log", 3, 4, 0.3, 3.0, [](Tape& t, Var a) { return t.log(a); });
  simple("tanh", 3, 4, -2.0, 2.0, [](Tape& t, Var a) { return t.tanh(a); });
  simple("rsqrt", 3, 4, 0.3, 3.0, [](Tape& t, Var a) { return t.rsqrt(a); });
  simple("lgamma", 3, 4, 0.3, 6.0, [](Tape& t, Var a) { return t.lgamma(a); });
  simple("digamma", 3, 4, 0.3, 6.0, [](Tape& t, Var a) { return t.digamma_op(a); });
  simple("row_softmax", 3, 5, -2.0, 2.0, [](Tape& t, Var a) { return t.row_softmax(a); });
  simple("row_softmax_masked", 3, 5, -2.0, 2.0, [](Tape& t, Var a) {
    // Fixed mask keeping 3 of 5 entries per row.
    std::vector<uint8_t> mask(15, 0);
    for (int i = 0; i < 3; ++i)
      for (int j : {0, 2, 4}) mask[i * 5 + j] = 1;
    return t.row_softmax(a, &mask);
  });
  simple("sum_pool", 4, 3, -2.0, 2.0, [](Tape& t, Var a) { return t.sum_pool(a); });
  simple("sum_all", 4, 3, -2.0, 2.0, [](Tape& t, Var a) { return t.sum_all(a); });
  simple("reshape", 3, 4, -2.0, 2.0, [](Tape& t, Var a) { return t.reshape(a, 4, 3); });
  simple("transpose", 3, 4, -2.0, 2.0, [](Tape& t, Var a) { return t.transpose(a); });

  auto pair = [&](const std::string& op, int ar, int ac, int br, int bc,
                  const std::function<Var(Tape&, Var, Var)>& apply, double lo = -2.0,
                  double hi = 2.0) {
    for (int inst = 0; inst < instances; ++inst) {
      StreamRng rng(derive_key(derive_key(seed, PolicyStack::hash_name(op)), inst));
      Parameter a(op + ".a", detail::random_tensor(ar, ac, rng, lo, hi));
      Parameter b(op + ".b", detail::random_tensor(br, bc, rng, lo, hi));
      Tensor w;
      std::vector<Parameter*> params = {&a, &b};
      auto fn = [&]() {
        Tape t;
        Var y = apply(t, t.param(a), t.param(b));
        const Tensor& yv = t.value(y);
        if (!w.same_shape(yv)) {
          StreamRng wr(derive_key(derive_key(seed, PolicyStack::hash_name(op + ".w")), inst));
          w = detail::random_tensor(yv.rows, yv.cols, wr, -1.0, 1.0);
        }
        Var loss = detail::weighted_sum(t, y, w);
        t.backward(loss);
        return t.value(loss)(0, 0);
      };
      results.push_back(check_gradients(op + "[" + std::to_string(inst) + "]", params, fn));
    }
  };

  pair("matmul", 3, 4, 4, 2, [](Tape& t, Var a, Var b) { return t.matmul(a, b); });
  pair("add", 3, 4, 3, 4, [](Tape& t, Var a, Var b) { return t.add(a, b); });
  pair("sub", 3, 4, 3, 4, [](Tape& t, Var a, Var b) { return t.sub(a, b); });
  pair("mul", 3, 4, 3, 4, [](Tape& t, Var a, Var b) { return t.mul(a, b); });
  pair("add_rowvec", 3, 4, 1, 4, [](Tape& t, Var a, Var b) { return t.add_rowvec(a, b); });
  return results;
}

/// Loss closures for the four backbones on small grid instances: the scalar
/// is sum(actor o) + critic value, differentiated w.r.t. every stack
/// parameter (and, for Pro-GNN, w.r.t. S through a dedicated check).
inline std::vector<GradCheckResult> gradcheck_backbones(uint64_t seed, int instances = 3) {
  std::vector<GradCheckResult> results;
  Graph g = build_grid(2, 1.0);

  auto stack_loss = [&](PolicyStack& stack, const Tensor& x, const PtdNoise& ptd) {
    Tape t;
    StackForward fwd = stack.forward(t, g, x, ptd);
    Var loss = t.add(t.sum_all(fwd.o), fwd.value);
    t.backward(loss);
    return t.value(loss)(0, 0);
  };

  auto check_backbone = [&](Backbone kind, const std::string& label, const PtdNoise& ptd,
                            int inst) {
    PolicyConfig cfg;
    cfg.backbone = kind;
    cfg.hidden = 8;
    PolicyStack stack(cfg);
    stack.init_weights(derive_key(seed, PolicyStack::hash_name(label)) + inst);
    stack.attach_graph(g);
    StreamRng xr(derive_key(derive_key(seed, PolicyStack::hash_name(label + ".x")), inst));
    Tensor x = detail::random_tensor(g.n, cfg.feature_dim, xr, 0.0, 1.0);
    auto fn = [&stack, &stack_loss, x, ptd]() { return stack_loss(stack, x, ptd); };
    results.push_back(
        check_gradients(label + "[" + std::to_string(inst) + "]", stack.params(), fn));
  };

  for (int inst = 0; inst < instances; ++inst) {
    PtdNoise none;
    check_backbone(Backbone::kGcn, "backbone.gcn", none, inst);
    check_backbone(Backbone::kGat, "backbone.gat", none, inst);
    check_backbone(Backbone::kProGnn, "backbone.prognn", none, inst);
    PtdNoise det;
    det.stochastic = false;
    det.tau = 0.5;
    check_backbone(Backbone::kPtdNet, "backbone.ptdnet_det", det, inst);
    PtdNoise sto;
    sto.stochastic = true;
    sto.tau = 0.5;
    StreamRng nrng(derive_key(derive_key(seed, PolicyStack::hash_name("ptd.noise")), inst));
    sto.noise = ptdnet_draw_noise(static_cast<int>(g.edges.size()), nrng);
    check_backbone(Backbone::kPtdNet, "backbone.ptdnet_frozen", sto, inst);

    // Pro-GNN: gradient w.r.t. the refined matrix S itself, holding weights
    // fixed: S enters as a bindable parameter feeding the on-tape
    // normalization into a GCN layer.
    {
      StreamRng rng(derive_key(derive_key(seed, PolicyStack::hash_name("prognn.S")), inst));
      Parameter s("S", detail::random_tensor(g.n, g.n, rng, 0.1, 0.9));
      // Symmetrize so the structural invariant holds.
      for (int i = 0; i < g.n; ++i)
        for (int j = i; j < g.n; ++j) {
          const double v = 0.5 * (s.value(i, j) + s.value(j, i));
          s.value(i, j) = s.value(j, i) = v;
        }
      GcnLayer layer("gcnS", 4, 8);
      StreamRng wr(derive_key(derive_key(seed, PolicyStack::hash_name("prognn.S.w")), inst));
      layer.W.value = detail::random_tensor(4, 8, wr, -0.5, 0.5);
      Tensor x = detail::random_tensor(g.n, 4, wr, 0.0, 1.0);
      std::vector<Parameter*> params = {&s, &layer.W};
      auto fn = [&]() {
        Tape t;
        Var p = normalize_adjacency_tape(t, t.param(s));
        Var y = layer.forward(t, p, t.constant(x));
        Var loss = t.sum_all(y);
        t.backward(loss);
        return t.value(loss)(0, 0);
      };
      results.push_back(
          check_gradients("backbone.prognn_S[" + std::to_string(inst) + "]", params, fn));
    }
  }
  return results;
}

/// Policy-head checks: Dirichlet log-density and entropy through the
/// concentration map, plus the full single-episode A2C loss.
inline std::vector<GradCheckResult> gradcheck_policy(uint64_t seed, int instances = 3) {
  std::vector<GradCheckResult> results;
  Graph g = build_grid(2, 1.0);

  for (int inst = 0; inst < instances; ++inst) {
    PolicyConfig cfg;
    cfg.hidden = 8;
    PolicyStack stack(cfg);
    stack.init_weights(derive_key(seed, 77) + inst);
    StreamRng xr(derive_key(derive_key(seed, 78), inst));
    Tensor x = detail::random_tensor(g.n, 4, xr, 0.0, 1.0);
    StreamRng ar(derive_key(derive_key(seed, 79), inst));
    std::vector<double> action = sample_dirichlet(std::vector<double>(g.n, 2.0), ar);

    {
      auto fn = [&]() {
        Tape t;
        PtdNoise none;
        StackForward fwd = stack.forward(t, g, x, none);
        Var loss = dirichlet_logpdf_var(t, fwd.concentration, action);
        t.backward(loss);
        return t.value(loss)(0, 0);
      };
      results.push_back(check_gradients("policy.logpdf[" + std::to_string(inst) + "]",
                                        stack.params(), fn));
    }
    {
      auto fn = [&]() {
        Tape t;
        PtdNoise none;
        StackForward fwd = stack.forward(t, g, x, none);
        Var loss = dirichlet_entropy_var(t, fwd.concentration);
        t.backward(loss);
        return t.value(loss)(0, 0);
      };
      results.push_back(check_gradients("policy.entropy[" + std::to_string(inst) + "]",
                                        stack.params(), fn));
    }
    {
      // Full A2C objective on a fixed 2-step trajectory, advantages frozen
      // (the update detaches them, so FD must hold them fixed too).
      StreamRng rr(derive_key(derive_key(seed, 81), inst));
      std::vector<double> returns = {2.0 * rr.uniform() + 0.5, rr.uniform()};
      std::vector<std::vector<double>> actions;
      std::vector<Tensor> feats;
      for (int t2 = 0; t2 < 2; ++t2) {
        StreamRng fr(derive_key(derive_key(seed, 82 + t2), inst));
        feats.push_back(detail::random_tensor(g.n, 4, fr, 0.0, 1.0));
        actions.push_back(sample_dirichlet(std::vector<double>(g.n, 2.0), fr));
      }
      std::vector<double> adv = {0.0, 0.0};
      {
        PtdNoise none;
        for (int t2 = 0; t2 < 2; ++t2) {
          Tape t;
          StackForward fwd = stack.forward(t, g, feats[t2], none);
          adv[t2] = returns[t2] - t.value(fwd.value)(0, 0);
        }
      }
      auto fn = [&]() {
        Tape t;
        PtdNoise none;
        Var total;
        for (int t2 = 0; t2 < 2; ++t2) {
          StackForward fwd = stack.forward(t, g, feats[t2], none);
          Var logp = dirichlet_logpdf_var(t, fwd.concentration, actions[t2]);
          Var p_term = t.mul_scalar(logp, -adv[t2]);
          Var diff = t.sub(t.constant(Tensor::scalar(returns[t2])), fwd.value);
          Var v_term = t.mul_scalar(t.mul(diff, diff), 0.5);
          Var h_term = t.mul_scalar(dirichlet_entropy_var(t, fwd.concentration), -0.01);
          Var step_loss = t.add(t.add(p_term, v_term), h_term);
          total = t2 == 0 ? step_loss : t.add(total, step_loss);
        }
        t.backward(total);
        return t.value(total)(0, 0);
      };
      results.push_back(check_gradients("policy.a2c_loss[" + std::to_string(inst) + "]",
                                        stack.params(), fn));
    }
  }
  return results;
}

}  // namespace amodrl
