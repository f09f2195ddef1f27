#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amodrl/env.hpp"
#include "amodrl/errors.hpp"
#include "amodrl/gnn.hpp"
#include "amodrl/graph.hpp"
#include "amodrl/prognn.hpp"
#include "amodrl/ptdnet.hpp"
#include "amodrl/rng.hpp"
#include "amodrl/special.hpp"
#include "amodrl/tape.hpp"

namespace amodrl {

enum class Backbone { kGcn, kGat, kProGnn, kPtdNet };

inline std::string backbone_name(Backbone b) {
  switch (b) {
    case Backbone::kGcn: return "gcn";
    case Backbone::kGat: return "gat";
    case Backbone::kProGnn: return "prognn";
    case Backbone::kPtdNet: return "ptdnet";
  }
  throw ArgumentError("unknown backbone");
}

inline Backbone parse_backbone(const std::string& s) {
  if (s == "gcn") return Backbone::kGcn;
  if (s == "gat") return Backbone::kGat;
  if (s == "prognn") return Backbone::kProGnn;
  if (s == "ptdnet") return Backbone::kPtdNet;
  throw ConfigError("unknown backbone '" + s + "' (expected gcn|gat|prognn|ptdnet)");
}

/// Fully-connected layer y = act(x W + b).
struct DenseLayer {
  Parameter W, b;

  DenseLayer() = default;
  DenseLayer(const std::string& name, int d_in, int d_out)
      : W(name + ".W", Tensor::zeros(d_in, d_out)), b(name + ".b", Tensor::zeros(1, d_out)) {}

  std::vector<Parameter*> params() { return {&W, &b}; }

  Var forward(Tape& t, Var x, bool relu_act) {
    Var y = t.add_rowvec(t.matmul(x, t.param(W)), t.param(b));
    return relu_act ? t.relu(y) : y;
  }
};

struct PolicyConfig {
  Backbone backbone = Backbone::kGcn;
  int feature_dim = 4;
  int hidden = 32;
  int gat_heads = 1;
  double kappa = 10.0;       // Dirichlet concentration scale, c = 1 + kappa*o
  double leaky_slope = 0.2;  // GAT attention
  ProGnnConfig prognn;
  double ptd_tau_start = 1.0;
  double ptd_tau_end = 0.3;

  void validate() const {
    if (feature_dim < 1 || hidden < 1) throw ConfigError("policy: dimensions must be >= 1");
    if (gat_heads < 1) throw ConfigError("policy: gat_heads must be >= 1");
    if (!(kappa > 0.0)) throw ConfigError("policy: kappa must be positive");
    if (!(ptd_tau_start > 0.0) || !(ptd_tau_end > 0.0))
      throw ConfigError("policy: temperatures must be positive");
    prognn.validate();
  }
};

/// One network (actor or critic): graph layer -> three 32-unit relu layers
/// -> head. The actor head is a per-node sigmoid scalar; the critic head
/// sum-pools the nodes and emits one value.
struct Trunk {
  Backbone kind = Backbone::kGcn;
  GcnLayer gcn;  // also the downstream layer for prognn/ptdnet propagation
  GatLayer gat;
  DenseLayer fc1, fc2, fc3, head;
  bool critic = false;

  Trunk() = default;
  Trunk(const std::string& name, const PolicyConfig& cfg, bool critic_)
      : kind(cfg.backbone), critic(critic_) {
    if (kind == Backbone::kGat)
      gat = GatLayer(name + ".gat", cfg.feature_dim, cfg.hidden, cfg.gat_heads);
    else
      gcn = GcnLayer(name + ".gcn", cfg.feature_dim, cfg.hidden);
    fc1 = DenseLayer(name + ".fc1", cfg.hidden, cfg.hidden);
    fc2 = DenseLayer(name + ".fc2", cfg.hidden, cfg.hidden);
    fc3 = DenseLayer(name + ".fc3", cfg.hidden, cfg.hidden);
    head = DenseLayer(name + ".head", cfg.hidden, 1);
  }

  std::vector<Parameter*> params() {
    std::vector<Parameter*> out;
    auto append = [&out](std::vector<Parameter*> v) {
      out.insert(out.end(), v.begin(), v.end());
    };
    if (kind == Backbone::kGat) append(gat.params());
    else append(gcn.params());
    append(fc1.params());
    append(fc2.params());
    append(fc3.params());
    append(head.params());
    return out;
  }

  /// `prop` is the propagation matrix Var for gcn/prognn/ptdnet paths;
  /// ignored by the GAT path (which attends over the raw graph).
  Var forward(Tape& t, const Graph& g, Var x, std::optional<Var> prop,
              std::vector<Tensor>* attention_out = nullptr) {
    Var z;
    if (kind == Backbone::kGat) {
      z = gat.forward(t, g, x, attention_out);
    } else {
      if (!prop) throw ContractError("trunk: propagation matrix required");
      z = gcn.forward(t, *prop, x);
    }
    z = fc3.forward(t, fc2.forward(t, fc1.forward(t, z, true), true), true);
    if (critic) return head.forward(t, t.sum_pool(z), false);  // 1 x 1 value
    return t.sigmoid(head.forward(t, z, false));               // n x 1 in (0,1)
  }
};

/// What one forward pass of the whole stack produces on a tape.
struct StackForward {
  Var o;              // actor per-node sigmoid outputs, n x 1
  Var concentration;  // c = 1 + kappa * o, n x 1
  Var value;          // critic scalar, 1 x 1
  std::optional<Var> prognn_s;   // the S leaf (for task gradients w.r.t. S)
  std::optional<Var> ptd_mask;   // masked adjacency, n x n
};

/// Per-step stochastic context for PTDNet (frozen so updates can replay it).
struct PtdNoise {
  bool stochastic = false;
  double tau = 1.0;
  std::vector<double> noise;  // per-edge logistic draws; empty when deterministic
};

/// Actor + critic over a shared backbone choice. Pro-GNN keeps one refined S
/// used by both networks; PTDNet keeps one sampler whose per-step mask both
/// networks consume.
class PolicyStack {
 public:
  PolicyConfig cfg;
  Trunk actor;
  Trunk critic;
  PtdNetSampler sampler;     // ptdnet only
  ProGnnState prognn_state;  // prognn only

  PolicyStack() = default;
  explicit PolicyStack(const PolicyConfig& c) : cfg(c) {
    cfg.validate();
    actor = Trunk("actor", cfg, false);
    critic = Trunk("critic", cfg, true);
    if (cfg.backbone == Backbone::kPtdNet)
      sampler = PtdNetSampler("sampler", cfg.feature_dim, cfg.hidden);
  }

  std::vector<Parameter*> params() {
    std::vector<Parameter*> out = actor.params();
    std::vector<Parameter*> c = critic.params();
    out.insert(out.end(), c.begin(), c.end());
    if (cfg.backbone == Backbone::kPtdNet) {
      std::vector<Parameter*> s = sampler.params();
      out.insert(out.end(), s.begin(), s.end());
    }
    return out;
  }

  /// Glorot-uniform weights, zero biases; every parameter gets its own
  /// name-derived stream so init is order-independent.
  void init_weights(uint64_t seed) {
    for (Parameter* p : params()) {
      const bool is_bias = p->name.size() >= 2 && p->name.substr(p->name.size() - 2) == ".b";
      if (is_bias) {
        std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
        continue;
      }
      const int fan_in = p->value.rows, fan_out = p->value.cols;
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      StreamRng rng(derive_key(derive_key(seed, kStreamInit), hash_name(p->name)));
      for (double& v : p->value.data) v = (2.0 * rng.uniform() - 1.0) * limit;
    }
  }

  /// Bind S to the scenario graph (call once per training run for prognn).
  void attach_graph(const Graph& g) {
    if (cfg.backbone == Backbone::kProGnn &&
        (prognn_state.S.rows != g.n || prognn_state.S.cols != g.n))
      prognn_state = prognn_init(g.A);
  }

  /// One forward pass of actor and critic on the given tape. For PTDNet the
  /// caller controls the mask randomness through `ptd`; Pro-GNN exposes its
  /// S leaf so backward() can report the task gradient w.r.t. S.
  StackForward forward(Tape& t, const Graph& g, const Tensor& features, const PtdNoise& ptd) {
    Var x = t.constant(features);
    std::optional<Var> prop;
    StackForward out;
    switch (cfg.backbone) {
      case Backbone::kGcn:
        prop = t.constant(normalize_adjacency(g).P);
        break;
      case Backbone::kGat:
        break;
      case Backbone::kProGnn: {
        attach_graph(g);
        Var s = t.input(prognn_state.S, cfg.prognn.joint_task_gradient);
        out.prognn_s = s;
        prop = normalize_adjacency_tape(t, s);
        break;
      }
      case Backbone::kPtdNet: {
        Var logits = ptdnet_logits(t, g, x, sampler);
        Var mask = ptdnet_mask(t, g, logits, ptd.tau, ptd.stochastic ? &ptd.noise : nullptr);
        out.ptd_mask = mask;
        prop = normalize_adjacency_tape(t, mask);
        break;
      }
    }
    out.o = actor.forward(t, g, x, prop);
    out.concentration = t.add_scalar(t.mul_scalar(out.o, cfg.kappa), 1.0);
    out.value = critic.forward(t, g, x, prop);
    return out;
  }

  static uint64_t hash_name(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }
};

// ---- Dirichlet action head ----

/// Sample a ~ Dirichlet(c) by normalized Gamma draws. Numerically zero
/// components are clamped to 1e-12 and the vector renormalized; `clamped`
/// (when given) reports whether that happened.
inline std::vector<double> sample_dirichlet(const std::vector<double>& c, StreamRng& rng,
                                            bool* clamped = nullptr) {
  const int n = static_cast<int>(c.size());
  if (n < 1) throw ArgumentError("sample_dirichlet: empty concentration");
  std::vector<double> a(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(c[i] > 0.0)) throw ArgumentError("sample_dirichlet: concentrations must be positive");
    a[i] = rng.gamma(c[i]);
    sum += a[i];
  }
  if (clamped) *clamped = false;
  if (!(sum > 0.0)) {  // all draws underflowed; fall back to uniform
    std::fill(a.begin(), a.end(), 1.0 / n);
    if (clamped) *clamped = true;
    return a;
  }
  for (double& v : a) v /= sum;
  bool hit = false;
  for (double& v : a)
    if (v < 1e-12) {
      v = 1e-12;
      hit = true;
    }
  if (hit) {
    double s2 = 0.0;
    for (double v : a) s2 += v;
    for (double& v : a) v /= s2;
    if (clamped) *clamped = true;
  }
  return a;
}

/// Deterministic head: the Dirichlet mean c / sum(c).
inline std::vector<double> dirichlet_mean(const std::vector<double>& c) {
  double sum = 0.0;
  for (double v : c) {
    if (!(v > 0.0)) throw ArgumentError("dirichlet_mean: concentrations must be positive");
    sum += v;
  }
  std::vector<double> a(c.size());
  for (size_t i = 0; i < c.size(); ++i) a[i] = c[i] / sum;
  return a;
}

/// log p(a | c) = log Gamma(sum c) - sum log Gamma(c_i) + sum (c_i - 1) log a_i.
inline double dirichlet_logpdf(const std::vector<double>& c, const std::vector<double>& a) {
  if (c.size() != a.size()) throw DimensionError("dirichlet_logpdf: length mismatch");
  double c0 = 0.0, lp = 0.0;
  for (size_t i = 0; i < c.size(); ++i) {
    if (!(c[i] > 0.0)) throw ArgumentError("dirichlet_logpdf: concentrations must be positive");
    if (!(a[i] > 0.0)) throw DomainError("dirichlet_logpdf: action entries must be positive");
    c0 += c[i];
    lp += -log_gamma(c[i]) + (c[i] - 1.0) * std::log(a[i]);
  }
  return lp + log_gamma(c0);
}

/// On-tape log-density of a fixed action under the (differentiable)
/// concentration vector.
inline Var dirichlet_logpdf_var(Tape& t, Var c, const std::vector<double>& a) {
  const Tensor& cv = t.value(c);
  if (cv.cols != 1 || cv.rows != static_cast<int>(a.size()))
    throw DimensionError("dirichlet_logpdf_var: expected " + std::to_string(a.size()) +
                         "x1 concentration, got " + cv.shape_str());
  Tensor log_a(cv.rows, 1);
  for (int i = 0; i < cv.rows; ++i) {
    if (!(a[i] > 0.0)) throw DomainError("dirichlet_logpdf_var: action entries must be positive");
    log_a(i, 0) = std::log(a[i]);
  }
  Var c0 = t.sum_all(c);
  Var term = t.sum_all(t.mul(t.add_scalar(c, -1.0), t.constant(log_a)));
  return t.add(t.sub(t.lgamma(c0), t.sum_all(t.lgamma(c))), term);
}

/// On-tape Dirichlet entropy:
///   H = sum lgamma(c_i) - lgamma(c0) + (c0 - n) psi(c0) - sum (c_i-1) psi(c_i).
inline Var dirichlet_entropy_var(Tape& t, Var c) {
  const Tensor& cv = t.value(c);
  if (cv.cols != 1) throw DimensionError("dirichlet_entropy_var: expected column vector");
  const int n = cv.rows;
  Var c0 = t.sum_all(c);
  Var log_beta = t.sub(t.sum_all(t.lgamma(c)), t.lgamma(c0));
  Var mid = t.mul(t.add_scalar(c0, -static_cast<double>(n)), t.digamma_op(c0));
  Var tail = t.sum_all(t.mul(t.add_scalar(c, -1.0), t.digamma_op(c)));
  return t.sub(t.add(log_beta, mid), tail);
}

/// Plain Dirichlet entropy (same formula, off tape).
inline double dirichlet_entropy(const std::vector<double>& c) {
  const int n = static_cast<int>(c.size());
  double c0 = 0.0;
  for (double v : c) {
    if (!(v > 0.0)) throw ArgumentError("dirichlet_entropy: concentrations must be positive");
    c0 += v;
  }
  double h = -log_gamma(c0) + (c0 - n) * digamma(c0);
  for (double v : c) h += log_gamma(v) - (v - 1.0) * digamma(v);
  return h;
}

}  // namespace amodrl
