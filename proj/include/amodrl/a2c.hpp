#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "amodrl/adam.hpp"
#include "amodrl/checkpoint.hpp"
#include "amodrl/env.hpp"
#include "amodrl/errors.hpp"
#include "amodrl/policy.hpp"
#include "amodrl/ptdnet.hpp"
#include "amodrl/rng.hpp"
#include "amodrl/tape.hpp"

namespace amodrl {

struct TrainConfig {
  double lr = 0.003;
  double gamma = 0.97;
  long long episodes = 16000;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double grad_clip = 5.0;
  long long ckpt_every = 500;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("train: gamma must be in (0, 1]");
    if (episodes < 1) throw ConfigError("train: episodes must be >= 1");
    if (value_coef < 0.0 || entropy_coef < 0.0)
      throw ConfigError("train: loss weights must be >= 0");
    if (!(grad_clip > 0.0)) throw ConfigError("train: grad_clip must be positive");
    if (ckpt_every < 1) throw ConfigError("train: ckpt_every must be >= 1");
  }
};

/// One step of a collected episode: everything needed to replay the forward
/// pass exactly during the update (features, the action taken, frozen PTDNet
/// noise) plus rollout-time diagnostics.
struct StepRecord {
  Tensor features;
  std::vector<double> action;
  double reward = 0.0;
  int served = 0;
  double rebal_cost = 0.0;
  double value_estimate = 0.0;  // rollout-time critic value (diagnostic)
  double log_density = 0.0;     // rollout-time action log-density (diagnostic)
  PtdNoise ptd;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  double total_reward = 0.0;
  int total_served = 0;
  double total_rebal_cost = 0.0;
};

/// R_t = r_t + gamma * R_{t+1}, computed backwards from R_{T-1} = r_{T-1}.
inline std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  if (rewards.empty()) throw ArgumentError("discounted_returns: empty reward list");
  std::vector<double> r(rewards.size());
  double acc = 0.0;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    acc = rewards[t] + gamma * acc;
    r[t] = acc;
  }
  return r;
}

/// Per-episode stream keys: actions, PTDNet noise and any future per-episode
/// randomness all derive from the episode seed, one stream per (kind, step).
inline uint64_t episode_seed(uint64_t root_seed, long long episode) {
  return derive_key(derive_key(root_seed, kStreamEpisode), static_cast<uint64_t>(episode));
}

/// Play one episode with the current weights. Stochastic mode samples the
/// Dirichlet head (training); deterministic mode acts on its mean (eval).
inline Trajectory rollout(PolicyStack& stack, const Scenario& sc, uint64_t ep_seed, double tau,
                          bool stochastic) {
  Trajectory traj;
  AmodState st = reset(sc, ep_seed);
  const bool ptdnet = stack.cfg.backbone == Backbone::kPtdNet;
  for (int t = 0; t < sc.horizon; ++t) {
    StepRecord rec;
    rec.features = node_features(st, sc);
    rec.ptd.tau = tau;
    rec.ptd.stochastic = ptdnet && stochastic;
    if (rec.ptd.stochastic) {
      StreamRng noise_rng(derive_key(derive_key(ep_seed, kStreamEdgeNoise), t));
      rec.ptd.noise = ptdnet_draw_noise(static_cast<int>(sc.graph.edges.size()), noise_rng);
    }
    Tape tape;
    StackForward fwd = stack.forward(tape, sc.graph, rec.features, rec.ptd);
    const Tensor& cv = tape.value(fwd.concentration);
    std::vector<double> c(cv.data.begin(), cv.data.end());
    if (stochastic) {
      StreamRng act_rng(derive_key(derive_key(ep_seed, kStreamAction), t));
      rec.action = sample_dirichlet(c, act_rng);
    } else {
      rec.action = dirichlet_mean(c);
    }
    rec.log_density = dirichlet_logpdf(c, rec.action);
    rec.value_estimate = tape.value(fwd.value)(0, 0);
    StepOutcome out = step(st, sc, rec.action);
    rec.reward = out.reward;
    rec.served = out.served;
    rec.rebal_cost = out.rebal_cost;
    traj.total_reward += out.reward;
    traj.total_served += out.served;
    traj.total_rebal_cost += out.rebal_cost;
    traj.steps.push_back(std::move(rec));
  }
  return traj;
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  double grad_norm = 0.0;  // pre-clip global norm
  Tensor s_task_gradient;  // prognn: d(total loss)/dS summed over steps
};

/// One A2C update from one complete episode: rebuild every forward pass on a
/// single tape (so parameter gradients accumulate across steps), form
///   total = -sum_t logpi(a_t) * adv_t + c_v * sum_t (R_t - V_t)^2
///           - c_e * sum_t H(pi_t),
/// with adv_t = R_t - V_t detached, then clip and apply one Adam step.
inline UpdateStats a2c_update(PolicyStack& stack, const Scenario& sc, const Trajectory& traj,
                              const TrainConfig& cfg, AdamOptimizer& opt) {
  cfg.validate();
  if (traj.steps.empty()) throw ArgumentError("a2c_update: empty trajectory");
  // Checked up front: a NaN weight can pass through the loss unseen (a dead
  // relu unit reads as zero), so the loss/grad checks below are not enough.
  for (Parameter* p : stack.params())
    if (!p->value.all_finite())
      throw NumericError("a2c_update: non-finite values in parameter " + p->name);
  const int T = static_cast<int>(traj.steps.size());
  std::vector<double> rewards(T);
  for (int t = 0; t < T; ++t) rewards[t] = traj.steps[t].reward;
  const std::vector<double> returns = discounted_returns(rewards, cfg.gamma);

  Tape tape;
  Var policy_loss, value_loss, entropy;
  std::vector<Var> s_leaves;
  for (int t = 0; t < T; ++t) {
    const StepRecord& rec = traj.steps[t];
    StackForward fwd = stack.forward(tape, sc.graph, rec.features, rec.ptd);
    if (fwd.prognn_s && stack.cfg.prognn.joint_task_gradient) s_leaves.push_back(*fwd.prognn_s);
    const double v_detached = tape.value(fwd.value)(0, 0);
    const double adv = returns[t] - v_detached;
    Var logp = dirichlet_logpdf_var(tape, fwd.concentration, rec.action);
    Var p_term = tape.mul_scalar(logp, -adv);
    Var diff = tape.sub(tape.constant(Tensor::scalar(returns[t])), fwd.value);
    Var v_term = tape.mul(diff, diff);
    Var h_term = dirichlet_entropy_var(tape, fwd.concentration);
    policy_loss = t == 0 ? p_term : tape.add(policy_loss, p_term);
    value_loss = t == 0 ? v_term : tape.add(value_loss, v_term);
    entropy = t == 0 ? h_term : tape.add(entropy, h_term);
  }
  Var total = tape.add(policy_loss, tape.sub(tape.mul_scalar(value_loss, cfg.value_coef),
                                             tape.mul_scalar(entropy, cfg.entropy_coef)));
  UpdateStats stats;
  stats.policy_loss = tape.value(policy_loss)(0, 0);
  stats.value_loss = tape.value(value_loss)(0, 0);
  stats.entropy = tape.value(entropy)(0, 0);
  stats.total_loss = tape.value(total)(0, 0);
  if (!std::isfinite(stats.total_loss))
    throw NumericError("a2c_update: non-finite loss (policy=" + std::to_string(stats.policy_loss) +
                       ", value=" + std::to_string(stats.value_loss) +
                       ", entropy=" + std::to_string(stats.entropy) + ")");
  tape.backward(total);
  if (!s_leaves.empty()) {
    stats.s_task_gradient = Tensor::zeros(sc.n(), sc.n());
    for (Var s : s_leaves) {
      const Tensor& g = tape.grad_of(s);
      for (size_t i = 0; i < g.size(); ++i) stats.s_task_gradient.data[i] += g.data[i];
    }
  }
  std::vector<Parameter*> params = stack.params();
  for (Parameter* p : params)
    if (!p->grad.all_finite())
      throw NumericError("a2c_update: non-finite gradient in " + p->name);
  stats.grad_norm = clip_global_norm(params, cfg.grad_clip);
  opt.step(params);
  return stats;
}

/// One line of the training log CSV.
struct TrainLogRow {
  long long episode = 0;
  double reward = 0.0;
  int served = 0;
  double rebal_cost = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

/// Episode-driven trainer: rollout, update, Pro-GNN refinement, PTDNet
/// temperature anneal, periodic checkpoints.
class Trainer {
 public:
  Trainer(PolicyStack& stack, const Scenario& sc, const TrainConfig& cfg)
      : stack_(stack), sc_(sc), cfg_(cfg), opt_(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8}) {
    cfg_.validate();
    stack_.attach_graph(sc_.graph);
  }

  AdamOptimizer& optimizer() { return opt_; }
  long long episodes_done() const { return episodes_done_; }
  void set_episodes_done(long long e) { episodes_done_ = e; }

  double current_tau() const {
    return ptdnet_temperature(stack_.cfg.ptd_tau_start, stack_.cfg.ptd_tau_end, episodes_done_,
                              cfg_.episodes);
  }

  /// Run one episode (rollout + update + structure refinement); returns the
  /// log row. `root_seed` scopes the whole training run.
  TrainLogRow train_episode(uint64_t root_seed) {
    const uint64_t ep_seed = episode_seed(root_seed, episodes_done_);
    const double tau = current_tau();
    Trajectory traj = rollout(stack_, sc_, ep_seed, tau, /*stochastic=*/true);
    UpdateStats stats = a2c_update(stack_, sc_, traj, cfg_, opt_);
    if (stack_.cfg.backbone == Backbone::kProGnn && stack_.cfg.prognn.tau_s > 0) {
      const Tensor* tg = stats.s_task_gradient.size() > 0 ? &stats.s_task_gradient : nullptr;
      for (int s = 0; s < stack_.cfg.prognn.tau_s; ++s)
        prognn_refine_step(sc_.graph.A, stack_.prognn_state, stack_.cfg.prognn, tg);
    }
    TrainLogRow row;
    row.episode = episodes_done_;
    row.reward = traj.total_reward;
    row.served = traj.total_served;
    row.rebal_cost = traj.total_rebal_cost;
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.entropy = stats.entropy;
    episodes_done_ += 1;
    return row;
  }

 private:
  PolicyStack& stack_;
  const Scenario& sc_;
  TrainConfig cfg_;
  AdamOptimizer opt_;
  long long episodes_done_ = 0;
};

// ---- checkpoint glue ----

inline int backbone_code(Backbone b) { return static_cast<int>(b); }

/// Serialize parameters, optimizer state, Pro-GNN's S and progress counters
/// into one checkpoint container.
inline void save_training_checkpoint(const std::string& path, PolicyStack& stack,
                                     const AdamOptimizer& opt, long long episode) {
  NamedTensors named;
  for (Parameter* p : stack.params()) named.emplace_back(p->name, p->value);
  const auto& states = opt.states();
  std::vector<Parameter*> params = stack.params();
  if (!states.empty()) {
    if (states.size() != params.size())
      throw ContractError("save_training_checkpoint: optimizer/parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
      named.emplace_back("adam/m/" + params[i]->name, states[i].m);
      named.emplace_back("adam/v/" + params[i]->name, states[i].v);
      named.emplace_back("adam/step/" + params[i]->name,
                         Tensor::scalar(static_cast<double>(states[i].step)));
    }
  }
  if (stack.cfg.backbone == Backbone::kProGnn && stack.prognn_state.S.size() > 0)
    named.emplace_back("prognn/S", stack.prognn_state.S);
  named.emplace_back("meta/backbone", Tensor::scalar(backbone_code(stack.cfg.backbone)));
  named.emplace_back("meta/episode", Tensor::scalar(static_cast<double>(episode)));
  named.emplace_back("meta/kappa", Tensor::scalar(stack.cfg.kappa));
  save_checkpoint(path, named);
}

/// Restore a checkpoint saved by save_training_checkpoint into an existing
/// stack (whose architecture must match). Returns the stored episode count.
inline long long load_training_checkpoint(const std::string& path, PolicyStack& stack,
                                          AdamOptimizer* opt) {
  NamedTensors named = load_checkpoint(path);
  auto find = [&named](const std::string& name) -> const Tensor* {
    for (auto& [n, t] : named)
      if (n == name) return &t;
    return nullptr;
  };
  const Tensor* bb = find("meta/backbone");
  if (!bb) throw IoError("checkpoint: missing meta/backbone");
  if (static_cast<int>((*bb)(0, 0)) != backbone_code(stack.cfg.backbone))
    throw ConfigError("checkpoint: stored backbone '" +
                      backbone_name(static_cast<Backbone>(static_cast<int>((*bb)(0, 0)))) +
                      "' does not match configured '" + backbone_name(stack.cfg.backbone) + "'");
  std::vector<Parameter*> params = stack.params();
  for (Parameter* p : params) {
    const Tensor* t = find(p->name);
    if (!t) throw IoError("checkpoint: missing parameter " + p->name);
    if (t->rows != p->value.rows || t->cols != p->value.cols)
      throw ConfigError("checkpoint: parameter " + p->name + " has shape " + t->shape_str() +
                        ", expected " + p->value.shape_str());
    p->value.data = t->data;
    p->value.requires_grad = true;
  }
  if (opt) {
    bool have_all = true;
    for (Parameter* p : params)
      if (!find("adam/m/" + p->name)) have_all = false;
    if (have_all) {
      auto& states = opt->states();
      states.assign(params.size(), AdamState{});
      for (size_t i = 0; i < params.size(); ++i) {
        states[i].m = *find("adam/m/" + params[i]->name);
        states[i].v = *find("adam/v/" + params[i]->name);
        states[i].step = static_cast<long long>((*find("adam/step/" + params[i]->name))(0, 0));
      }
    }
  }
  if (const Tensor* s = find("prognn/S"); s && stack.cfg.backbone == Backbone::kProGnn) {
    stack.prognn_state.S = *s;
  }
  const Tensor* ep = find("meta/episode");
  return ep ? static_cast<long long>((*ep)(0, 0)) : 0;
}

}  // namespace amodrl
