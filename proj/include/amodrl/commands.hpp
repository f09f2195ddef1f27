#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "amodrl/a2c.hpp"
#include "amodrl/config.hpp"
#include "amodrl/eval.hpp"
#include "amodrl/gradcheck.hpp"
#include "amodrl/svg.hpp"

namespace amodrl {

// Process exit codes shared by all subcommands.
constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

inline void write_config_echo(const RunConfig& rc) {
  write_text_file((std::filesystem::path(rc.out_dir) / "resolved_config.json").string(),
                  run_config_echo(rc).dump(2) + "\n");
}

/// Read only the stored backbone tag from a checkpoint, so eval/sweep can
/// construct a matching stack before the full load.
inline Backbone peek_checkpoint_backbone(const std::string& path) {
  NamedTensors named = load_checkpoint(path);
  for (auto& [name, t] : named)
    if (name == "meta/backbone") {
      const int code = static_cast<int>(t(0, 0));
      if (code < 0 || code > 3) throw IoError(path + ": invalid backbone code in checkpoint");
      return static_cast<Backbone>(code);
    }
  throw IoError(path + ": missing meta/backbone");
}

/// Diagnostic dump written on a numeric abort (exit code 3): the failed episode
/// plus summary statistics of every parameter.
inline std::string write_numeric_dump(const RunConfig& rc, PolicyStack& stack,
                                      long long episode, const std::string& message,
                                      uint64_t seed) {
  Json j;
  j["error"] = message;
  j["episode"] = episode;
  j["seed"] = seed;
  j["backbone"] = backbone_name(stack.cfg.backbone);
  Json params = Json::array();
  for (Parameter* p : stack.params()) {
    Json e;
    e["name"] = p->name;
    e["rows"] = p->value.rows;
    e["cols"] = p->value.cols;
    double lo = 0.0, hi = 0.0, sum = 0.0;
    long long non_finite = 0;
    for (size_t i = 0; i < p->value.data.size(); ++i) {
      const double v = p->value.data[i];
      if (!std::isfinite(v)) {
        non_finite += 1;
        continue;
      }
      if (i == 0 || v < lo) lo = v;
      if (i == 0 || v > hi) hi = v;
      sum += v;
    }
    e["min"] = lo;
    e["max"] = hi;
    e["mean"] = p->value.data.empty() ? 0.0 : sum / static_cast<double>(p->value.data.size());
    e["non_finite"] = non_finite;
    params.push_back(e);
  }
  j["parameters"] = params;
  const std::string path =
      (std::filesystem::path(rc.out_dir) / ("numeric_abort_seed" + std::to_string(seed) + ".json"))
          .string();
  write_text_file(path, j.dump(2) + "\n");
  return path;
}

inline std::string ckpt_path(const RunConfig& rc, uint64_t seed, const std::string& tag) {
  return (std::filesystem::path(rc.out_dir) /
          ("ckpt_" + backbone_name(rc.policy.backbone) + "_seed" + std::to_string(seed) + "_" +
           tag + ".bin"))
      .string();
}

inline bool oracle_feasible(const Scenario& sc) {
  return sc.n() <= 3 && sc.fleet_size <= 6 && sc.horizon <= 64;
}

}  // namespace detail

// ---- train ----

struct TrainOptions {
  std::string resume;       // checkpoint to continue from (single seed only)
  long long log_every = 1;  // CSV at every episode; progress print cadence below
};

inline int cmd_train(const RunConfig& rc, const TrainOptions& opts, std::ostream& out) {
  detail::ensure_dir(rc.out_dir);
  detail::write_config_echo(rc);
  if (!opts.resume.empty() && rc.seeds.size() != 1)
    throw ConfigError("train: --resume requires exactly one seed");

  for (uint64_t seed : rc.seeds) {
    PolicyStack stack(rc.policy);
    stack.init_weights(seed);
    Trainer trainer(stack, rc.scenario, rc.train);
    long long start_episode = 0;
    if (!opts.resume.empty()) {
      start_episode = load_training_checkpoint(opts.resume, stack, &trainer.optimizer());
      trainer.set_episodes_done(start_episode);
      out << "resumed " << opts.resume << " at episode " << start_episode << "\n";
    }

    const std::string csv_path =
        (std::filesystem::path(rc.out_dir) /
         ("train_" + backbone_name(rc.policy.backbone) + "_seed" + std::to_string(seed) + ".csv"))
            .string();
    const bool append = start_episode > 0 && std::filesystem::exists(csv_path);
    std::ofstream csv(csv_path, append ? std::ios::app : std::ios::trunc);
    if (!csv) throw IoError("cannot open " + csv_path + " for writing");
    if (!append) csv << "episode,reward,served,rebal_cost,policy_loss,value_loss,entropy\n";

    const long long total = rc.train.episodes;
    const long long progress_every = std::max<long long>(1, total / 20);
    try {
      while (trainer.episodes_done() < total) {
        const TrainLogRow row = trainer.train_episode(seed);
        csv << row.episode << "," << fmt_double(row.reward) << "," << row.served << ","
            << fmt_double(row.rebal_cost) << "," << fmt_double(row.policy_loss) << ","
            << fmt_double(row.value_loss) << "," << fmt_double(row.entropy) << "\n";
        const long long done = row.episode + 1;
        if (done % progress_every == 0 || done == total)
          out << "seed " << seed << " episode " << done << "/" << total << " reward "
              << fmt_double(row.reward) << "\n";
        if (done % rc.train.ckpt_every == 0 && done != total)
          save_training_checkpoint(detail::ckpt_path(rc, seed, "ep" + std::to_string(done)),
                                   stack, trainer.optimizer(), done);
      }
    } catch (const NumericError& e) {
      csv.flush();
      const std::string dump = detail::write_numeric_dump(rc, stack, trainer.episodes_done(),
                                                          e.what(), seed);
      out << "numeric abort: " << e.what() << "\n"
          << "diagnostics written to " << dump << "\n";
      return kExitNumeric;
    }
    save_training_checkpoint(detail::ckpt_path(rc, seed, "final"), stack, trainer.optimizer(),
                             trainer.episodes_done());
    out << "seed " << seed << " done; checkpoint " << detail::ckpt_path(rc, seed, "final")
        << "\n";
  }
  return kExitOk;
}

// ---- eval ----

struct EvalOptions {
  std::string checkpoint;              // trained stack to evaluate (optional)
  std::vector<std::string> baselines;  // names accepted by parse_baseline
  int episodes = 100;
  bool oracle = false;      // add frozen-seed oracle deviation where feasible
  bool stochastic = false;  // sample the policy instead of using its mean
  bool trajectories = false;
  bool svg = false;
};

namespace detail {

/// Build a stack matching a checkpoint's stored backbone and load its weights.
inline std::unique_ptr<PolicyStack> load_eval_stack(const RunConfig& rc,
                                                    const std::string& path) {
  PolicyConfig cfg = rc.policy;
  cfg.backbone = peek_checkpoint_backbone(path);
  auto stack = std::make_unique<PolicyStack>(cfg);
  stack->attach_graph(rc.scenario.graph);
  load_training_checkpoint(path, *stack, nullptr);
  return stack;
}

}  // namespace detail

inline int cmd_eval(const RunConfig& rc, const EvalOptions& opts, std::ostream& out) {
  detail::ensure_dir(rc.out_dir);
  detail::write_config_echo(rc);
  if (opts.checkpoint.empty() && opts.baselines.empty())
    throw ConfigError("eval: nothing to evaluate; give --checkpoint and/or --baseline");

  struct Model {
    std::string name;
    std::string backbone;
    PolicyFn policy;
  };
  std::vector<Model> models;
  std::unique_ptr<PolicyStack> stack;
  if (!opts.checkpoint.empty()) {
    stack = detail::load_eval_stack(rc, opts.checkpoint);
    const std::string bb = backbone_name(stack->cfg.backbone);
    models.push_back({bb + "-trained", bb,
                      make_stack_policy(*stack, opts.stochastic, stack->cfg.ptd_tau_end)});
  }
  for (const std::string& name : opts.baselines) {
    const BaselineKind kind = parse_baseline(name);
    models.push_back({baseline_name(kind), "none", make_baseline_policy(kind)});
  }

  const bool with_oracle = opts.oracle && detail::oracle_feasible(rc.scenario);
  if (opts.oracle && !with_oracle)
    out << "oracle deviation skipped: scenario too large for exhaustive search\n";

  const std::string results_path =
      (std::filesystem::path(rc.out_dir) / "results.csv").string();
  std::ofstream results(results_path, std::ios::trunc);
  if (!results) throw IoError("cannot open " + results_path + " for writing");
  write_results_header(results);
  std::vector<EvalResult> all;
  for (const Model& m : models)
    for (uint64_t seed : rc.seeds) {
      EvalResult r = evaluate(rc.scenario, m.policy, m.name, m.backbone, seed, opts.episodes,
                              /*eval_root=*/seed, with_oracle, rc.workers);
      r.k = rc.scenario.grid_rows;
      write_results_row(results, r);
      all.push_back(r);
      out << m.name << " seed " << seed << ": reward " << fmt_double(r.reward_mean) << " +/- "
          << fmt_double(r.reward_se) << ", served " << fmt_double(r.served_mean) << ", cost "
          << fmt_double(r.cost_mean);
      if (r.dev_pct) out << ", oracle dev " << fmt_double(*r.dev_pct) << "%";
      out << "\n";
    }
  results.flush();
  out << "results written to " << results_path << "\n";

  if (opts.trajectories)
    for (const Model& m : models)
      for (uint64_t seed : rc.seeds) {
        EpisodeRun run = run_episode(rc.scenario, m.policy, eval_episode_seed(seed, 0));
        const std::string path =
            (std::filesystem::path(rc.out_dir) /
             ("traj_" + m.name + "_seed" + std::to_string(seed) + ".csv"))
                .string();
        std::ofstream traj(path, std::ios::trunc);
        if (!traj) throw IoError("cannot open " + path + " for writing");
        write_trajectory_csv(traj, run.trajectory, rc.scenario.n());
      }

  if (opts.svg) {
    std::vector<SvgSeries> series;
    for (const Model& m : models) {
      SvgSeries s;
      s.label = m.name;
      for (size_t i = 0; i < rc.seeds.size(); ++i)
        for (const EvalResult& r : all)
          if (r.model == m.name && r.seed == rc.seeds[i])
            s.points.emplace_back(static_cast<double>(i), r.reward_mean);
      series.push_back(std::move(s));
    }
    const std::string path = (std::filesystem::path(rc.out_dir) / "results.svg").string();
    std::ofstream svg(path, std::ios::trunc);
    if (!svg) throw IoError("cannot open " + path + " for writing");
    write_svg_chart(svg, series, "Evaluation reward", "seed index", "mean episode reward");
  }
  return kExitOk;
}

// ---- sweep ----

struct SweepOptions {
  std::vector<std::string> checkpoints;  // one polyline per checkpoint's backbone
  std::vector<int> k_list = {4, 6, 8};
  int episodes = 20;
  bool baseline = true;  // add a no_rebalance reference series
};

inline int cmd_sweep(const RunConfig& rc, const SweepOptions& opts, std::ostream& out) {
  detail::ensure_dir(rc.out_dir);
  detail::write_config_echo(rc);
  if (opts.checkpoints.empty())
    throw ConfigError("sweep: at least one --checkpoint is required");
  for (int k : opts.k_list)
    if (k < 2) throw ConfigError("sweep: grid size must be >= 2, got " + std::to_string(k));
  const uint64_t eval_root = rc.seeds.front();

  std::vector<SweepRow> rows;
  for (const std::string& path : opts.checkpoints) {
    std::unique_ptr<PolicyStack> stack = detail::load_eval_stack(rc, path);
    std::vector<SweepRow> r =
        sweep_granularity(*stack, opts.k_list, opts.episodes, eval_root, rc.workers);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (opts.baseline)
    for (int k : opts.k_list) {
      Scenario sc = make_pulse_scenario(k);
      EvalResult r = evaluate(sc, make_baseline_policy(BaselineKind::kNoRebalance),
                              "no_rebalance", "none", eval_root, opts.episodes, eval_root,
                              /*with_oracle=*/false, rc.workers);
      SweepRow row;
      row.k = k;
      row.backbone = "no_rebalance";
      row.reward = r.reward_mean;
      row.served = r.served_mean;
      row.cost = r.cost_mean;
      rows.push_back(row);
    }

  const std::string csv_path = (std::filesystem::path(rc.out_dir) / "sweep.csv").string();
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw IoError("cannot open " + csv_path + " for writing");
  write_sweep_header(csv);
  for (const SweepRow& r : rows) write_sweep_row(csv, r);
  csv.flush();

  std::vector<SvgSeries> series;
  for (const SweepRow& r : rows) {
    SvgSeries* s = nullptr;
    for (SvgSeries& existing : series)
      if (existing.label == r.backbone) s = &existing;
    if (!s) {
      series.push_back({r.backbone, {}});
      s = &series.back();
    }
    s->points.emplace_back(static_cast<double>(r.k), r.reward);
  }
  const std::string svg_path = (std::filesystem::path(rc.out_dir) / "sweep.svg").string();
  std::ofstream svg(svg_path, std::ios::trunc);
  if (!svg) throw IoError("cannot open " + svg_path + " for writing");
  write_svg_chart(svg, series, "Zero-shot granularity sweep", "grid size k",
                  "mean episode reward");

  for (const SweepRow& r : rows)
    out << "k=" << r.k << " " << r.backbone << ": reward " << fmt_double(r.reward) << "\n";
  out << "sweep written to " << csv_path << " and " << svg_path << "\n";
  return kExitOk;
}

// ---- gradcheck ----

struct GradCheckOptions {
  uint64_t seed = 1;
  int instances = 3;
};

inline int cmd_gradcheck(const GradCheckOptions& opts, std::ostream& out) {
  std::vector<GradCheckResult> results = gradcheck_ops(opts.seed, opts.instances);
  std::vector<GradCheckResult> more = gradcheck_backbones(opts.seed, opts.instances);
  results.insert(results.end(), more.begin(), more.end());
  more = gradcheck_policy(opts.seed, opts.instances);
  results.insert(results.end(), more.begin(), more.end());

  int failures = 0;
  for (const GradCheckResult& r : results) {
    out << (r.pass ? "PASS" : "FAIL") << " " << r.name << " max_rel_err "
        << fmt_double(r.max_rel_err) << " (tol " << fmt_double(r.tolerance) << ")\n";
    if (!r.pass) failures += 1;
  }
  out << results.size() << " checks, " << failures << " failures\n";
  return failures == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace amodrl
