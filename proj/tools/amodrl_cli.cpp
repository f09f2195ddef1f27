// Command-line driver: train / eval / sweep / gradcheck subcommands over a
// JSON run config, with --section.key overrides mirroring the config schema.
//
// Exit codes: 0 success, 1 a check failed, 2 configuration error,
// 3 numeric abort (diagnostics dumped next to the outputs).

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "amodrl/commands.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Register one `--section.key <value>` option that records into `overrides`.
void add_override(CLI::App* cmd, Overrides& overrides, const std::string& path,
                  const std::string& help) {
  cmd->add_option_function<std::string>(
      "--" + path, [&overrides, path](const std::string& v) { overrides.emplace_back(path, v); },
      help);
}

/// The full closed set of config fields, each overridable from the CLI.
void add_config_overrides(CLI::App* cmd, Overrides& overrides) {
  add_override(cmd, overrides, "scenario", "scenario JSON path");
  add_override(cmd, overrides, "backbone", "policy backbone: gcn|gat|prognn|ptdnet");
  add_override(cmd, overrides, "gat_heads", "attention heads for the gat backbone");
  add_override(cmd, overrides, "kappa", "concentration scale of the Dirichlet head");
  add_override(cmd, overrides, "hidden", "hidden width of every layer");
  add_override(cmd, overrides, "prognn.alpha", "sparsity weight");
  add_override(cmd, overrides, "prognn.beta", "low-rank weight");
  add_override(cmd, overrides, "prognn.eta", "refinement step size");
  add_override(cmd, overrides, "prognn.tau_s", "refinement steps per episode");
  add_override(cmd, overrides, "prognn.allow_fill_in", "allow edges outside the support");
  add_override(cmd, overrides, "prognn.joint_task_gradient", "feed task gradient into S");
  add_override(cmd, overrides, "ptdnet.tau_start", "initial sampling temperature");
  add_override(cmd, overrides, "ptdnet.tau_end", "final sampling temperature");
  add_override(cmd, overrides, "train.lr", "Adam learning rate");
  add_override(cmd, overrides, "train.gamma", "discount factor");
  add_override(cmd, overrides, "train.episodes", "training episodes");
  add_override(cmd, overrides, "train.value_coef", "critic loss weight");
  add_override(cmd, overrides, "train.entropy_coef", "entropy bonus weight");
  add_override(cmd, overrides, "train.grad_clip", "global gradient-norm clip");
  add_override(cmd, overrides, "train.ckpt_every", "checkpoint cadence in episodes");
  add_override(cmd, overrides, "seeds", "seed list as a JSON array, e.g. [1,2,3]");
  add_override(cmd, overrides, "out_dir", "output directory (default: $AMOD_OUT_DIR or ./out)");
  add_override(cmd, overrides, "workers", "evaluation worker threads");
}

struct CommonArgs {
  std::string config_path;
  Overrides overrides;
  std::vector<uint64_t> seed_sugar;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  add_config_overrides(cmd, args.overrides);
  cmd->add_option("--seed", args.seed_sugar, "shorthand: replace the seed list")
      ->expected(1, 64);
}

amodrl::RunConfig load_config(CommonArgs& args) {
  if (!args.seed_sugar.empty()) {
    std::string list = "[";
    for (size_t i = 0; i < args.seed_sugar.size(); ++i)
      list += (i ? "," : "") + std::to_string(args.seed_sugar[i]);
    list += "]";
    args.overrides.emplace_back("seeds", list);
  }
  return amodrl::load_run_config(args.config_path, args.overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fleet rebalancing on a grid city: A2C training with GNN policy backbones"};
  app.require_subcommand(1);

  CommonArgs train_args;
  amodrl::TrainOptions train_opts;
  CLI::App* train = app.add_subcommand("train", "train a policy and write checkpoints + log");
  add_common(train, train_args);
  train->add_option("--resume", train_opts.resume, "checkpoint to continue from")
      ->check(CLI::ExistingFile);
  train->add_option_function<long long>(
      "--episodes",
      [&train_args](long long v) {
        train_args.overrides.emplace_back("train.episodes", std::to_string(v));
      },
      "shorthand for --train.episodes");

  CommonArgs eval_args;
  amodrl::EvalOptions eval_opts;
  CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints and baselines");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", eval_opts.checkpoint, "trained checkpoint to evaluate")
      ->check(CLI::ExistingFile);
  eval->add_option(
      "--baseline", eval_opts.baselines,
      "baseline policy: no_rebalance|uniform_distribution|random_dirichlet (repeatable)");
  eval->add_option("--episodes", eval_opts.episodes, "evaluation episodes per seed");
  eval->add_flag("--oracle", eval_opts.oracle,
                 "report deviation from the frozen-seed exhaustive oracle (small scenarios)");
  eval->add_flag("--stochastic", eval_opts.stochastic, "sample actions instead of the mean");
  eval->add_flag("--trajectories", eval_opts.trajectories, "dump one per-step trajectory CSV");
  eval->add_flag("--svg", eval_opts.svg, "write a reward chart next to the results");

  CommonArgs sweep_args;
  amodrl::SweepOptions sweep_opts;
  CLI::App* sweep = app.add_subcommand("sweep", "zero-shot granularity sweep over grid sizes");
  add_common(sweep, sweep_args);
  sweep->add_option("--checkpoint", sweep_opts.checkpoints, "checkpoints, one per backbone")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--k", sweep_opts.k_list, "grid sizes to evaluate (default 4 6 8)");
  sweep->add_option("--episodes", sweep_opts.episodes, "evaluation episodes per grid size");
  sweep->add_flag("!--no-baseline", sweep_opts.baseline, "drop the no_rebalance reference");

  amodrl::GradCheckOptions gc_opts;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient checks for ops and models");
  gradcheck->add_option("--seed", gc_opts.seed, "seed for the randomized instances");
  gradcheck->add_option("--instances", gc_opts.instances, "random instances per check")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return amodrl::kExitConfig;
  }

  try {
    if (*train) return amodrl::cmd_train(load_config(train_args), train_opts, std::cout);
    if (*eval) return amodrl::cmd_eval(load_config(eval_args), eval_opts, std::cout);
    if (*sweep) return amodrl::cmd_sweep(load_config(sweep_args), sweep_opts, std::cout);
    if (*gradcheck) return amodrl::cmd_gradcheck(gc_opts, std::cout);
  } catch (const amodrl::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return amodrl::kExitNumeric;
  } catch (const amodrl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return amodrl::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return amodrl::kExitCheckFailed;
  }
  return amodrl::kExitOk;
}
