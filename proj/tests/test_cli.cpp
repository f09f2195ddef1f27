#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"

namespace {

namespace fs = std::filesystem;

/// Binary under test, provided by the test harness; skip when run standalone.
std::string cli_bin() {
  const char* env = std::getenv("AMODRL_CLI_BIN");
  return env ? env : "";
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

CliResult run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + cli_bin() + "' " + args +
                          " > cli_stdout.txt 2> cli_stderr.txt";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(dir / "cli_stdout.txt");
  r.err = slurp(dir / "cli_stderr.txt");
  return r;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

/// Two-station scenario + a small run config in a fresh directory.
fs::path make_run_dir(const std::string& stem, const std::string& extra_config = "") {
  fs::path dir = testutil::fresh_dir(stem);
  spit(dir / "scn.json",
       R"({"graph": {"rows": 1, "cols": 2}, "fleet_size": 4, "horizon": 5,)"
       R"( "demand": {"base_rate": 0.5}})");
  spit(dir / "run.json", R"({"scenario": "scn.json", "hidden": 8,)"
                         R"( "train": {"episodes": 4, "ckpt_every": 500}, "seeds": [1],)"
                         R"( "out_dir": "runout")" +
                             extra_config + "}");
  return dir;
}

#define REQUIRE_CLI_AVAILABLE() \
  if (cli_bin().empty()) SKIP("AMODRL_CLI_BIN not set; cli tests need the built binary")

}  // namespace

TEST_CASE("help prints the subcommands and succeeds", "[cli]") {
  REQUIRE_CLI_AVAILABLE();
  fs::path dir = testutil::fresh_dir("cli_help");
  CliResult r = run_cli(dir, "--help");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("train") != std::string::npos);
  REQUIRE(r.out.find("eval") != std::string::npos);
  REQUIRE(r.out.find("sweep") != std::string::npos);
  REQUIRE(r.out.find("gradcheck") != std::string::npos);
}

TEST_CASE("bad invocations exit with the configuration code", "[cli]") {
  REQUIRE_CLI_AVAILABLE();
  fs::path dir = testutil::fresh_dir("cli_bad");
  REQUIRE(run_cli(dir, "").exit_code == 2);                                // no subcommand
  REQUIRE(run_cli(dir, "train --config missing.json").exit_code == 2);    // absent file
  REQUIRE(run_cli(dir, "train --config run.json --bogus 1").exit_code == 2);
}

TEST_CASE("a syntax error in the config names its location", "[cli]") {
  REQUIRE_CLI_AVAILABLE();
  fs::path dir = testutil::fresh_dir("cli_syntax");
  spit(dir / "run.json", "{\n  \"scenario\": ]\n}\n");
  CliResult r = run_cli(dir, "train --config run.json");
  REQUIRE(r.exit_code == 2);
  REQUIRE(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("training writes a log, checkpoints and the resolved config", "[cli]") {
  REQUIRE_CLI_AVAILABLE();
  fs::path dir = make_run_dir("cli_train");
  CliResult r = run_cli(dir, "train --config run.json");
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "runout" / "resolved_config.json"));
  REQUIRE(fs::exists(dir / "runout" / "ckpt_gcn_seed1_final.bin"));
  const std::string log = slurp(dir / "runout" / "train_gcn_seed1.csv");
  REQUIRE(count_lines(log) == 5);  // header + 4 episodes
  REQUIRE(log.rfind("episode,reward,served,rebal_cost,policy_loss,value_loss,entropy\n", 0) == 0);
}

TEST_CASE("evaluation reports models and baselines into results.csv", "[cli]") {
  REQUIRE_CLI_AVAILABLE();
  fs::path dir = make_run_dir("cli_eval");
  REQUIRE(run_cli(dir, "train --config run.json").exit_code == 0);
  CliResult r = run_cli(dir,
                        "eval --config run.json --checkpoint runout/ckpt_gcn_seed1_final.bin "
                        "--baseline no_rebalance --episodes 3");
  REQUIRE(r.exit_code == 0);
  const std::string results = slurp(dir / "runout" / "results.csv");
  REQUIRE(count_lines(results) == 3);  // header + model + baseline
  REQUIRE(results.rfind("model,backbone,k,seed,episodes,", 0) == 0);
  REQUIRE(results.find("gcn-trained") != std::string::npos);
  REQUIRE(results.find("no_rebalance") != std::string::npos);
  // Nothing to evaluate is a configuration error.
  REQUIRE(run_cli(dir, "eval --config run.json").exit_code == 2);
}

TEST_CASE("evaluation output is byte deterministic across runs", "[cli]") {
  REQUIRE_CLI_AVAILABLE();
  fs::path dir = make_run_dir("cli_det");
  const std::string args =
      "eval --config run.json --baseline uniform_distribution --episodes 5 --seed 3 4";
  REQUIRE(run_cli(dir, args).exit_code == 0);
  const std::string first = slurp(dir / "runout" / "results.csv");
  REQUIRE(run_cli(dir, args).exit_code == 0);
  const std::string second = slurp(dir / "runout" / "results.csv");
  REQUIRE(first == second);
  REQUIRE(count_lines(first) == 3);  // header + one row per seed
  const std::string echo1 = slurp(dir / "runout" / "resolved_config.json");
  REQUIRE(run_cli(dir, args).exit_code == 0);
  REQUIRE(slurp(dir / "runout" / "resolved_config.json") == echo1);
}

TEST_CASE("the sweep emits a csv table and an svg chart", "[cli]") {
  REQUIRE_CLI_AVAILABLE();
  fs::path dir = make_run_dir("cli_sweep");
  REQUIRE(run_cli(dir, "train --config run.json").exit_code == 0);
  CliResult r = run_cli(dir,
                        "sweep --config run.json --checkpoint runout/ckpt_gcn_seed1_final.bin "
                        "--k 2 3 --episodes 2");
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "runout" / "sweep.csv");
  REQUIRE(csv.rfind("k,backbone,reward,served,cost\n", 0) == 0);
  REQUIRE(count_lines(csv) == 5);  // header + 2 grid sizes x (gcn + no_rebalance)
  REQUIRE(csv.find("no_rebalance") != std::string::npos);
  const std::string svg = slurp(dir / "runout" / "sweep.svg");
  REQUIRE(svg.rfind("<svg xmlns=", 0) == 0);
  REQUIRE(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("trajectory dumps land one file per model and seed", "[cli]") {
  REQUIRE_CLI_AVAILABLE();
  fs::path dir = make_run_dir("cli_traj");
  CliResult r = run_cli(
      dir, "eval --config run.json --baseline no_rebalance --episodes 2 --trajectories");
  REQUIRE(r.exit_code == 0);
  const std::string traj = slurp(dir / "runout" / "traj_no_rebalance_seed1.csv");
  REQUIRE(traj.rfind("t,v0,v1,served,revenue,rebal_cost,reward\n", 0) == 0);
  REQUIRE(count_lines(traj) == 6);  // header + horizon rows
}

TEST_CASE("gradient checks pass from the command line", "[cli]") {
  REQUIRE_CLI_AVAILABLE();
  fs::path dir = testutil::fresh_dir("cli_gradcheck");
  CliResult r = run_cli(dir, "gradcheck --instances 1");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find(" 0 failures") != std::string::npos);
  REQUIRE(r.out.find("FAIL") == std::string::npos);
}
