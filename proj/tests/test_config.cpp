#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <string>

#include "amodrl/config.hpp"

#include "helpers.hpp"

using namespace amodrl;

namespace {

std::filesystem::path write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path;
}

/// A scenario file plus a run config referencing it by relative path.
struct ConfigDir {
  std::filesystem::path dir;
  std::filesystem::path config;
};

ConfigDir make_config_dir(const std::string& stem, const std::string& config_json) {
  ConfigDir cd;
  cd.dir = testutil::fresh_dir(stem);
  write_file(cd.dir / "scn.json",
             R"({"graph": {"rows": 1, "cols": 2}, "fleet_size": 4, "horizon": 5,)"
             R"( "demand": {"base_rate": 0.5}})");
  cd.config = write_file(cd.dir / "run.json", config_json);
  return cd;
}

}  // namespace

TEST_CASE("scenario json round-trips through serialization", "[config]") {
  Scenario sc;
  sc.grid_rows = 2;
  sc.grid_cols = 3;
  sc.eight_neighborhood = true;
  sc.base_cost = 1.5;
  sc.cost_overrides = {{0, 1, 2.5}};
  sc.fleet_size = 6;
  sc.horizon = 12;
  sc.price_per_trip = 8.0;
  sc.demand.base_rate = 0.25;
  sc.demand.rate_overrides = {{1, 0, 0.75}};
  sc.demand.profile = DemandProfile::kPulse;
  sc.demand.pulse.strength = 2.0;
  sc.demand.pulse.center = {2, 3};
  sc.seed_salt = 99;
  sc.build();

  Json j = scenario_to_json(sc);
  Scenario back = scenario_from_json(j, "test");
  REQUIRE(back.grid_rows == 2);
  REQUIRE(back.grid_cols == 3);
  REQUIRE(back.eight_neighborhood);
  REQUIRE(back.base_cost == 1.5);
  REQUIRE(back.cost_overrides == sc.cost_overrides);
  REQUIRE(back.fleet_size == 6);
  REQUIRE(back.horizon == 12);
  REQUIRE(back.price_per_trip == 8.0);
  REQUIRE(back.demand.base_rate == 0.25);
  REQUIRE(back.demand.rate_overrides == sc.demand.rate_overrides);
  REQUIRE(back.demand.profile == DemandProfile::kPulse);
  REQUIRE(back.demand.pulse.strength == 2.0);
  REQUIRE(back.demand.pulse.center == std::vector<int>{2, 3});
  REQUIRE(back.seed_salt == 99);
  // Serialization is canonical: a second pass emits identical text.
  REQUIRE(scenario_to_json(back).dump(2) == j.dump(2));
}

TEST_CASE("an empty scenario object takes every default", "[config]") {
  Scenario sc = scenario_from_json(Json::object(), "test");
  REQUIRE(sc.grid_rows == 4);
  REQUIRE(sc.grid_cols == 4);
  REQUIRE_FALSE(sc.eight_neighborhood);
  REQUIRE(sc.fleet_size == 8);
  REQUIRE(sc.horizon == 20);
  REQUIRE(sc.price_per_trip == 10.0);
  REQUIRE(sc.demand.base_rate == 0.5);
  REQUIRE(sc.demand.profile == DemandProfile::kConstant);
  REQUIRE(sc.built);
}

TEST_CASE("square shorthand and explicit rows/cols are mutually exclusive", "[config]") {
  Json both = Json::parse(R"({"graph": {"k": 3, "rows": 2}})");
  REQUIRE_THROWS_AS(scenario_from_json(both, "test"), ConfigError);
  Json k = Json::parse(R"({"graph": {"k": 3}})");
  Scenario sc = scenario_from_json(k, "test");
  REQUIRE(sc.grid_rows == 3);
  REQUIRE(sc.grid_cols == 3);
}

TEST_CASE("unknown keys are rejected with their name", "[config]") {
  try {
    scenario_from_json(Json::parse(R"({"fleet": 3})"), "test");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(std::string(e.what()).find("fleet") != std::string::npos);
  }
  REQUIRE_THROWS_AS(scenario_from_json(Json::parse(R"({"graph": {"K": 2}})"), "test"),
                    ConfigError);
  REQUIRE_THROWS_AS(scenario_from_json(Json::parse(R"({"demand": {"rate": 1.0}})"), "test"),
                    ConfigError);
}

TEST_CASE("malformed scenario entries are rejected", "[config]") {
  REQUIRE_THROWS_AS(
      scenario_from_json(Json::parse(R"({"graph": {"neighborhood": 5}})"), "test"), ConfigError);
  REQUIRE_THROWS_AS(
      scenario_from_json(Json::parse(R"({"demand": {"profile": "weird"}})"), "test"),
      ConfigError);
  REQUIRE_THROWS_AS(
      scenario_from_json(Json::parse(R"({"graph": {"cost_overrides": [[0, 1]]}})"), "test"),
      ConfigError);
  REQUIRE_THROWS_AS(scenario_from_json(Json::parse(R"({"fleet_size": "four"})"), "test"),
                    ConfigError);
}

TEST_CASE("json syntax errors carry line and column", "[config]") {
  auto dir = testutil::fresh_dir("cfg_syntax");
  auto bad = write_file(dir / "bad.json", "{\n  \"fleet_size\": ]\n}\n");
  try {
    load_scenario_file(bad.string());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
  }
  REQUIRE_THROWS_AS(load_scenario_file((dir / "absent.json").string()), ConfigError);
}

TEST_CASE("a minimal run config materializes every default", "[config]") {
  ConfigDir cd = make_config_dir("cfg_minimal", R"({"scenario": "scn.json"})");
  ::unsetenv("AMOD_OUT_DIR");
  RunConfig rc = load_run_config(cd.config.string());
  REQUIRE(rc.scenario.n() == 2);
  REQUIRE(rc.policy.backbone == Backbone::kGcn);
  REQUIRE(rc.policy.hidden == 32);
  REQUIRE(rc.policy.kappa == 10.0);
  REQUIRE(rc.train.lr == 0.003);
  REQUIRE(rc.train.gamma == 0.97);
  REQUIRE(rc.train.episodes == 16000);
  REQUIRE(rc.train.grad_clip == 5.0);
  REQUIRE(rc.seeds == std::vector<uint64_t>{1});
  REQUIRE(rc.workers == 1);
  REQUIRE(rc.out_dir == "out");
}

TEST_CASE("the output directory falls back to the environment", "[config]") {
  ConfigDir cd = make_config_dir("cfg_envout", R"({"scenario": "scn.json"})");
  ::setenv("AMOD_OUT_DIR", "env_outputs", 1);
  RunConfig rc = load_run_config(cd.config.string());
  REQUIRE(rc.out_dir == "env_outputs");
  ::unsetenv("AMOD_OUT_DIR");
  ConfigDir cd2 = make_config_dir(
      "cfg_envout2", R"({"scenario": "scn.json", "out_dir": "explicit"})");
  ::setenv("AMOD_OUT_DIR", "env_outputs", 1);
  RunConfig rc2 = load_run_config(cd2.config.string());
  REQUIRE(rc2.out_dir == "explicit");
  ::unsetenv("AMOD_OUT_DIR");
}

TEST_CASE("run config problems are reported as config errors", "[config]") {
  ConfigDir cd = make_config_dir("cfg_bad", R"({"backbone": "gcn"})");
  REQUIRE_THROWS_AS(load_run_config(cd.config.string()), ConfigError);  // missing scenario
  ConfigDir gone = make_config_dir("cfg_gone", R"({"scenario": "nowhere.json"})");
  REQUIRE_THROWS_AS(load_run_config(gone.config.string()), ConfigError);
  ConfigDir work = make_config_dir("cfg_workers",
                                   R"({"scenario": "scn.json", "workers": 0})");
  REQUIRE_THROWS_AS(load_run_config(work.config.string()), ConfigError);
  ConfigDir seeds = make_config_dir("cfg_seeds", R"({"scenario": "scn.json", "seeds": []})");
  REQUIRE_THROWS_AS(load_run_config(seeds.config.string()), ConfigError);
}

TEST_CASE("cli overrides patch the document with parsed types", "[config]") {
  Json j = Json::parse(R"({"train": {"lr": 0.003}})");
  apply_override(j, "train.lr", "0.01");
  apply_override(j, "train.episodes", "100");
  apply_override(j, "backbone", "gat");
  apply_override(j, "seeds", "[3, 4]");
  apply_override(j, "prognn.alpha", "0.5");
  REQUIRE(j["train"]["lr"] == 0.01);
  REQUIRE(j["train"]["episodes"] == 100);
  REQUIRE(j["train"]["episodes"].is_number_integer());
  REQUIRE(j["backbone"] == "gat");
  REQUIRE(j["seeds"] == Json::parse("[3, 4]"));
  REQUIRE(j["prognn"]["alpha"] == 0.5);
}

TEST_CASE("overrides flow through config loading", "[config]") {
  ConfigDir cd = make_config_dir("cfg_override", R"({"scenario": "scn.json"})");
  RunConfig rc = load_run_config(cd.config.string(),
                                 {{"backbone", "ptdnet"},
                                  {"train.lr", "0.001"},
                                  {"ptdnet.tau_end", "0.5"},
                                  {"seeds", "[7, 8, 9]"}});
  REQUIRE(rc.policy.backbone == Backbone::kPtdNet);
  REQUIRE(rc.train.lr == 0.001);
  REQUIRE(rc.policy.ptd_tau_end == 0.5);
  REQUIRE(rc.seeds == std::vector<uint64_t>{7, 8, 9});
}

TEST_CASE("the resolved config echo is deterministic and complete", "[config]") {
  ConfigDir cd = make_config_dir("cfg_echo", R"({"scenario": "scn.json"})");
  ::unsetenv("AMOD_OUT_DIR");
  RunConfig rc = load_run_config(cd.config.string());
  Json echo = run_config_echo(rc);
  REQUIRE(echo.dump(2) == run_config_echo(rc).dump(2));
  REQUIRE(echo["train"]["lr"] == 0.003);
  REQUIRE(echo["train"]["gamma"] == 0.97);
  REQUIRE(echo["backbone"] == "gcn");
  REQUIRE(echo["prognn"]["tau_s"] == 1);
  REQUIRE(echo["ptdnet"]["tau_start"] == 1.0);
  // The embedded scenario is itself loadable and equivalent.
  Scenario back = scenario_from_json(echo["scenario_resolved"], "echo");
  REQUIRE(back.n() == rc.scenario.n());
  REQUIRE(back.horizon == rc.scenario.horizon);
}
