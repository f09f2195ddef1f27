#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amodrl/a2c.hpp"
#include "amodrl/env.hpp"
#include "amodrl/errors.hpp"
#include "amodrl/policy.hpp"

namespace amodrl {

using Json = nlohmann::ordered_json;

namespace detail {

/// Convert a byte offset from a JSON syntax error into "line L, column C".
inline std::string offset_to_line_col(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      line += 1;
      col = 1;
    } else {
      col += 1;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline Json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + " (" + offset_to_line_col(text, e.byte) + "): " + e.what());
  }
}

/// Reject any key not in `allowed` (so typos never pass silently).
inline void require_keys(const Json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const Json& obj, const std::string& key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

/// Parse a scenario object (see README for the schema).
inline Scenario scenario_from_json(const Json& j, const std::string& where) {
  detail::require_keys(j, {"graph", "fleet_size", "horizon", "price_per_trip", "demand",
                           "carry_over", "seed_salt"},
                       where);
  Scenario sc;
  if (j.contains("graph")) {
    const Json& g = j.at("graph");
    detail::require_keys(g, {"k", "rows", "cols", "neighborhood", "base_cost", "cost_overrides"},
                         where + ".graph");
    if (g.contains("k")) {
      if (g.contains("rows") || g.contains("cols"))
        throw ConfigError(where + ".graph: give either k or rows/cols, not both");
      sc.grid_rows = sc.grid_cols = detail::get_or<int>(g, "k", 4, where + ".graph");
    } else {
      sc.grid_rows = detail::get_or<int>(g, "rows", 4, where + ".graph");
      sc.grid_cols = detail::get_or<int>(g, "cols", 4, where + ".graph");
    }
    const int nbhd = detail::get_or<int>(g, "neighborhood", 4, where + ".graph");
    if (nbhd != 4 && nbhd != 8)
      throw ConfigError(where + ".graph.neighborhood: must be 4 or 8");
    sc.eight_neighborhood = nbhd == 8;
    sc.base_cost = detail::get_or<double>(g, "base_cost", 1.0, where + ".graph");
    if (g.contains("cost_overrides"))
      for (const Json& e : g.at("cost_overrides")) {
        if (!e.is_array() || e.size() != 3)
          throw ConfigError(where + ".graph.cost_overrides: entries must be [i, j, cost]");
        sc.cost_overrides.emplace_back(e[0].get<int>(), e[1].get<int>(), e[2].get<double>());
      }
  }
  sc.fleet_size = detail::get_or<int>(j, "fleet_size", sc.fleet_size, where);
  sc.horizon = detail::get_or<int>(j, "horizon", sc.horizon, where);
  sc.price_per_trip = detail::get_or<double>(j, "price_per_trip", sc.price_per_trip, where);
  sc.carry_over = detail::get_or<bool>(j, "carry_over", false, where);
  sc.seed_salt = detail::get_or<uint64_t>(j, "seed_salt", 0, where);
  if (j.contains("demand")) {
    const Json& d = j.at("demand");
    detail::require_keys(d, {"base_rate", "rate_overrides", "profile", "pulse"},
                         where + ".demand");
    sc.demand.base_rate = detail::get_or<double>(d, "base_rate", 0.5, where + ".demand");
    if (d.contains("rate_overrides"))
      for (const Json& e : d.at("rate_overrides")) {
        if (!e.is_array() || e.size() != 3)
          throw ConfigError(where + ".demand.rate_overrides: entries must be [i, j, rate]");
        sc.demand.rate_overrides.emplace_back(e[0].get<int>(), e[1].get<int>(),
                                              e[2].get<double>());
      }
    const std::string profile =
        detail::get_or<std::string>(d, "profile", "constant", where + ".demand");
    if (profile == "constant") sc.demand.profile = DemandProfile::kConstant;
    else if (profile == "pulse") sc.demand.profile = DemandProfile::kPulse;
    else throw ConfigError(where + ".demand.profile: expected 'constant' or 'pulse'");
    if (d.contains("pulse")) {
      const Json& p = d.at("pulse");
      detail::require_keys(p, {"strength", "center"}, where + ".demand.pulse");
      sc.demand.pulse.strength =
          detail::get_or<double>(p, "strength", 3.0, where + ".demand.pulse");
      if (p.contains("center"))
        for (const Json& c : p.at("center")) sc.demand.pulse.center.push_back(c.get<int>());
    }
  }
  sc.build();
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  return scenario_from_json(detail::parse_json_file(path), path);
}

inline Json scenario_to_json(const Scenario& sc) {
  Json g;
  g["rows"] = sc.grid_rows;
  g["cols"] = sc.grid_cols;
  g["neighborhood"] = sc.eight_neighborhood ? 8 : 4;
  g["base_cost"] = sc.base_cost;
  Json cost = Json::array();
  for (auto& [i, j, c] : sc.cost_overrides) cost.push_back({i, j, c});
  g["cost_overrides"] = cost;
  Json d;
  d["base_rate"] = sc.demand.base_rate;
  Json rates = Json::array();
  for (auto& [i, j, r] : sc.demand.rate_overrides) rates.push_back({i, j, r});
  d["rate_overrides"] = rates;
  d["profile"] = sc.demand.profile == DemandProfile::kPulse ? "pulse" : "constant";
  Json p;
  p["strength"] = sc.demand.pulse.strength;
  p["center"] = sc.demand.pulse.center;
  d["pulse"] = p;
  Json j;
  j["graph"] = g;
  j["fleet_size"] = sc.fleet_size;
  j["horizon"] = sc.horizon;
  j["price_per_trip"] = sc.price_per_trip;
  j["demand"] = d;
  j["carry_over"] = sc.carry_over;
  j["seed_salt"] = sc.seed_salt;
  return j;
}

/// Everything one run needs: scenario, backbone + hyperparameters, training
/// settings, seeds and output directory.
struct RunConfig {
  std::string scenario_path;
  Scenario scenario;
  PolicyConfig policy;
  TrainConfig train;
  std::vector<uint64_t> seeds = {1};
  std::string out_dir;
  int workers = 1;

  void validate() const {
    policy.validate();
    train.validate();
    if (seeds.empty()) throw ConfigError("config: seeds must be non-empty");
    if (workers < 1) throw ConfigError("config: workers must be >= 1");
  }
};

/// Apply `--section.key value` CLI overrides onto the raw JSON document.
inline void apply_override(Json& j, const std::string& dotted, const std::string& value) {
  Json* cur = &j;
  std::string rest = dotted;
  while (true) {
    const size_t dot = rest.find('.');
    const std::string head = rest.substr(0, dot);
    if (dot == std::string::npos) {
      Json parsed;
      try {
        parsed = Json::parse(value);
      } catch (const nlohmann::json::parse_error&) {
        parsed = value;  // bare string
      }
      (*cur)[head] = parsed;
      return;
    }
    if (!cur->contains(head) || !(*cur)[head].is_object()) (*cur)[head] = Json::object();
    cur = &(*cur)[head];
    rest = rest.substr(dot + 1);
  }
}

/// Parse the run config document (after overrides). `base_dir` resolves a
/// relative scenario path.
inline RunConfig run_config_from_json(Json j, const std::string& where,
                                      const std::string& base_dir) {
  detail::require_keys(j, {"scenario", "backbone", "gat_heads", "kappa", "hidden", "prognn",
                           "ptdnet", "train", "seeds", "out_dir", "workers"},
                       where);
  RunConfig rc;
  if (!j.contains("scenario")) throw ConfigError(where + ": missing required key 'scenario'");
  rc.scenario_path = j.at("scenario").get<std::string>();
  std::filesystem::path sp(rc.scenario_path);
  if (sp.is_relative() && !base_dir.empty()) sp = std::filesystem::path(base_dir) / sp;
  if (!std::filesystem::exists(sp))
    throw ConfigError(where + ".scenario: file not found: " + sp.string());
  rc.scenario_path = sp.string();
  rc.scenario = load_scenario_file(rc.scenario_path);

  rc.policy.backbone =
      parse_backbone(detail::get_or<std::string>(j, "backbone", "gcn", where));
  rc.policy.gat_heads = detail::get_or<int>(j, "gat_heads", 1, where);
  rc.policy.kappa = detail::get_or<double>(j, "kappa", 10.0, where);
  rc.policy.hidden = detail::get_or<int>(j, "hidden", 32, where);
  if (j.contains("prognn")) {
    const Json& p = j.at("prognn");
    detail::require_keys(p, {"alpha", "beta", "eta", "tau_s", "allow_fill_in",
                             "joint_task_gradient"},
                         where + ".prognn");
    rc.policy.prognn.alpha = detail::get_or<double>(p, "alpha", 0.01, where + ".prognn");
    rc.policy.prognn.beta = detail::get_or<double>(p, "beta", 0.01, where + ".prognn");
    rc.policy.prognn.eta = detail::get_or<double>(p, "eta", 0.01, where + ".prognn");
    rc.policy.prognn.tau_s = detail::get_or<int>(p, "tau_s", 1, where + ".prognn");
    rc.policy.prognn.allow_fill_in =
        detail::get_or<bool>(p, "allow_fill_in", false, where + ".prognn");
    rc.policy.prognn.joint_task_gradient =
        detail::get_or<bool>(p, "joint_task_gradient", true, where + ".prognn");
  }
  if (j.contains("ptdnet")) {
    const Json& p = j.at("ptdnet");
    detail::require_keys(p, {"tau_start", "tau_end"}, where + ".ptdnet");
    rc.policy.ptd_tau_start = detail::get_or<double>(p, "tau_start", 1.0, where + ".ptdnet");
    rc.policy.ptd_tau_end = detail::get_or<double>(p, "tau_end", 0.3, where + ".ptdnet");
  }
  if (j.contains("train")) {
    const Json& t = j.at("train");
    detail::require_keys(t, {"lr", "gamma", "episodes", "value_coef", "entropy_coef",
                             "grad_clip", "ckpt_every"},
                         where + ".train");
    rc.train.lr = detail::get_or<double>(t, "lr", rc.train.lr, where + ".train");
    rc.train.gamma = detail::get_or<double>(t, "gamma", rc.train.gamma, where + ".train");
    rc.train.episodes =
        detail::get_or<long long>(t, "episodes", rc.train.episodes, where + ".train");
    rc.train.value_coef =
        detail::get_or<double>(t, "value_coef", rc.train.value_coef, where + ".train");
    rc.train.entropy_coef =
        detail::get_or<double>(t, "entropy_coef", rc.train.entropy_coef, where + ".train");
    rc.train.grad_clip =
        detail::get_or<double>(t, "grad_clip", rc.train.grad_clip, where + ".train");
    rc.train.ckpt_every =
        detail::get_or<long long>(t, "ckpt_every", rc.train.ckpt_every, where + ".train");
  }
  if (j.contains("seeds")) {
    rc.seeds.clear();
    for (const Json& s : j.at("seeds")) rc.seeds.push_back(s.get<uint64_t>());
  }
  rc.out_dir = detail::get_or<std::string>(j, "out_dir", "", where);
  if (rc.out_dir.empty()) {
    const char* env = std::getenv("AMOD_OUT_DIR");
    rc.out_dir = env ? env : "out";
  }
  rc.workers = detail::get_or<int>(j, "workers", 1, where);
  rc.validate();
  return rc;
}

inline RunConfig load_run_config(const std::string& path,
                                 const std::vector<std::pair<std::string, std::string>>&
                                     overrides = {}) {
  Json j = detail::parse_json_file(path);
  for (auto& [key, value] : overrides) apply_override(j, key, value);
  return run_config_from_json(j, path, std::filesystem::path(path).parent_path().string());
}

/// Fully-resolved config (defaults materialized), written next to outputs.
inline Json run_config_echo(const RunConfig& rc) {
  Json j;
  j["scenario"] = rc.scenario_path;
  j["scenario_resolved"] = scenario_to_json(rc.scenario);
  j["backbone"] = backbone_name(rc.policy.backbone);
  j["gat_heads"] = rc.policy.gat_heads;
  j["kappa"] = rc.policy.kappa;
  j["hidden"] = rc.policy.hidden;
  Json pg;
  pg["alpha"] = rc.policy.prognn.alpha;
  pg["beta"] = rc.policy.prognn.beta;
  pg["eta"] = rc.policy.prognn.eta;
  pg["tau_s"] = rc.policy.prognn.tau_s;
  pg["allow_fill_in"] = rc.policy.prognn.allow_fill_in;
  pg["joint_task_gradient"] = rc.policy.prognn.joint_task_gradient;
  j["prognn"] = pg;
  Json pt;
  pt["tau_start"] = rc.policy.ptd_tau_start;
  pt["tau_end"] = rc.policy.ptd_tau_end;
  j["ptdnet"] = pt;
  Json tr;
  tr["lr"] = rc.train.lr;
  tr["gamma"] = rc.train.gamma;
  tr["episodes"] = rc.train.episodes;
  tr["value_coef"] = rc.train.value_coef;
  tr["entropy_coef"] = rc.train.entropy_coef;
  tr["grad_clip"] = rc.train.grad_clip;
  tr["ckpt_every"] = rc.train.ckpt_every;
  j["train"] = tr;
  j["seeds"] = rc.seeds;
  j["out_dir"] = rc.out_dir;
  j["workers"] = rc.workers;
  return j;
}

}  // namespace amodrl
