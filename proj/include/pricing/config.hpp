#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pricing/curves.hpp"
#include "pricing/envs.hpp"
#include "pricing/errors.hpp"

namespace pricing {

using json = nlohmann::ordered_json;

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string digest_hex(const json& j) {
  std::uint64_t h = fnv1a64(j.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

inline ParametricDist parse_dist(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("family"))
    throw ConfigError(path, "expected an object with a 'family' tag");
  std::string fam = j.at("family").get<std::string>();
  try {
    if (fam == "uniform") return ParametricDist::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (fam == "point-mass") return ParametricDist::point_mass(j.at("v").get<double>());
    if (fam == "exponential") return ParametricDist::exponential(j.at("lambda").get<double>());
    if (fam == "equal-revenue")
      return ParametricDist::equal_revenue(j.at("v_min").get<double>(), j.at("v_max").get<double>());
    if (fam == "explicit") {
      auto sup = j.at("support").get<std::vector<double>>();
      auto pr = j.at("probs").get<std::vector<double>>();
      return ParametricDist::explicit_dist(DiscreteDist(sup, pr));
    }
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path + ".family", "unknown family '" + fam + "'");
}

inline json dist_to_json(const ParametricDist& d) {
  json j;
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, UniformDist>) j = {{"family", "uniform"}, {"lo", f.lo}, {"hi", f.hi}};
        if constexpr (std::is_same_v<T, PointMassDist>) j = {{"family", "point-mass"}, {"v", f.v}};
        if constexpr (std::is_same_v<T, ExponentialDist>) j = {{"family", "exponential"}, {"lambda", f.lambda}};
        if constexpr (std::is_same_v<T, EqualRevenueTruncatedDist>)
          j = {{"family", "equal-revenue"}, {"v_min", f.v_min}, {"v_max", f.v_max}};
        if constexpr (std::is_same_v<T, DiscreteDist>)
          j = {{"family", "explicit"}, {"support", f.support()}, {"probs", f.probs()}};
      },
      d.family());
  return j;
}

inline Environment parse_environment(const json& j, int n_agents, const std::string& path) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError(path, "expected an object with a 'kind' tag");
  std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "k-unit") return Environment::k_unit(j.at("k").get<int>(), n_agents);
    if (kind == "uniform") return Environment::uniform_matroid(j.at("k").get<int>(), n_agents);
    if (kind == "partition")
      return Environment::partition_matroid(j.at("blocks").get<std::vector<std::vector<int>>>(),
                                            j.at("caps").get<std::vector<int>>());
    if (kind == "graphic") {
      auto edges = j.at("edges").get<std::vector<std::vector<int>>>();
      std::vector<std::pair<int, int>> e;
      for (const auto& ed : edges) {
        if (ed.size() != 2) throw ConfigError(path + ".edges", "edge needs two endpoints");
        e.push_back({ed[0], ed[1]});
      }
      return Environment::graphic_matroid(j.at("vertices").get<int>(), e);
    }
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path + ".kind", "unknown environment kind '" + kind + "'");
}

struct ExperimentConfig {
  std::vector<AgentModel> agents;
  json environment;  // kept raw; instantiated against the agent count
  Objective objective = Objective::Revenue;
  int grid = 50;       // quantile grid
  int type_grid = 50;  // discretization of parametric distributions
  long samples = 100000;
  std::uint64_t seed = 0;
  std::string out = "out";
  json raw;

  Environment env() const { return parse_environment(environment, (int)agents.size(), "environment"); }

  std::vector<Agent> build_agents() const {
    std::vector<Agent> out_agents;
    for (const auto& m : agents) out_agents.push_back(Agent::from_model(m, type_grid));
    return out_agents;
  }

  std::string digest() const { return digest_hex(raw); }
};

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;
  if (!j.is_object()) throw ConfigError("$", "config must be a JSON object");
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != 1)
    throw ConfigError("schema_version", "unsupported schema version");
  if (!j.contains("seed")) throw ConfigError("seed", "missing (no implicit entropy)");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("grid")) cfg.grid = j.at("grid").get<int>();
  if (cfg.grid < 2) throw ConfigError("grid", "must be >= 2");
  cfg.type_grid = j.contains("type_grid") ? j.at("type_grid").get<int>() : cfg.grid;
  if (cfg.type_grid < 1) throw ConfigError("type_grid", "must be >= 1");
  if (j.contains("samples")) cfg.samples = j.at("samples").get<long>();
  if (cfg.samples < 1) throw ConfigError("samples", "must be >= 1");
  if (j.contains("objective")) {
    std::string o = j.at("objective").get<std::string>();
    if (o == "revenue") cfg.objective = Objective::Revenue;
    else if (o == "welfare") cfg.objective = Objective::Welfare;
    else throw ConfigError("objective", "must be 'revenue' or 'welfare'");
  }
  if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  if (!j.contains("agents") || !j.at("agents").is_array() || j.at("agents").empty())
    throw ConfigError("agents", "need a nonempty array");
  int idx = 0;
  for (const auto& ja : j.at("agents")) {
    std::string base = "agents[" + std::to_string(idx) + "]";
    if (!ja.is_object()) throw ConfigError(base, "expected an object");
    auto value = parse_dist(ja.at("value"), base + ".value");
    std::string util = ja.contains("utility") ? ja.at("utility").get<std::string>() : "private-budget";
    int count = ja.contains("count") ? ja.at("count").get<int>() : 1;
    if (count < 1) throw ConfigError(base + ".count", "must be >= 1");
    AgentModel model = [&] {
      if (util == "linear") return AgentModel::linear(value);
      if (util == "public-budget") {
        if (!ja.contains("budget")) throw ConfigError(base + ".budget", "missing");
        auto b = parse_dist(ja.at("budget"), base + ".budget");
        if (!b.is_point_mass()) throw ConfigError(base + ".budget", "public budget must be a point mass");
        return AgentModel::public_budget(value, b.mean());
      }
      if (util == "private-budget") {
        if (!ja.contains("budget")) throw ConfigError(base + ".budget", "missing");
        return AgentModel::private_budget(value, parse_dist(ja.at("budget"), base + ".budget"));
      }
      throw ConfigError(base + ".utility", "must be linear, public-budget or private-budget");
    }();
    for (int c = 0; c < count; ++c) cfg.agents.push_back(model);
    ++idx;
  }
  if (j.contains("environment"))
    cfg.environment = j.at("environment");
  else
    cfg.environment = json{{"kind", "k-unit"}, {"k", 1}};
  // validate now so errors surface with a field path
  parse_environment(cfg.environment, (int)cfg.agents.size(), "environment");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& file_path) {
  std::ifstream in(file_path);
  if (!in) throw ConfigError("$", "cannot open config file " + file_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("$", std::string("json parse error: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace pricing
