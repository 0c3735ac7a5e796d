#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbx/errors.hpp"
#include "rbx/greedy.hpp"
#include "rbx/parameter.hpp"

namespace rbx::harness {

using Json = nlohmann::json;

enum class ProblemKind { diffusion2d, thermalblock };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::diffusion2d;
  int n_x = 35;             // diffusion2d
  int nodes_per_side = 19;  // thermalblock
};

/// Per-method tuning; M_l = m_factor * (l + 1).
struct MethodSpec {
  Method method = Method::classical;
  double eps_tol = 1e-6;
  std::size_t n_max = 400;
  int k_damp = 1;
  int m_factor = 2;
  std::size_t cdm_q_cap = kDefaultCdmQCap;
};

struct ExperimentConfig {
  ProblemSpec problem;
  SamplingSpec training = GridSampling{160};
  std::vector<MethodSpec> methods;
  std::uint64_t seed = 0;
  std::string output_dir = "rbx-out";
  int repetitions = 1;
  std::size_t workers = 1;
  std::size_t memory_cap_bytes = kDefaultMemoryCapBytes;
  bool dump_matrices = false;
  Json source;  // the document as given, echoed into output headers
};

inline std::string to_string(ProblemKind k) { return k == ProblemKind::diffusion2d ? "diffusion2d" : "thermalblock"; }

inline Method parse_method(const std::string& s) {
  if (s == "classical") return Method::classical;
  if (s == "smm") return Method::smm;
  if (s == "cdm") return Method::cdm;
  throw ConfigError("unknown method '" + s + "'");
}

/// Greedy configuration for one method of an experiment.
inline GreedyConfig greedy_config(const ExperimentConfig& cfg, const MethodSpec& m) {
  GreedyConfig g;
  g.eps_tol = m.eps_tol;
  g.n_max = m.n_max;
  g.method = m.method;
  g.k_damp = m.k_damp;
  const int f = m.m_factor;
  g.m_schedule = [f](int ell) { return static_cast<std::size_t>(f) * static_cast<std::size_t>(ell + 1); };
  g.seed = cfg.seed;
  g.cdm_q_cap = m.cdm_q_cap;
  g.workers = cfg.workers;
  g.memory_cap_bytes = cfg.memory_cap_bytes;
  return g;
}

namespace detail {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

}  // namespace detail

/// Parses an experiment document. Missing fields take the problem defaults:
///   diffusion2d:  n_x 35, 160x160 grid, eps_tol 1e-6
///   thermalblock: 19 nodes per side, 20000 random points, eps_tol 1e-5
///   smm: M_l = 2(l+1), K_damp 1;  cdm: M_l = 20(l+1), K_damp 10, q_cap 5
inline ExperimentConfig parse_config(const Json& doc) {
  using detail::get_or;
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(doc,
                         {"problem", "training", "methods", "greedy", "smm", "cdm", "classical", "seed", "output_dir",
                          "repetitions", "workers", "memory_cap_bytes", "dump_matrices"},
                         "config");
  ExperimentConfig cfg;
  cfg.source = doc;

  const Json prob = doc.value("problem", Json::object());
  if (prob.is_string()) throw ConfigError("'problem' must be an object with a 'name'");
  detail::reject_unknown(prob, {"name", "n_x", "nodes_per_side"}, "problem");
  const std::string name = get_or<std::string>(prob, "name", "diffusion2d");
  if (name == "diffusion2d") {
    cfg.problem.kind = ProblemKind::diffusion2d;
    cfg.problem.n_x = get_or<int>(prob, "n_x", 35);
    if (cfg.problem.n_x < 4) throw ConfigError("n_x must be >= 4");
  } else if (name == "thermalblock") {
    cfg.problem.kind = ProblemKind::thermalblock;
    cfg.problem.nodes_per_side = get_or<int>(prob, "nodes_per_side", 19);
    if (cfg.problem.nodes_per_side < 4 || (cfg.problem.nodes_per_side - 1) % 3 != 0)
      throw ConfigError("nodes_per_side must be >= 4 and = 1 (mod 3)");
  } else {
    throw ConfigError("unknown problem '" + name + "'");
  }
  const bool p1 = cfg.problem.kind == ProblemKind::diffusion2d;

  cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
  const Json tr = doc.value("training", Json::object());
  detail::reject_unknown(tr, {"kind", "n_per_dim", "count", "seed"}, "training");
  const std::string kind = get_or<std::string>(tr, "kind", p1 ? "grid" : "random");
  if (kind == "grid") {
    cfg.training = GridSampling{get_or<int>(tr, "n_per_dim", 160)};
    if (std::get<GridSampling>(cfg.training).n_per_dim < 2) throw ConfigError("n_per_dim must be >= 2");
  } else if (kind == "random") {
    const auto count = get_or<std::size_t>(tr, "count", 20000);
    if (count < 1) throw ConfigError("training count must be >= 1");
    cfg.training = RandomSampling{count, get_or<std::uint64_t>(tr, "seed", cfg.seed)};
  } else {
    throw ConfigError("unknown training kind '" + kind + "'");
  }

  const Json greedy = doc.value("greedy", Json::object());
  detail::reject_unknown(greedy, {"eps_tol", "n_max"}, "greedy");
  const double eps = get_or<double>(greedy, "eps_tol", p1 ? 1e-6 : 1e-5);
  const auto n_max = get_or<std::size_t>(greedy, "n_max", 400);

  std::vector<std::string> names = {"classical", "smm", "cdm"};
  if (doc.contains("methods")) {
    if (!doc["methods"].is_array()) throw ConfigError("'methods' must be an array");
    names.clear();
    for (const auto& m : doc["methods"]) {
      if (!m.is_string()) throw ConfigError("method names must be strings");
      names.push_back(m.get<std::string>());
    }
  }
  if (names.empty()) throw ConfigError("at least one method is required");
  for (const auto& n : names) {
    MethodSpec ms;
    ms.method = parse_method(n);
    for (const auto& other : cfg.methods)
      if (other.method == ms.method) throw ConfigError("method '" + n + "' listed twice");
    ms.eps_tol = eps;
    ms.n_max = n_max;
    if (ms.method == Method::smm) {
      ms.k_damp = 1;
      ms.m_factor = 2;
    } else if (ms.method == Method::cdm) {
      ms.k_damp = 10;
      ms.m_factor = 20;
    }
    const Json over = doc.value(n, Json::object());
    detail::reject_unknown(over, {"eps_tol", "n_max", "k_damp", "m_factor", "q_cap"}, n);
    ms.eps_tol = get_or<double>(over, "eps_tol", ms.eps_tol);
    ms.n_max = get_or<std::size_t>(over, "n_max", ms.n_max);
    ms.k_damp = get_or<int>(over, "k_damp", ms.k_damp);
    ms.m_factor = get_or<int>(over, "m_factor", ms.m_factor);
    ms.cdm_q_cap = get_or<std::size_t>(over, "q_cap", ms.cdm_q_cap);
    if (!(ms.eps_tol > 0.0)) throw ConfigError("eps_tol must be positive");
    if (ms.n_max < 1) throw ConfigError("n_max must be >= 1");
    if (ms.k_damp < 1) throw ConfigError("k_damp must be >= 1");
    if (ms.m_factor < 1) throw ConfigError("m_factor must be >= 1");
    if (ms.cdm_q_cap < 1) throw ConfigError("q_cap must be >= 1");
    cfg.methods.push_back(ms);
  }

  cfg.output_dir = get_or<std::string>(doc, "output_dir", cfg.output_dir);
  cfg.repetitions = get_or<int>(doc, "repetitions", 1);
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  cfg.workers = get_or<std::size_t>(doc, "workers", 1);
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  cfg.memory_cap_bytes = get_or<std::size_t>(doc, "memory_cap_bytes", kDefaultMemoryCapBytes);
  cfg.dump_matrices = get_or<bool>(doc, "dump_matrices", false);
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace rbx::harness
