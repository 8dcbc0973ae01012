#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "doco/algorithm.hpp"
#include "doco/error.hpp"
#include "doco/evaluation.hpp"
#include "doco/mirror.hpp"
#include "doco/network.hpp"
#include "doco/problems.hpp"

namespace doco::config {

using json = nlohmann::json;

struct GraphSpec {
  std::string kind = "ring";
  double p = 0.5;                    // erdos_renyi
  std::vector<network::Edge> edges;  // explicit
  std::optional<Eigen::MatrixXd> matrix;  // explicit, optional user-supplied W
};

struct RunConfig {
  GraphSpec graph;
  mirror::MapKind mirror = mirror::MapKind::euclidean;
  json feasible_set;  // normalized: kind + parameters
  problems::SuiteParams problem;
  double a = 2.0 / 3.0;
  double b = 1.0 / 3.0;
  algorithm::Mode mode = algorithm::Mode::strict;
  std::size_t threads = 1;
  std::optional<std::string> out;
  evaluation::SolverOptions solver;
  std::optional<double> hook_dual_bound_F;

  std::size_t horizon() const { return problem.T; }
  std::uint64_t seed() const { return problem.seed; }
};

namespace detail {

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline void reject_unknown(const json& obj, const std::string& where, std::set<std::string> allowed) {
  std::vector<std::string> unknown;
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) unknown.push_back(join(where, it.key()));
  if (unknown.empty()) return;
  std::string list;
  for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
  throw ConfigError(unknown.front(), "unknown key(s): " + list);
}

inline const json& object_at(const json& parent, const std::string& key, const std::string& path) {
  const json& v = parent.at(key);
  if (!v.is_object()) throw ConfigError(path, "must be an object");
  return v;
}

inline double number(const json& obj, const std::string& key, const std::string& path, double fallback,
                     bool required = false) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(path, "missing required key");
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path, "must be a number");
  return v.get<double>();
}

inline std::uint64_t integer(const json& obj, const std::string& key, const std::string& path,
                             std::uint64_t fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(path, "missing required key");
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ConfigError(path, "must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

inline std::string text(const json& obj, const std::string& key, const std::string& path,
                        const std::string& fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(path, "missing required key");
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(path, "must be a string");
  return v.get<std::string>();
}

inline Eigen::VectorXd vector_or_scalar(const json& v, Eigen::Index d, const std::string& path) {
  if (v.is_number()) return Eigen::VectorXd::Constant(d, v.get<double>());
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != d)
    throw ConfigError(path, "must be a number or an array of length " + std::to_string(d));
  Eigen::VectorXd out(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    if (!v[k].is_number()) throw ConfigError(path, "entries must be numbers");
    out[k] = v[k].get<double>();
  }
  return out;
}

inline json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

inline problems::SuiteParams parse_problem(const json& p) {
  reject_unknown(p, "problem", {"kind", "n", "d", "m", "T", "drift_rho", "drift_delta", "constraint_regime", "seed"});
  problems::SuiteParams s;
  const std::string kind = text(p, "kind", "problem.kind", "", true);
  if (kind == "tracking")
    s.kind = problems::SuiteKind::tracking;
  else if (kind == "regression")
    s.kind = problems::SuiteKind::regression;
  else
    throw ConfigError("problem.kind", "must be \"tracking\" or \"regression\"");
  s.n = integer(p, "n", "problem.n", 0, true);
  if (s.n < 1) throw ConfigError("problem.n", "must be at least 1");
  s.d = static_cast<Eigen::Index>(integer(p, "d", "problem.d", 0, true));
  if (s.d < 1) throw ConfigError("problem.d", "must be at least 1");
  s.m = static_cast<Eigen::Index>(integer(p, "m", "problem.m", 2));
  if (s.m < 1) throw ConfigError("problem.m", "must be at least 1");
  s.T = integer(p, "T", "problem.T", 0, true);
  s.drift_rho = number(p, "drift_rho", "problem.drift_rho", 1.0);
  if (!(s.drift_rho >= 0.0)) throw ConfigError("problem.drift_rho", "must be nonnegative");
  s.drift_delta = number(p, "drift_delta", "problem.drift_delta", 0.05);
  if (!(s.drift_delta >= 0.0)) throw ConfigError("problem.drift_delta", "must be nonnegative");
  const std::string regime = text(p, "constraint_regime", "problem.constraint_regime", "interior");
  if (regime == "interior")
    s.regime = problems::ConstraintRegime::interior;
  else if (regime == "active")
    s.regime = problems::ConstraintRegime::active;
  else
    throw ConfigError("problem.constraint_regime", "must be \"interior\" or \"active\"");
  s.seed = integer(p, "seed", "problem.seed", 0);
  return s;
}

inline json parse_set(const json& fs, Eigen::Index d) {
  const std::string kind = text(fs, "kind", "feasible_set.kind", "", true);
  json out{{"kind", kind}};
  if (kind == "box") {
    reject_unknown(fs, "feasible_set", {"kind", "lo", "hi"});
    Eigen::VectorXd lo = fs.contains("lo") ? vector_or_scalar(fs["lo"], d, "feasible_set.lo") : Eigen::VectorXd::Zero(d);
    Eigen::VectorXd hi = fs.contains("hi") ? vector_or_scalar(fs["hi"], d, "feasible_set.hi") : Eigen::VectorXd::Ones(d);
    for (Eigen::Index k = 0; k < d; ++k)
      if (!(lo[k] <= hi[k])) throw ConfigError("feasible_set.lo", "exceeds feasible_set.hi");
    out["lo"] = vec_json(lo);
    out["hi"] = vec_json(hi);
  } else if (kind == "ball") {
    reject_unknown(fs, "feasible_set", {"kind", "center", "radius"});
    Eigen::VectorXd c = fs.contains("center") ? vector_or_scalar(fs["center"], d, "feasible_set.center")
                                              : Eigen::VectorXd::Zero(d);
    const double r = number(fs, "radius", "feasible_set.radius", 1.0);
    if (!(r > 0.0)) throw ConfigError("feasible_set.radius", "must be positive");
    out["center"] = vec_json(c);
    out["radius"] = r;
  } else if (kind == "simplex") {
    reject_unknown(fs, "feasible_set", {"kind"});
    if (d < 2) throw ConfigError("feasible_set.kind", "simplex needs problem.d >= 2");
  } else {
    throw ConfigError("feasible_set.kind", "must be one of box, ball, simplex");
  }
  return out;
}

inline GraphSpec parse_graph(const json& g, std::size_t n) {
  GraphSpec s;
  s.kind = text(g, "kind", "graph.kind", "", true);
  if (s.kind == "erdos_renyi") {
    reject_unknown(g, "graph", {"kind", "p"});
    s.p = number(g, "p", "graph.p", 0.5);
    if (!(s.p >= 0.0 && s.p <= 1.0)) throw ConfigError("graph.p", "must lie in [0,1]");
  } else if (s.kind == "explicit") {
    reject_unknown(g, "graph", {"kind", "edges", "matrix"});
    if (!g.contains("edges") || !g["edges"].is_array()) throw ConfigError("graph.edges", "must be an array of [i,j] pairs");
    for (const auto& e : g["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer() ||
          e[0].get<std::int64_t>() < 0 || e[1].get<std::int64_t>() < 0)
        throw ConfigError("graph.edges", "entries must be pairs of node indices");
      s.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    if (g.contains("matrix")) {
      const json& m = g["matrix"];
      if (!m.is_array() || m.size() != n) throw ConfigError("graph.matrix", "must be an n x n array");
      Eigen::MatrixXd w(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!m[i].is_array() || m[i].size() != n) throw ConfigError("graph.matrix", "must be an n x n array");
        for (std::size_t j = 0; j < n; ++j) {
          if (!m[i][j].is_number()) throw ConfigError("graph.matrix", "entries must be numbers");
          w(i, j) = m[i][j].get<double>();
        }
      }
      s.matrix = std::move(w);
    }
  } else if (s.kind == "ring" || s.kind == "path" || s.kind == "star" || s.kind == "complete") {
    reject_unknown(g, "graph", {"kind"});
  } else {
    throw ConfigError("graph.kind", "must be one of ring, path, star, complete, erdos_renyi, explicit");
  }
  return s;
}

}  // namespace detail

// Parses and validates a whole configuration. Every failure names the
// offending key.
inline RunConfig parse_config(const json& root, std::optional<std::uint64_t> seed_override = std::nullopt) {
  using namespace detail;
  if (!root.is_object()) throw ConfigError("", "configuration must be a JSON object");
  reject_unknown(root, "", {"graph", "mirror", "feasible_set", "problem", "schedule", "mode", "threads", "out",
                            "solver", "test_hooks"});
  RunConfig c;
  if (!root.contains("problem")) throw ConfigError("problem", "missing required key");
  c.problem = parse_problem(object_at(root, "problem", "problem"));
  if (seed_override) c.problem.seed = *seed_override;

  c.graph = root.contains("graph") ? parse_graph(object_at(root, "graph", "graph"), c.problem.n) : GraphSpec{};

  const std::string mirror = text(root, "mirror", "mirror", "euclidean");
  if (mirror == "euclidean")
    c.mirror = mirror::MapKind::euclidean;
  else if (mirror == "negative_entropy")
    c.mirror = mirror::MapKind::negative_entropy;
  else
    throw ConfigError("mirror", "must be \"euclidean\" or \"negative_entropy\"");

  c.feasible_set = root.contains("feasible_set")
                       ? parse_set(object_at(root, "feasible_set", "feasible_set"), c.problem.d)
                       : parse_set(json{{"kind", "box"}}, c.problem.d);
  if (c.mirror == mirror::MapKind::negative_entropy && c.feasible_set["kind"] != "simplex")
    throw ConfigError("mirror", "negative_entropy is only supported with feasible_set.kind = simplex");

  if (root.contains("schedule")) {
    const json& s = object_at(root, "schedule", "schedule");
    reject_unknown(s, "schedule", {"a", "b"});
    c.a = number(s, "a", "schedule.a", c.a);
    c.b = number(s, "b", "schedule.b", c.b);
  }
  if (!(c.a > 0.0 && c.a < 1.0)) throw ConfigError("schedule.a", "must lie in (0,1)");
  if (!(c.b > 0.0 && c.b < 1.0)) throw ConfigError("schedule.b", "must lie in (0,1)");
  if (!(c.a > c.b))
    throw ConfigError("schedule.a", "schedule.a (" + std::to_string(c.a) + ") must be greater than schedule.b (" +
                                        std::to_string(c.b) + ")");

  const std::string mode = text(root, "mode", "mode", "strict");
  if (mode == "strict")
    c.mode = algorithm::Mode::strict;
  else if (mode == "audit")
    c.mode = algorithm::Mode::audit;
  else
    throw ConfigError("mode", "must be \"strict\" or \"audit\"");

  c.threads = integer(root, "threads", "threads", 1);
  if (c.threads < 1) throw ConfigError("threads", "must be at least 1");
  if (root.contains("out")) c.out = text(root, "out", "out", "");

  if (root.contains("solver")) {
    const json& s = object_at(root, "solver", "solver");
    reject_unknown(s, "solver", {"tol", "max_iterations"});
    c.solver.tol = number(s, "tol", "solver.tol", c.solver.tol);
    if (!(c.solver.tol > 0.0)) throw ConfigError("solver.tol", "must be positive");
    c.solver.max_iterations = integer(s, "max_iterations", "solver.max_iterations", c.solver.max_iterations);
  }
  if (root.contains("test_hooks")) {
    const json& h = object_at(root, "test_hooks", "test_hooks");
    reject_unknown(h, "test_hooks", {"dual_bound_F"});
    if (h.contains("dual_bound_F")) c.hook_dual_bound_F = number(h, "dual_bound_F", "test_hooks.dual_bound_F", 0.0);
  }

  // Connectivity and graph validity are part of whole-config validation.
  try {
    if (c.graph.kind == "explicit") {
      network::Topology topo(c.problem.n, c.graph.edges);
      if (auto bad = topo.unreachable_node())
        throw ConfigError("graph.edges", "graph is disconnected: node " + std::to_string(*bad) + " is unreachable");
      if (c.graph.matrix) network::WeightMatrix::from_matrix(*c.graph.matrix);
    }
  } catch (const ValidationError& e) {
    throw ConfigError(c.graph.matrix ? "graph.matrix" : "graph.edges", e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "'" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(root, seed_override);
}

// Canonical JSON form of a config, with every default filled in.
inline json to_json(const RunConfig& c) {
  json g{{"kind", c.graph.kind}};
  if (c.graph.kind == "erdos_renyi") g["p"] = c.graph.p;
  if (c.graph.kind == "explicit") {
    json e = json::array();
    for (auto [i, j] : c.graph.edges) e.push_back({i, j});
    g["edges"] = e;
    if (c.graph.matrix) {
      json m = json::array();
      for (Eigen::Index i = 0; i < c.graph.matrix->rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < c.graph.matrix->cols(); ++j) row.push_back((*c.graph.matrix)(i, j));
        m.push_back(row);
      }
      g["matrix"] = m;
    }
  }
  json out{{"graph", g},
           {"mirror", mirror::to_string(c.mirror)},
           {"feasible_set", c.feasible_set},
           {"problem",
            {{"kind", problems::to_string(c.problem.kind)},
             {"n", c.problem.n},
             {"d", c.problem.d},
             {"m", c.problem.m},
             {"T", c.problem.T},
             {"drift_rho", c.problem.drift_rho},
             {"drift_delta", c.problem.drift_delta},
             {"constraint_regime", problems::to_string(c.problem.regime)},
             {"seed", c.problem.seed}}},
           {"schedule", {{"a", c.a}, {"b", c.b}}},
           {"mode", c.mode == algorithm::Mode::strict ? "strict" : "audit"},
           {"threads", c.threads},
           {"solver", {{"tol", c.solver.tol}, {"max_iterations", c.solver.max_iterations}}}};
  if (c.out) out["out"] = *c.out;
  if (c.hook_dual_bound_F) out["test_hooks"] = {{"dual_bound_F", *c.hook_dual_bound_F}};
  return out;
}

// Everything a run needs, built from a validated config.
struct Instance {
  network::Topology topology;
  network::WeightMatrix weights;
  mirror::FeasibleSet set;
  mirror::MirrorMap map;
  std::unique_ptr<problems::GeneratedSuite> problem;
  algorithm::Schedule schedule;
};

inline network::Topology build_topology(const RunConfig& c) {
  const std::size_t n = c.problem.n;
  const auto& k = c.graph.kind;
  if (k == "ring") return network::ring(n);
  if (k == "path") return network::path(n);
  if (k == "star") return network::star(n);
  if (k == "complete") return network::complete(n);
  if (k == "erdos_renyi") return network::erdos_renyi(n, c.graph.p, c.seed());
  return network::Topology(n, c.graph.edges);
}

inline mirror::FeasibleSet build_set(const json& fs, Eigen::Index d) {
  const std::string kind = fs.at("kind");
  auto vec = [&](const char* key) { return detail::vector_or_scalar(fs.at(key), d, key); };
  if (kind == "box") return mirror::FeasibleSet::box(vec("lo"), vec("hi"));
  if (kind == "ball") return mirror::FeasibleSet::ball(vec("center"), fs.at("radius").get<double>());
  return mirror::FeasibleSet::simplex(d);
}

inline Instance build_instance(const RunConfig& c) {
  auto topo = build_topology(c);
  auto weights = c.graph.matrix ? network::WeightMatrix::from_matrix(*c.graph.matrix)
                                : network::build_metropolis_weights(topo);
  auto set = build_set(c.feasible_set, c.problem.d);
  mirror::MirrorMap map(c.mirror, set);
  auto problem = problems::make_suite(c.problem, set);
  return Instance{std::move(topo), std::move(weights), set, map, std::move(problem), algorithm::Schedule(c.a, c.b)};
}

inline algorithm::EngineOptions engine_options(const RunConfig& c) {
  algorithm::EngineOptions o;
  o.mode = c.mode;
  o.threads = c.threads;
  o.dual_bound_F = c.hook_dual_bound_F;
  return o;
}

}  // namespace doco::config
