#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "doco/algorithm.hpp"
#include "doco/config.hpp"
#include "doco/error.hpp"
#include "doco/evaluation.hpp"
#include "doco/properties.hpp"

// Persistence and the end-to-end pipelines behind the CLI subcommands.
namespace doco::report {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kInvariantViolation = 3,
  kSolverFailure = 4,
};

// Shortest text that round-trips the double exactly.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << content;
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// trace.csv: one row per (t, i).

inline std::string trace_csv(const algorithm::RunTrace& tr) {
  std::ostringstream out;
  out << "t,i";
  for (Eigen::Index k = 0; k < tr.d; ++k) out << ",x" << k;
  for (Eigen::Index k = 0; k < tr.d; ++k) out << ",y" << k;
  for (Eigen::Index k = 0; k < tr.m; ++k) out << ",q" << k;
  out << ",f";
  for (Eigen::Index k = 0; k < tr.m; ++k) out << ",g" << k;
  out << ",alpha,beta,gamma\n";
  for (std::size_t t = 1; t <= tr.T; ++t) {
    const auto& rec = tr.rounds[t - 1];
    for (std::size_t i = 0; i < tr.n; ++i) {
      const auto& r = rec.nodes[i];
      out << t << ',' << i;
      for (Eigen::Index k = 0; k < tr.d; ++k) out << ',' << num(r.x[k]);
      for (Eigen::Index k = 0; k < tr.d; ++k) out << ',' << num(r.y[k]);
      for (Eigen::Index k = 0; k < tr.m; ++k) out << ',' << num(r.q[k]);
      out << ',' << num(tr.f_local[t - 1][i]);
      for (Eigen::Index k = 0; k < tr.m; ++k) out << ',' << num(tr.g_local[t - 1][i][k]);
      out << ',' << num(rec.steps.alpha) << ',' << num(rec.steps.beta) << ',' << num(rec.steps.gamma) << '\n';
    }
  }
  return out.str();
}

// Rebuilds the actions, iterates and revealed values of a stored trace; the
// node-averaged objective f_t(x_{i,t}) is recomputed from the problem.
inline algorithm::RunTrace read_trace_csv(const std::string& text, const problems::Problem& p) {
  algorithm::RunTrace tr;
  tr.n = p.agents();
  tr.d = p.dim();
  tr.m = p.constraints();
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("trace.csv is empty");
  const std::size_t expected = 2 + 2 * tr.d + tr.m + 1 + tr.m + 3;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    if (v.size() != expected) throw Error("trace.csv: malformed row '" + line + "'");
    const auto t = static_cast<std::size_t>(v[0]);
    const auto i = static_cast<std::size_t>(v[1]);
    if (t != tr.rounds.size() + (i == 0 ? 1 : 0) || i >= tr.n) throw Error("trace.csv: rows out of order");
    if (i == 0) {
      tr.rounds.emplace_back();
      tr.rounds.back().t = t;
      tr.rounds.back().nodes.resize(tr.n);
      tr.f_local.emplace_back(tr.n);
      tr.g_local.emplace_back(tr.n);
      tr.f_global.emplace_back(tr.n);
    }
    auto& rec = tr.rounds.back();
    auto& r = rec.nodes[i];
    std::size_t c = 2;
    r.x = Eigen::Map<Eigen::VectorXd>(v.data() + c, tr.d);
    c += tr.d;
    r.y = Eigen::Map<Eigen::VectorXd>(v.data() + c, tr.d);
    c += tr.d;
    r.q = Eigen::Map<Eigen::VectorXd>(v.data() + c, tr.m);
    c += tr.m;
    tr.f_local.back()[i] = v[c++];
    tr.g_local.back()[i] = Eigen::Map<Eigen::VectorXd>(v.data() + c, tr.m);
    c += tr.m;
    rec.steps = {v[c], v[c + 1], v[c + 2]};
  }
  tr.T = tr.rounds.size();
  if (tr.T > p.horizon()) throw Error("trace.csv has more rounds than the configured horizon");
  for (std::size_t t = 1; t <= tr.T; ++t)
    for (std::size_t i = 0; i < tr.n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < tr.n; ++j) s += p.objective(j, t, tr.action(t, i));
      tr.f_global[t - 1][i] = s / static_cast<double>(tr.n);
    }
  return tr;
}

// ---------------------------------------------------------------------------
// Metrics.

struct Metrics {
  std::vector<double> regret;
  evaluation::FitSeries fit;
  std::vector<double> C_T_star;  // prefix path variation
  std::vector<double> regret_rhs;
  std::vector<double> fit_sq_rhs;
  evaluation::BoundConstants bounds{};
  evaluation::ConsensusCheck consensus;
};

inline evaluation::BoundInputs bound_inputs(const config::Instance& inst, const config::RunConfig& c) {
  const auto k = inst.problem->constants();
  return {k.F, k.G, k.L, inst.map.K(), inst.map.mu(), inst.set.diameter(), inst.problem->agents(),
          inst.weights.sigma2(), c.a, c.b};
}

inline Metrics compute_metrics(const config::Instance& inst, const config::RunConfig& c,
                               const algorithm::RunTrace& trace, const evaluation::ComparatorPath& path) {
  Metrics m;
  m.regret = evaluation::dynamic_regret(trace, path);
  m.fit = evaluation::fit(trace, *inst.problem);
  m.C_T_star = evaluation::path_variation_prefix(path);
  m.C_T_star.resize(trace.T);
  m.bounds = evaluation::bound_constants(bound_inputs(inst, c));
  for (std::size_t t = 1; t <= trace.T; ++t) {
    auto b = evaluation::theorem1_bounds(m.bounds, static_cast<double>(t), m.C_T_star[t - 1]);
    m.regret_rhs.push_back(b.regret_rhs);
    m.fit_sq_rhs.push_back(b.fit_sq_rhs);
  }
  const auto k = inst.problem->constants();
  m.consensus = evaluation::consensus_error_check(trace, inst.schedule, {k.G, k.F, inst.map.mu(), inst.weights.sigma2()});
  return m;
}

// Rows for the given horizons (1-based).
inline std::string metrics_csv(const Metrics& m, const std::vector<std::size_t>& horizons) {
  std::ostringstream out;
  out << "T,regret,fit,fit_sq,C_T_star,regret_rhs,fit_sq_rhs\n";
  for (std::size_t T : horizons) {
    const std::size_t k = T - 1;
    out << T << ',' << num(m.regret[k]) << ',' << num(m.fit.fit[k]) << ',' << num(m.fit.fit_sq[k]) << ','
        << num(m.C_T_star[k]) << ',' << num(m.regret_rhs[k]) << ',' << num(m.fit_sq_rhs[k]) << '\n';
  }
  return out.str();
}

inline std::vector<std::size_t> all_horizons(std::size_t T) {
  std::vector<std::size_t> h(T);
  for (std::size_t t = 0; t < T; ++t) h[t] = t + 1;
  return h;
}

inline std::string plots_gp(const std::string& metrics_file) {
  std::ostringstream g;
  g << "# gnuplot -p plots.gp\n"
    << "set datafile separator ','\n"
    << "set key autotitle columnhead left top\n"
    << "set logscale xy\n"
    << "set xlabel 'T'\n"
    << "set multiplot layout 1,2\n"
    << "set title 'dynamic regret'\n"
    << "plot '" << metrics_file << "' using 1:(abs($2)) with lines title 'regret', "
    << "'' using 1:6 with lines title 'bound'\n"
    << "set title 'fit'\n"
    << "plot '" << metrics_file << "' using 1:3 with lines title 'fit', "
    << "'' using 1:4 with lines title 'fit_sq', '' using 1:7 with lines title 'fit_sq bound'\n"
    << "unset multiplot\n";
  return g.str();
}

inline json bounds_json(const evaluation::BoundConstants& b) {
  const auto e = b.fit_sq_exponents();
  return {{"B1", b.B1}, {"R", b.R}, {"R1", b.R1}, {"D", b.D}, {"D1", b.D1}, {"D2", b.D2}, {"D3", b.D3},
          {"K", b.K},   {"regret_exponent", b.regret_exponent()}, {"fit_sq_exponents", {e[0], e[1], e[2]}}};
}

inline std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

inline fs::path resolve_out_dir(const std::optional<std::string>& cli, const config::RunConfig& c) {
  if (cli && !cli->empty()) return *cli;
  if (c.out && !c.out->empty()) return *c.out;
  if (const char* env = std::getenv("DOCO_OUT_DIR"); env && *env) return env;
  throw ConfigError("out", "no output directory: pass --out, set \"out\" in the config, or set DOCO_OUT_DIR");
}

inline void write_failure(const fs::path& dir, const json& report) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!ec) write_file(dir / "failure.json", report.dump(2) + "\n");
  std::cerr << report.dump() << "\n";
}

// Maps library errors to exit codes and a machine-readable report.
template <class Fn>
int guarded(const fs::path& dir, Fn&& fn) {
  try {
    return fn();
  } catch (const InvariantViolation& e) {
    write_failure(dir, {{"status", "invariant_violation"},
                        {"invariant", e.invariant()},
                        {"t", e.round()},
                        {"node", e.node()},
                        {"detail", e.detail()},
                        {"exit_code", kInvariantViolation}});
    return kInvariantViolation;
  } catch (const SolverError& e) {
    write_failure(dir, {{"status", "solver_nonconvergence"},
                        {"detail", e.what()},
                        {"iterations", e.iterations()},
                        {"residual", e.residual()},
                        {"exit_code", kSolverFailure}});
    return kSolverFailure;
  } catch (const ConfigError& e) {
    std::cerr << json{{"status", "config_error"}, {"key", e.key()}, {"detail", e.what()}}.dump() << "\n";
    return kConfigError;
  } catch (const ValidationError& e) {
    std::cerr << json{{"status", "config_error"}, {"detail", e.what()}}.dump() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << json{{"status", "error"}, {"detail", e.what()}}.dump() << "\n";
    return kFailure;
  }
}

// ---------------------------------------------------------------------------
// run: generate -> run -> evaluate -> persist.

inline int orchestrate(const config::RunConfig& c, const fs::path& dir) {
  return guarded(dir, [&] {
    auto inst = config::build_instance(c);
    auto trace = algorithm::run(*inst.problem, inst.weights, inst.map, inst.schedule, config::engine_options(c));
    auto path = evaluation::comparator_path(*inst.problem, c.solver, c.threads);
    auto m = compute_metrics(inst, c, trace, path);

    fs::create_directories(dir);
    const std::string trace_text = trace_csv(trace);
    const std::string metrics_text = metrics_csv(m, all_horizons(trace.T));
    write_file(dir / "trace.csv", trace_text);
    write_file(dir / "metrics.csv", metrics_text);
    write_file(dir / "plots.gp", plots_gp("metrics.csv"));

    const auto k = inst.problem->constants();
    json summary{{"config", config::to_json(c)},
                 {"trace_hash", {{"algorithm", "fnv1a64"}, {"value", hex64(fnv1a64(trace_text))}}},
                 {"metrics_hash", {{"algorithm", "fnv1a64"}, {"value", hex64(fnv1a64(metrics_text))}}},
                 {"constants",
                  {{"F", k.F}, {"G", k.G}, {"L", k.L}, {"K", inst.map.K()}, {"mu", inst.map.mu()},
                   {"diameter", inst.set.diameter()}, {"sigma2", inst.weights.sigma2()}}},
                 {"bounds", bounds_json(m.bounds)},
                 {"invariants",
                  {{"violations", trace.violations.size()},
                   {"max_dual_ratio", trace.max_dual_ratio},
                   {"max_interior_adjust", trace.max_interior_adjust},
                   {"consensus_bound_passed", m.consensus.passed},
                   {"consensus_bound_failures", m.consensus.failures}}},
                 {"comparator", {{"selection", "solver started at the set center"}}},
                 {"generated_at", timestamp()}};
    if (trace.T > 0) {
      const std::size_t last = trace.T - 1;
      std::size_t max_iter = 0;
      double max_viol = 0.0;
      for (const auto& pt : path.points) {
        max_iter = std::max(max_iter, pt.iterations);
        max_viol = std::max(max_viol, pt.max_violation);
      }
      summary["comparator"]["max_iterations"] = max_iter;
      summary["comparator"]["max_violation"] = max_viol;
      summary["final"] = {{"T", trace.T},
                          {"regret", m.regret[last]},
                          {"fit", m.fit.fit[last]},
                          {"fit_diag", m.fit.fit_diag[last]},
                          {"fit_sq", m.fit.fit_sq[last]},
                          {"C_T_star", m.C_T_star[last]},
                          {"regret_rhs", m.regret_rhs[last]},
                          {"fit_sq_rhs", m.fit_sq_rhs[last]}};
    }
    if (!trace.violations.empty()) {
      json v = json::array();
      for (const auto& x : trace.violations)
        v.push_back({{"invariant", x.invariant}, {"t", x.t}, {"node", x.node}, {"detail", x.detail}});
      summary["invariants"]["list"] = v;
    }
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    std::cout << "wrote " << (dir / "trace.csv").string() << ", metrics.csv, summary.json, plots.gp (T=" << trace.T
              << ")\n";
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// evaluate: recompute metrics from a stored run directory.

inline int evaluate_dir(const fs::path& dir) {
  return guarded(dir, [&] {
    const json summary = json::parse(read_file(dir / "summary.json"));
    const auto c = config::parse_config(summary.at("config"));
    const std::string trace_text = read_file(dir / "trace.csv");
    const std::string stored = summary.at("trace_hash").at("value");
    if (hex64(fnv1a64(trace_text)) != stored) throw Error("trace.csv does not match the hash in summary.json");

    auto inst = config::build_instance(c);
    auto trace = read_trace_csv(trace_text, *inst.problem);
    auto path = evaluation::comparator_path(*inst.problem, c.solver, c.threads);
    auto m = compute_metrics(inst, c, trace, path);
    write_file(dir / "metrics.csv", metrics_csv(m, all_horizons(trace.T)));
    if (trace.T > 0) {
      const std::size_t last = trace.T - 1;
      std::cout << "T=" << trace.T << " regret=" << num(m.regret[last]) << " fit=" << num(m.fit.fit[last])
                << " fit_sq=" << num(m.fit.fit_sq[last]) << " C_T*=" << num(m.C_T_star[last])
                << " consensus_bound=" << (m.consensus.passed ? "pass" : "FAIL") << "\n";
    }
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// sweep: one run at the largest horizon; every smaller horizon is a prefix
// of it because neither the suite nor the step sizes depend on T.

struct SweepPoint {
  std::size_t T;
  double regret, fit, fit_sq, C_T_star, regret_rhs, fit_sq_rhs;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // median over seeds per horizon
  std::vector<std::vector<SweepPoint>> per_seed;
  evaluation::SlopeFit regret_slope, fit_slope;
  bool bounds_dominated = true;
  double regret_exponent = 0.0;
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

// A metric that is nonpositive at all but one horizon has no log-log slope.
inline evaluation::SlopeFit slope_or_nan(const std::vector<std::pair<double, double>>& values) {
  try {
    return evaluation::slope_estimate(values);
  } catch (const ValidationError& e) {
    evaluation::SlopeFit f;
    f.slope = f.intercept = std::numeric_limits<double>::quiet_NaN();
    f.warnings.push_back(e.what());
    return f;
  }
}

inline SweepResult sweep(config::RunConfig c, const std::vector<std::size_t>& horizons, std::size_t seeds = 1) {
  if (horizons.size() < 2) throw ValidationError("sweep: need at least two horizons");
  SweepResult out;
  c.problem.T = *std::max_element(horizons.begin(), horizons.end());
  const std::uint64_t base_seed = c.problem.seed;
  for (std::size_t s = 0; s < std::max<std::size_t>(seeds, 1); ++s) {
    c.problem.seed = base_seed + s;
    auto inst = config::build_instance(c);
    auto trace = algorithm::run(*inst.problem, inst.weights, inst.map, inst.schedule, config::engine_options(c));
    auto path = evaluation::comparator_path(*inst.problem, c.solver, c.threads);
    auto m = compute_metrics(inst, c, trace, path);
    out.regret_exponent = m.bounds.regret_exponent();
    std::vector<SweepPoint> pts;
    for (std::size_t T : horizons) {
      const std::size_t k = T - 1;
      SweepPoint p{T, m.regret[k], m.fit.fit[k], m.fit.fit_sq[k], m.C_T_star[k], m.regret_rhs[k], m.fit_sq_rhs[k]};
      if (p.regret > p.regret_rhs || p.fit_sq > p.fit_sq_rhs) out.bounds_dominated = false;
      pts.push_back(p);
    }
    out.per_seed.push_back(std::move(pts));
  }
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    auto med = [&](double SweepPoint::*field) {
      std::vector<double> v;
      for (const auto& run : out.per_seed) v.push_back(run[h].*field);
      return median(std::move(v));
    };
    out.points.push_back({horizons[h], med(&SweepPoint::regret), med(&SweepPoint::fit), med(&SweepPoint::fit_sq),
                          med(&SweepPoint::C_T_star), med(&SweepPoint::regret_rhs), med(&SweepPoint::fit_sq_rhs)});
  }
  std::vector<std::pair<double, double>> reg, fit;
  for (const auto& p : out.points) {
    reg.emplace_back(static_cast<double>(p.T), p.regret);
    fit.emplace_back(static_cast<double>(p.T), p.fit);
  }
  out.regret_slope = slope_or_nan(reg);
  out.fit_slope = slope_or_nan(fit);
  return out;
}

inline int sweep_to_dir(const config::RunConfig& c, const std::vector<std::size_t>& horizons, std::size_t seeds,
                        const fs::path& dir) {
  return guarded(dir, [&] {
    auto r = sweep(c, horizons, seeds);
    fs::create_directories(dir);
    std::ostringstream slopes, bounds, metrics;
    slopes << "metric,slope,reference_exponent,points\n"
           << "regret," << num(r.regret_slope.slope) << ',' << num(r.regret_exponent) << ',' << r.regret_slope.used
           << '\n'
           << "fit," << num(r.fit_slope.slope) << ",," << r.fit_slope.used << '\n';
    bounds << "T,seed,regret,regret_rhs,regret_ok,fit_sq,fit_sq_rhs,fit_sq_ok\n";
    for (std::size_t s = 0; s < r.per_seed.size(); ++s)
      for (const auto& p : r.per_seed[s])
        bounds << p.T << ',' << c.problem.seed + s << ',' << num(p.regret) << ',' << num(p.regret_rhs) << ','
               << (p.regret <= p.regret_rhs) << ',' << num(p.fit_sq) << ',' << num(p.fit_sq_rhs) << ','
               << (p.fit_sq <= p.fit_sq_rhs) << '\n';
    metrics << "T,regret,fit,fit_sq,C_T_star,regret_rhs,fit_sq_rhs\n";
    for (const auto& p : r.points)
      metrics << p.T << ',' << num(p.regret) << ',' << num(p.fit) << ',' << num(p.fit_sq) << ',' << num(p.C_T_star)
              << ',' << num(p.regret_rhs) << ',' << num(p.fit_sq_rhs) << '\n';
    write_file(dir / "slopes.csv", slopes.str());
    write_file(dir / "bounds.csv", bounds.str());
    write_file(dir / "metrics.csv", metrics.str());
    write_file(dir / "plots.gp", plots_gp("metrics.csv"));
    for (const auto& w : r.regret_slope.warnings) std::cerr << "warning (regret): " << w << "\n";
    for (const auto& w : r.fit_slope.warnings) std::cerr << "warning (fit): " << w << "\n";
    std::cout << "regret slope " << num(r.regret_slope.slope) << " (reference exponent " << num(r.regret_exponent)
              << "), fit slope " << num(r.fit_slope.slope) << ", bounds "
              << (r.bounds_dominated ? "dominate" : "VIOLATED") << "\n";
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// check: property suites on the configured instance.

inline int check(const config::RunConfig& c, std::ostream& os = std::cout) {
  return guarded(fs::path{}, [&] {
    auto inst = config::build_instance(c);
    const std::uint64_t seed = c.seed();
    std::vector<properties::Result> results = properties::network_suite(inst.weights, 100, seed);
    for (auto& r : properties::mirror_suite(inst.map, inst.set, 1000, seed)) results.push_back(r);
    results.push_back(properties::midpoint_convexity(*inst.problem, 500, seed));
    results.push_back(properties::constants_certified(*inst.problem, 1000, seed));

    auto opt = config::engine_options(c);
    opt.mode = algorithm::Mode::audit;
    auto trace = algorithm::run(*inst.problem, inst.weights, inst.map, inst.schedule, opt);
    properties::Result inv{"engine_invariants", trace.T, trace.violations.empty(),
                           static_cast<double>(trace.violations.size())};
    results.push_back(inv);
    const auto k = inst.problem->constants();
    auto cc = evaluation::consensus_error_check(trace, inst.schedule, {k.G, k.F, inst.map.mu(), inst.weights.sigma2()});
    results.push_back({"consensus_error_bound", trace.T * trace.n, cc.passed, static_cast<double>(cc.failures)});

    bool all = true;
    for (const auto& r : results) {
      os << (r.passed ? "PASS " : "FAIL ") << r.name << " (samples=" << r.samples << ", worst=" << num(r.worst)
         << ")\n";
      all = all && r.passed;
    }
    return static_cast<int>(all ? kOk : kInvariantViolation);
  });
}

}  // namespace doco::report
