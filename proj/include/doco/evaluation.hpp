#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "doco/algorithm.hpp"
#include "doco/error.hpp"
#include "doco/mirror.hpp"
#include "doco/problems.hpp"

namespace doco::evaluation {

using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Comparator: x*_t in argmin { f_t(x) : x in X, g_{i,t}(x) <= 0 for all i },
// with f_t = (1/n) sum_i f_{i,t}.

struct SolverOptions {
  double tol = 1e-7;
  std::size_t max_iterations = 10000;  // total inner iterations per solve
  double rho0 = 1.0;
  double rho_max = 1e6;
};

struct ComparatorPoint {
  Vec x;
  double f = 0.0;              // f_t(x)
  double max_violation = 0.0;  // max_{i,k} [g_{i,t}(x)]_k^+
  double gradient_mapping = 0.0;
  std::size_t iterations = 0;
  std::size_t outer_iterations = 0;
};

namespace detail {

inline double global_objective(const problems::Problem& p, std::size_t t, const Vec& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.agents(); ++i) s += p.objective(i, t, x);
  return s / static_cast<double>(p.agents());
}

inline double max_violation(const problems::Problem& p, std::size_t t, const Vec& x) {
  double v = 0.0;
  for (std::size_t i = 0; i < p.agents(); ++i) {
    Vec g = p.constraint(i, t, x);
    if (g.size() > 0) v = std::max(v, g.maxCoeff());
  }
  return v;
}

// Augmented Lagrangian phi(x) = f_t(x) + (1/2rho) sum_i (||[lam_i + rho g_i(x)]_+||^2 - ||lam_i||^2).
struct AugmentedLagrangian {
  const problems::Problem& p;
  std::size_t t;
  const std::vector<Vec>& lam;
  double rho;

  double value(const Vec& x) const {
    double v = global_objective(p, t, x);
    for (std::size_t i = 0; i < p.agents(); ++i) {
      Vec s = mirror::nonneg_project(lam[i] + rho * p.constraint(i, t, x));
      v += (s.squaredNorm() - lam[i].squaredNorm()) / (2.0 * rho);
    }
    return v;
  }

  Vec gradient(const Vec& x) const {
    Vec gr = Vec::Zero(x.size());
    for (std::size_t i = 0; i < p.agents(); ++i) gr += p.objective_gradient(i, t, x);
    gr /= static_cast<double>(p.agents());
    for (std::size_t i = 0; i < p.agents(); ++i) {
      Vec s = mirror::nonneg_project(lam[i] + rho * p.constraint(i, t, x));
      gr += p.constraint_jacobian(i, t, x).transpose() * s;
    }
    return gr;
  }
};

}  // namespace detail

// Method of multipliers; each subproblem is solved by accelerated projected
// gradient with backtracking and adaptive restart. Starts at the set center,
// which fixes the selection when the argmin is not unique.
inline ComparatorPoint comparator_oracle(const problems::Problem& p, std::size_t t,
                                         const SolverOptions& opt = {}) {
  if (t < 1 || t > p.horizon()) throw ValidationError("comparator_oracle: round out of range");
  const auto& set = p.set();
  const std::size_t n = p.agents();
  std::vector<Vec> lam(n, Vec::Zero(p.constraints()));
  double rho = opt.rho0;
  double lip = 1.0;
  Vec x = set.center();
  ComparatorPoint out;
  double prev_viol = std::numeric_limits<double>::infinity();
  const double inner_tol = std::min(opt.tol, 1e-9);

  while (true) {
    detail::AugmentedLagrangian phi{p, t, lam, rho};
    Vec z = x;
    double momentum = 1.0;
    double gm = std::numeric_limits<double>::infinity();
    while (true) {
      if (out.iterations >= opt.max_iterations)
        throw SolverError("comparator_oracle: no convergence at t=" + std::to_string(t), out.iterations,
                          std::max(gm, out.max_violation));
      ++out.iterations;
      const double fz = phi.value(z);
      const Vec gz = phi.gradient(z);
      Vec xn;
      for (;;) {
        xn = mirror::project(set, z - gz / lip);
        const Vec step = xn - z;
        if (phi.value(xn) <= fz + gz.dot(step) + 0.5 * lip * step.squaredNorm() + 1e-15 * std::abs(fz)) break;
        lip *= 2.0;
      }
      gm = lip * (xn - z).norm();
      if (gm <= inner_tol) {
        x = xn;
        break;
      }
      if ((z - xn).dot(xn - x) > 0.0) {
        momentum = 1.0;
        z = xn;
      } else {
        const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        z = xn + ((momentum - 1.0) / next) * (xn - x);
        momentum = next;
      }
      x = xn;
    }
    ++out.outer_iterations;
    out.gradient_mapping = gm;
    for (std::size_t i = 0; i < n; ++i) lam[i] = mirror::nonneg_project(lam[i] + rho * p.constraint(i, t, x));
    out.max_violation = detail::max_violation(p, t, x);
    if (out.max_violation <= opt.tol) break;
    if (out.max_violation > 0.25 * prev_viol) {
      rho = std::min(rho * 10.0, opt.rho_max);
    }
    prev_viol = out.max_violation;
  }
  out.x = x;
  out.f = detail::global_objective(p, t, x);
  return out;
}

struct ComparatorPath {
  std::vector<ComparatorPoint> points;  // points[t-1] = x*_t
  double C_T_star = 0.0;

  std::size_t size() const noexcept { return points.size(); }
};

// Sum_{t=1}^{T} ||x*_{t+1} - x*_t|| with x*_{T+1} := x*_T.
inline double path_variation(const std::vector<Vec>& xs) {
  if (xs.empty()) throw ValidationError("path_variation: empty path");
  double s = 0.0;
  for (std::size_t t = 1; t < xs.size(); ++t) s += (xs[t] - xs[t - 1]).norm();
  return s;
}

inline double path_variation(const ComparatorPath& path) {
  std::vector<Vec> xs;
  xs.reserve(path.size());
  for (const auto& pt : path.points) xs.push_back(pt.x);
  return path_variation(xs);
}

// Entry T'-1 is the path variation of the first T' comparators.
inline std::vector<double> path_variation_prefix(const ComparatorPath& path) {
  std::vector<double> out(path.size(), 0.0);
  for (std::size_t t = 1; t < path.size(); ++t)
    out[t] = out[t - 1] + (path.points[t].x - path.points[t - 1].x).norm();
  return out;
}

inline ComparatorPath comparator_path(const problems::Problem& p, const SolverOptions& opt = {},
                                      std::size_t threads = 1) {
  ComparatorPath path;
  path.points.resize(p.horizon());
  algorithm::detail::for_nodes(p.horizon(), threads,
                               [&](std::size_t k) { path.points[k] = comparator_oracle(p, k + 1, opt); });
  if (!path.points.empty()) path.C_T_star = path_variation(path);
  return path;
}

// ---------------------------------------------------------------------------
// Regret and fit.

// Prefix sums of (1/n) sum_i f_t(x_{i,t}) - f_t(x*_t).
inline std::vector<double> dynamic_regret(const algorithm::RunTrace& trace, const ComparatorPath& path) {
  if (path.size() < trace.T || trace.f_global.size() != trace.T)
    throw ValidationError("dynamic_regret: trace and comparator path lengths differ");
  std::vector<double> out(trace.T);
  double cum = 0.0;
  for (std::size_t t = 0; t < trace.T; ++t) {
    double s = 0.0;
    for (double v : trace.f_global[t]) s += v;
    cum += s / static_cast<double>(trace.n) - path.points[t].f;
    out[t] = cum;
  }
  return out;
}

struct FitSeries {
  std::vector<double> fit;       // (1/n^2) sum_{i,j} ||[sum_t g_{i,t}(x_{j,t})]_+||
  std::vector<double> fit_sq;    // (1/n^2) sum_{i,j} ||[...]_+||^2
  std::vector<double> fit_diag;  // (1/n) sum_i ||[sum_t g_{i,t}(x_{i,t})]_+||
};

// Fit for every prefix of the trace. The cumulative constraint sums
// S_{ij} = sum_t g_{i,t}(x_{j,t}) are kept incrementally.
inline FitSeries fit(const algorithm::RunTrace& trace, const problems::Problem& p) {
  const std::size_t n = trace.n;
  const double nn = static_cast<double>(n);
  std::vector<Vec> S(n * n, Vec::Zero(trace.m));
  FitSeries out;
  out.fit.reserve(trace.T);
  out.fit_sq.reserve(trace.T);
  out.fit_diag.reserve(trace.T);
  for (std::size_t t = 1; t <= trace.T; ++t) {
    double f1 = 0.0, f2 = 0.0, fd = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Vec& s = S[i * n + j];
        s += p.constraint(i, t, trace.action(t, j));
        const double v = mirror::nonneg_project(s).norm();
        f1 += v;
        f2 += v * v;
        if (i == j) fd += v;
      }
    out.fit.push_back(f1 / (nn * nn));
    out.fit_sq.push_back(f2 / (nn * nn));
    out.fit_diag.push_back(fd / nn);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Network error: ||x_{i,t} - xbar_t|| <= sum_{tau=0}^{t-1} sqrt(n) s2^{t-tau}
//                                         (G alpha_{tau+1} / mu)(1 + F / beta_{tau+1}).

struct ConsensusInputs {
  double G = 0.0;
  double F = 0.0;
  double mu = 1.0;
  double sigma2 = 0.0;
};

struct ConsensusCheck {
  std::vector<std::vector<double>> lhs;  // [t-1][i]
  std::vector<double> rhs;               // [t-1], same for every node
  bool passed = true;
  double worst_margin = std::numeric_limits<double>::infinity();  // min rhs - lhs
  std::size_t failures = 0;
};

inline ConsensusCheck consensus_error_check(const algorithm::RunTrace& trace, const algorithm::Schedule& schedule,
                                            const ConsensusInputs& in, double tol = 1e-9) {
  ConsensusCheck out;
  const double sqrt_n = std::sqrt(static_cast<double>(trace.n));
  double acc = 0.0;  // sum_{tau<t} s2^{t-tau} h(tau+1), h(s) = sqrt(n) G alpha_s (1 + F/beta_s) / mu
  for (std::size_t t = 1; t <= trace.T; ++t) {
    const auto s = schedule.at(t);
    acc = in.sigma2 * (acc + sqrt_n * in.G * s.alpha * (1.0 + in.F / s.beta) / in.mu);
    Vec mean = Vec::Zero(trace.d);
    for (std::size_t i = 0; i < trace.n; ++i) mean += trace.action(t, i);
    mean /= static_cast<double>(trace.n);
    std::vector<double> row(trace.n);
    for (std::size_t i = 0; i < trace.n; ++i) {
      row[i] = (trace.action(t, i) - mean).norm();
      out.worst_margin = std::min(out.worst_margin, acc - row[i]);
      if (row[i] > acc + tol) {
        out.passed = false;
        ++out.failures;
      }
    }
    out.lhs.push_back(std::move(row));
    out.rhs.push_back(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regret / fit bound constants.

struct BoundInputs {
  double F = 0.0;
  double G = 0.0;
  double L = 0.0;
  double K = 0.0;
  double mu = 1.0;
  double diameter = 0.0;
  std::size_t n = 1;
  double sigma2 = 0.0;
  double a = 2.0 / 3.0;
  double b = 1.0 / 3.0;
};

struct BoundConstants {
  double B1, R, R1, D, D1, D2, D3;
  double K;
  double a, b;

  double regret_exponent() const { return std::max(a, 1.0 - a + b); }
  std::array<double, 3> fit_sq_exponents() const { return {2.0 - b, 1.0 + a - b, 2.0 + 2.0 * b - 2.0 * a}; }
};

inline BoundConstants bound_constants(const BoundInputs& in) {
  if (!(in.sigma2 < 1.0)) throw ValidationError("bound_constants: sigma2 must be < 1 (connected network)");
  if (!(in.b > 0.0 && in.b < in.a && in.a < 1.0)) throw ValidationError("bound_constants: need 0 < b < a < 1");
  BoundConstants c{};
  c.K = in.K;
  c.a = in.a;
  c.b = in.b;
  const double Kd = in.K * in.diameter;
  const double g2 = in.G * in.G / (in.mu * (1.0 - in.a));
  c.B1 = 2.0 * in.F + in.G * in.diameter;
  c.R = 4.0 * in.F * in.L * in.G * std::sqrt(static_cast<double>(in.n)) * in.sigma2 /
        (in.mu * (1.0 - in.a) * (1.0 - in.sigma2));
  c.R1 = c.R + c.B1 * c.B1 / (2.0 * in.b) + g2 + 2.0 * Kd;
  c.D = 2.0 + 4.0 * g2 + 2.0 / (1.0 - in.b);
  // 2Kd appears twice, as in the published constant.
  c.D1 = 2.0 * c.D * (2.0 * in.F + 2.0 * Kd + c.B1 * c.B1 / (2.0 * in.b) + g2 + 2.0 * Kd);
  c.D2 = 4.0 * in.K * c.D;
  c.D3 = 16.0 * in.L * in.L * c.R * c.R;
  return c;
}

struct BoundValues {
  double regret_rhs;
  double fit_sq_rhs;
};

inline BoundValues theorem1_bounds(const BoundConstants& c, double T, double C_T_star) {
  const auto e = c.fit_sq_exponents();
  return {c.R1 * std::pow(T, c.regret_exponent()) + 2.0 * c.K * std::pow(T, c.a) * C_T_star,
          c.D1 * std::pow(T, e[0]) + c.D2 * std::pow(T, e[1]) * C_T_star + c.D3 * std::pow(T, e[2])};
}

// ---------------------------------------------------------------------------
// Log-log slope.

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t used = 0;
  std::vector<std::string> warnings;
};

inline SlopeFit slope_estimate(const std::vector<std::pair<double, double>>& values) {
  SlopeFit out;
  std::vector<double> lx, ly;
  for (auto [T, v] : values) {
    if (!(T > 0.0) || !(v > 0.0) || !std::isfinite(v)) {
      out.warnings.push_back("excluded nonpositive point (T=" + std::to_string(T) + ", value=" +
                             std::to_string(v) + ")");
      continue;
    }
    lx.push_back(std::log(T));
    ly.push_back(std::log(v));
  }
  out.used = lx.size();
  if (out.used < 2) throw ValidationError("slope_estimate: fewer than 2 usable points");
  const double k = static_cast<double>(out.used);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw ValidationError("slope_estimate: all horizons are equal");
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  return out;
}

}  // namespace doco::evaluation
