#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "doco/error.hpp"
#include "doco/mirror.hpp"
#include "doco/network.hpp"
#include "doco/problems.hpp"

namespace doco::algorithm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct StepSizes {
  double alpha;  // primal
  double beta;   // dual regularization
  double gamma;  // dual
};

// alpha_t = t^-a, beta_t = t^-b, gamma_t = t^-(1-b) with 0 < b < a < 1.
class Schedule {
 public:
  Schedule(double a, double b) : a_(a), b_(b) {
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("schedule: a must lie in (0,1)");
    if (!(b > 0.0 && b < 1.0)) throw ValidationError("schedule: b must lie in (0,1)");
    if (!(a > b)) throw ValidationError("schedule: a must be strictly greater than b");
  }

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }

  StepSizes at(std::size_t t) const {
    if (t < 1) throw ValidationError("step sizes are defined for t >= 1");
    const double tt = static_cast<double>(t);
    return {std::pow(tt, -a_), std::pow(tt, -b_), std::pow(tt, -(1.0 - b_))};
  }

 private:
  double a_;
  double b_;
};

inline StepSizes step_sizes(const Schedule& s, std::size_t t) { return s.at(t); }

struct NodeState {
  Vec x;  // action x_{i,t}
  Vec y;  // pre-consensus iterate y_{i,t}
  Vec q;  // dual variable q_{i,t}
};

// a = grad f + J^T q.
inline Vec primal_direction(const Vec& grad_f, const Mat& jac_g, const Vec& q) {
  if (jac_g.cols() != grad_f.size() || jac_g.rows() != q.size())
    throw ValidationError("primal_direction: dimension mismatch");
  return grad_f + jac_g.transpose() * q;
}

inline Vec primal_update(const mirror::MirrorMap& map, const mirror::FeasibleSet& set, const Vec& x_prev,
                         const Vec& a_dir, double alpha) {
  return mirror::regularized_projection(map, set, x_prev, a_dir, alpha);
}

// First-order model of g around x_prev, evaluated at y_new.
inline Vec constraint_surrogate(const Mat& jac_g, const Vec& y_new, const Vec& x_prev, const Vec& g_val) {
  if (jac_g.cols() != y_new.size() || y_new.size() != x_prev.size() || jac_g.rows() != g_val.size())
    throw ValidationError("constraint_surrogate: dimension mismatch");
  return jac_g * (y_new - x_prev) + g_val;
}

// [q + gamma (b - beta q)]_+.
inline Vec dual_update(const Vec& q_prev, const Vec& b_sur, double gamma, double beta) {
  if (q_prev.size() != b_sur.size()) throw ValidationError("dual_update: dimension mismatch");
  return mirror::nonneg_project(q_prev + gamma * (b_sur - beta * q_prev));
}

// Everything node i saw and produced in one round.
struct NodeRound {
  Vec x_prev;  // x_{i,t-1}
  Vec q_prev;  // q_{i,t-1}
  Vec grad_f;  // grad f_{i,t-1}(x_{i,t-1})
  Mat jac_g;   // Jacobian of g_{i,t-1} at x_{i,t-1}
  Vec g_val;   // g_{i,t-1}(x_{i,t-1})
  Vec a;
  Vec y;
  Vec b;
  Vec q;
  Vec x;  // x_{i,t} after consensus
};

struct RoundRecord {
  std::size_t t = 0;
  StepSizes steps{};
  std::vector<NodeRound> nodes;
  // Largest coordinate change from clamping entropy-map iterates into the
  // floored simplex this round; 0 for the Euclidean map.
  double interior_adjust = 0.0;
};

// Starting action: the origin if it lies in X, otherwise the set center.
// Entropy-map runs start at the uniform point.
inline Vec initial_point(const mirror::MirrorMap& map, const mirror::FeasibleSet& set) {
  Vec zero = Vec::Zero(set.dim());
  if (map.kind() == mirror::MapKind::euclidean && set.contains(zero, 0.0)) return zero;
  return set.center();
}

inline std::vector<NodeState> initial_states(const problems::Problem& problem, const mirror::MirrorMap& map) {
  const Vec x0 = initial_point(map, problem.set());
  return std::vector<NodeState>(problem.agents(), NodeState{x0, x0, Vec::Zero(problem.constraints())});
}

namespace detail {

// Lines 6-9 for one node, from stored observations.
inline void local_update(NodeRound& r, const mirror::MirrorMap& map, const mirror::FeasibleSet& set,
                         const StepSizes& s, double& adjust) {
  r.a = primal_direction(r.grad_f, r.jac_g, r.q_prev);
  r.y = primal_update(map, set, r.x_prev, r.a, s.alpha);
  if (map.kind() == mirror::MapKind::negative_entropy) adjust = std::max(adjust, mirror::clamp_to_interior(r.y));
  r.b = constraint_surrogate(r.jac_g, r.y, r.x_prev, r.g_val);
  r.q = dual_update(r.q_prev, r.b, s.gamma, s.beta);
}

template <class Fn>
void for_nodes(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min(threads, n);
  std::vector<std::exception_ptr> errors(workers);
  auto chunk = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(chunk, w);
    chunk(0);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Line 12 on the recorded y's, plus the entropy clamp.
inline void consensus(RoundRecord& rec, const network::WeightMatrix& W, const mirror::MirrorMap& map) {
  std::vector<Vec> ys;
  ys.reserve(rec.nodes.size());
  for (const auto& r : rec.nodes) ys.push_back(r.y);
  auto xs = network::mix(W, ys);
  for (std::size_t i = 0; i < rec.nodes.size(); ++i) {
    if (map.kind() == mirror::MapKind::negative_entropy)
      rec.interior_adjust = std::max(rec.interior_adjust, mirror::clamp_to_interior(xs[i]));
    rec.nodes[i].x = std::move(xs[i]);
  }
}

}  // namespace detail

// One round of the distributed primal-dual mirror descent. Round t queries
// only the functions indexed t-1, at x_{i,t-1}.
inline std::pair<std::vector<NodeState>, RoundRecord> run_round(const std::vector<NodeState>& states,
                                                                const problems::Problem& problem,
                                                                const network::WeightMatrix& W,
                                                                const mirror::MirrorMap& map,
                                                                const Schedule& schedule, std::size_t t,
                                                                std::size_t threads = 1) {
  const std::size_t n = problem.agents();
  if (states.size() != n || W.size() != n) throw ValidationError("run_round: agent count mismatch");
  RoundRecord rec;
  rec.t = t;
  rec.steps = schedule.at(t);
  rec.nodes.resize(n);
  std::vector<double> adjust(n, 0.0);

  detail::for_nodes(n, threads, [&](std::size_t i) {
    NodeRound& r = rec.nodes[i];
    r.x_prev = states[i].x;
    r.q_prev = states[i].q;
    r.grad_f = problem.objective_gradient(i, t - 1, r.x_prev);
    r.jac_g = problem.constraint_jacobian(i, t - 1, r.x_prev);
    r.g_val = problem.constraint(i, t - 1, r.x_prev);
    detail::local_update(r, map, problem.set(), rec.steps, adjust[i]);
  });
  for (double v : adjust) rec.interior_adjust = std::max(rec.interior_adjust, v);

  detail::consensus(rec, W, map);

  std::vector<NodeState> next(n);
  for (std::size_t i = 0; i < n; ++i) next[i] = NodeState{rec.nodes[i].x, rec.nodes[i].y, rec.nodes[i].q};
  return {std::move(next), std::move(rec)};
}

// Recomputes a round from the observations stored in its record.
inline RoundRecord replay_round(const RoundRecord& stored, const network::WeightMatrix& W,
                                const mirror::MirrorMap& map, const mirror::FeasibleSet& set,
                                const Schedule& schedule) {
  RoundRecord rec;
  rec.t = stored.t;
  rec.steps = schedule.at(stored.t);
  rec.nodes.resize(stored.nodes.size());
  for (std::size_t i = 0; i < stored.nodes.size(); ++i) {
    const NodeRound& s = stored.nodes[i];
    NodeRound& r = rec.nodes[i];
    r.x_prev = s.x_prev;
    r.q_prev = s.q_prev;
    r.grad_f = s.grad_f;
    r.jac_g = s.jac_g;
    r.g_val = s.g_val;
    detail::local_update(r, map, set, rec.steps, rec.interior_adjust);
  }
  detail::consensus(rec, W, map);
  return rec;
}

enum class Mode { strict, audit };

struct Violation {
  std::string invariant;
  std::size_t t = 0;
  std::size_t node = 0;
  std::string detail;
};

// Invariant names as they appear in reports.
inline constexpr const char* kDualNonneg = "dual_nonnegative";
inline constexpr const char* kDualBound = "dual_bound";
inline constexpr const char* kPrimalFeasible = "primal_in_set";

struct EngineOptions {
  Mode mode = Mode::strict;
  std::size_t threads = 1;
  double membership_tol = 1e-12;
  double dual_bound_rel_tol = 1e-12;
  // Test hook: overrides the F used by the dual-bound check.
  std::optional<double> dual_bound_F;
};

struct RunTrace {
  std::size_t n = 0;
  Eigen::Index d = 0;
  Eigen::Index m = 0;
  std::size_t T = 0;
  std::vector<RoundRecord> rounds;  // rounds[t-1] is round t
  // Values revealed after round t's action: f_{i,t}(x_{i,t}), g_{i,t}(x_{i,t})
  // and f_t(x_{i,t}) = (1/n) sum_j f_{j,t}(x_{i,t}).
  std::vector<std::vector<double>> f_local;
  std::vector<std::vector<Vec>> g_local;
  std::vector<std::vector<double>> f_global;
  std::vector<Violation> violations;
  double max_dual_ratio = 0.0;  // max over (i,t) of ||q_{i,t}|| beta_t / F
  double max_interior_adjust = 0.0;

  const Vec& action(std::size_t t, std::size_t i) const { return rounds.at(t - 1).nodes.at(i).x; }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void check_round(const RoundRecord& rec, const problems::Problem& problem, const EngineOptions& opt,
                        double F, RunTrace& trace) {
  auto report = [&](const char* name, std::size_t i, const std::string& detail) {
    if (opt.mode == Mode::strict) throw InvariantViolation(name, rec.t, i, detail);
    trace.violations.push_back({name, rec.t, i, detail});
  };
  const double bound = F / rec.steps.beta;
  for (std::size_t i = 0; i < rec.nodes.size(); ++i) {
    const NodeRound& r = rec.nodes[i];
    if (r.q.size() > 0 && r.q.minCoeff() < 0.0) report(kDualNonneg, i, "negative dual coordinate");
    const double qn = r.q.norm();
    if (qn > bound * (1.0 + opt.dual_bound_rel_tol))
      report(kDualBound, i, "||q|| = " + detail::fmt(qn) + " exceeds F/beta_t = " + detail::fmt(bound));
    if (bound > 0.0) trace.max_dual_ratio = std::max(trace.max_dual_ratio, qn / bound);
    if (!problem.set().contains(r.y, opt.membership_tol)) report(kPrimalFeasible, i, "y outside X");
    if (!problem.set().contains(r.x, opt.membership_tol)) report(kPrimalFeasible, i, "x outside X");
  }
}

}  // namespace detail

// Runs rounds 1..T of the algorithm, checking the runtime invariants after
// each round.
inline RunTrace run(const problems::Problem& problem, const network::WeightMatrix& W, const mirror::MirrorMap& map,
                    const Schedule& schedule, const EngineOptions& opt = {}) {
  const std::size_t n = problem.agents();
  if (W.size() != n) throw ValidationError("weight matrix size does not match the agent count");
  if (map.dim() != problem.dim()) throw ValidationError("mirror map dimension does not match the problem");
  RunTrace trace;
  trace.n = n;
  trace.d = problem.dim();
  trace.m = problem.constraints();
  trace.T = problem.horizon();
  trace.rounds.reserve(trace.T);
  const double F = opt.dual_bound_F.value_or(problem.constants().F);

  auto states = initial_states(problem, map);
  for (std::size_t t = 1; t <= trace.T; ++t) {
    auto [next, rec] = run_round(states, problem, W, map, schedule, t, opt.threads);
    detail::check_round(rec, problem, opt, F, trace);
    trace.max_interior_adjust = std::max(trace.max_interior_adjust, rec.interior_adjust);

    // Reveal f_{.,t}, g_{.,t} at the actions just taken.
    std::vector<double> fl(n), fg(n);
    std::vector<Vec> gl(n);
    detail::for_nodes(n, opt.threads, [&](std::size_t i) {
      const Vec& x = rec.nodes[i].x;
      fl[i] = problem.objective(i, t, x);
      gl[i] = problem.constraint(i, t, x);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += problem.objective(j, t, x);
      fg[i] = s / static_cast<double>(n);
    });
    trace.f_local.push_back(std::move(fl));
    trace.g_local.push_back(std::move(gl));
    trace.f_global.push_back(std::move(fg));
    trace.rounds.push_back(std::move(rec));
    states = std::move(next);
  }
  return trace;
}

}  // namespace doco::algorithm
