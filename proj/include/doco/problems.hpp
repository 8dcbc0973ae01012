#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doco/error.hpp"
#include "doco/mirror.hpp"
#include "doco/rng.hpp"

namespace doco::problems {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using mirror::FeasibleSet;

// Uniform bounds on the function family: |f|, ||g|| <= F; ||grad f||,
// ||Jac g||_F <= G; f and g are L-Lipschitz on X.
struct Constants {
  double F = 0.0;
  double G = 0.0;
  double L = 0.0;
};

// Sequences f_{i,t}: X -> R and g_{i,t}: X -> R^m for agents i in [0, n) and
// rounds t in [0, T]. Round 0 is the all-zero function pair the engine starts
// from; subclasses only ever see t >= 1.
class Problem {
 public:
  virtual ~Problem() = default;

  std::size_t agents() const noexcept { return n_; }
  Eigen::Index dim() const noexcept { return set_.dim(); }
  Eigen::Index constraints() const noexcept { return m_; }
  std::size_t horizon() const noexcept { return T_; }
  const FeasibleSet& set() const noexcept { return set_; }

  double objective(std::size_t i, std::size_t t, const Vec& x) const {
    check(i, t, x);
    return t == 0 ? 0.0 : do_objective(i, t, x);
  }
  Vec objective_gradient(std::size_t i, std::size_t t, const Vec& x) const {
    check(i, t, x);
    return t == 0 ? Vec::Zero(dim()) : do_objective_gradient(i, t, x);
  }
  Vec constraint(std::size_t i, std::size_t t, const Vec& x) const {
    check(i, t, x);
    return t == 0 ? Vec::Zero(m_) : do_constraint(i, t, x);
  }
  Mat constraint_jacobian(std::size_t i, std::size_t t, const Vec& x) const {
    check(i, t, x);
    return t == 0 ? Mat::Zero(m_, dim()) : do_constraint_jacobian(i, t, x);
  }

  // Declared (analytic) regularity constants.
  virtual Constants constants() const = 0;

  // A point satisfying every constraint for every (i, t).
  virtual Vec feasible_point() const { return set_.center(); }

 protected:
  Problem(std::size_t n, Eigen::Index m, std::size_t T, FeasibleSet set)
      : n_(n), m_(m), T_(T), set_(std::move(set)) {
    if (n == 0) throw ValidationError("problem: need at least one agent");
    if (m < 0) throw ValidationError("problem: negative constraint count");
  }

  virtual double do_objective(std::size_t i, std::size_t t, const Vec& x) const = 0;
  virtual Vec do_objective_gradient(std::size_t i, std::size_t t, const Vec& x) const = 0;
  virtual Vec do_constraint(std::size_t i, std::size_t t, const Vec& x) const = 0;
  virtual Mat do_constraint_jacobian(std::size_t i, std::size_t t, const Vec& x) const = 0;

 private:
  void check(std::size_t i, std::size_t t, const Vec& x) const {
    if (i >= n_)
      throw ValidationError("agent index " + std::to_string(i) + " out of range [0," +
                            std::to_string(n_) + ")");
    if (t > T_)
      throw ValidationError("round " + std::to_string(t) + " beyond horizon " + std::to_string(T_));
    if (x.size() != dim()) throw ValidationError("point has wrong dimension");
  }

  std::size_t n_;
  Eigen::Index m_;
  std::size_t T_;
  FeasibleSet set_;
};

// Problem assembled from callables. Handy for hand-built instances.
class CustomProblem final : public Problem {
 public:
  using Scalar = std::function<double(std::size_t, std::size_t, const Vec&)>;
  using Vector = std::function<Vec(std::size_t, std::size_t, const Vec&)>;
  using Matrix = std::function<Mat(std::size_t, std::size_t, const Vec&)>;

  struct Functions {
    Scalar f;
    Vector grad_f;
    Vector g;
    Matrix jac_g;
  };

  CustomProblem(std::size_t n, Eigen::Index m, std::size_t T, FeasibleSet set, Functions fns,
                Constants declared, std::function<Vec()> feasible = {})
      : Problem(n, m, T, std::move(set)),
        fns_(std::move(fns)),
        declared_(declared),
        feasible_(std::move(feasible)) {}

  Constants constants() const override { return declared_; }
  Vec feasible_point() const override { return feasible_ ? feasible_() : Problem::feasible_point(); }

 protected:
  double do_objective(std::size_t i, std::size_t t, const Vec& x) const override { return fns_.f(i, t, x); }
  Vec do_objective_gradient(std::size_t i, std::size_t t, const Vec& x) const override {
    return fns_.grad_f(i, t, x);
  }
  Vec do_constraint(std::size_t i, std::size_t t, const Vec& x) const override { return fns_.g(i, t, x); }
  Mat do_constraint_jacobian(std::size_t i, std::size_t t, const Vec& x) const override {
    return fns_.jac_g(i, t, x);
  }

 private:
  Functions fns_;
  Constants declared_;
  std::function<Vec()> feasible_;
};

enum class SuiteKind { tracking, regression };

// interior: every drifting point satisfies all constraints with margin.
// active: drifting points lie beyond the constraints, which bind at the comparator.
enum class ConstraintRegime { interior, active };

inline const char* to_string(ConstraintRegime r) { return r == ConstraintRegime::interior ? "interior" : "active"; }

inline const char* to_string(SuiteKind k) { return k == SuiteKind::tracking ? "tracking" : "regression"; }

struct SuiteParams {
  SuiteKind kind = SuiteKind::tracking;
  std::size_t n = 8;
  Eigen::Index d = 2;
  Eigen::Index m = 2;
  std::size_t T = 256;
  double drift_rho = 1.0;    // per-step target displacement <= drift_delta / t^rho
  double drift_delta = 0.05;
  ConstraintRegime regime = ConstraintRegime::interior;
  std::uint64_t seed = 0;
};

namespace detail {

// Oscillation amplitude of the drifting points in unit-cube coordinates.
inline constexpr double kAmplitude = 0.25;
// Base constraint slack oscillates in [mid - amp, mid + amp].
inline constexpr double kSlackMid = 0.15;
inline constexpr double kSlackAmp = 0.10;
inline constexpr double kActiveSlackMid = 0.03;
inline constexpr double kActiveSlackAmp = 0.02;

// Affine image of the unit cube (or, for the simplex, a normalization of
// [1,2]^d) inside X, with its Lipschitz constant.
struct CubeEmbedding {
  const FeasibleSet* set;

  Vec operator()(const Vec& p) const {
    switch (set->kind()) {
      case mirror::SetKind::box: return set->lo() + p.cwiseProduct(set->hi() - set->lo());
      case mirror::SetKind::ball:
        return set->ball_center() +
               (set->radius() / std::sqrt(static_cast<double>(p.size()))) * (2.0 * p.array() - 1.0).matrix();
      case mirror::SetKind::simplex: {
        Vec q = (p.array() + 1.0).matrix();
        return q / q.sum();
      }
    }
    return p;
  }

  double lipschitz() const {
    const double d = static_cast<double>(set->dim());
    switch (set->kind()) {
      case mirror::SetKind::box: return std::max((set->hi() - set->lo()).maxCoeff(), 1e-300);
      case mirror::SetKind::ball: return 2.0 * set->radius() / std::sqrt(d);
      case mirror::SetKind::simplex: return (1.0 + std::sqrt(d)) / d;
    }
    return 1.0;
  }
};

// Random matrix whose rows have norm in [0.5, 1]; entries drawn from
// [lo, 1] before normalization.
inline Mat random_rows(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo) {
  Mat A(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Vec v;
    do {
      v = rng.uniform_vector(cols, lo, 1.0);
    } while (v.norm() < 1e-3);
    A.row(r) = (rng.uniform(0.5, 1.0) / v.norm()) * v.transpose();
  }
  return A;
}

}  // namespace detail

// Generated suite with affine local constraints g_{i,t}(x) = A_i x - b_{i,t},
// b_{i,t} = A_i x0 + s_{i,t}, s_{i,t} > 0, so x0 (the set center) is strictly
// feasible for every (i, t). All time variation follows a shared phase theta_t
// whose increments shrink like delta / t^rho.
class GeneratedSuite final : public Problem {
 public:
  GeneratedSuite(const SuiteParams& params, FeasibleSet set)
      : Problem(params.n, params.m, params.T, std::move(set)), params_(params) {
    if (params.d != this->set().dim())
      throw ValidationError("problem.d does not match the feasible set dimension");
    if (params.m < 1) throw ValidationError("problem.m must be at least 1");
    if (!(params.drift_rho >= 0.0)) throw ValidationError("drift_rho must be nonnegative");
    if (!(params.drift_delta >= 0.0)) throw ValidationError("drift_delta must be nonnegative");
    generate();
  }

  const SuiteParams& params() const noexcept { return params_; }
  double phase(std::size_t t) const { return theta_.at(t); }

  // Drifting point of agent i at round t >= 1 (tracking target / regression latent).
  const Vec& target(std::size_t i, std::size_t t) const { return targets_[idx(i, t)]; }
  const Mat& constraint_matrix(std::size_t i) const { return A_[i]; }
  const Vec& constraint_offset(std::size_t i, std::size_t t) const { return b_[idx(i, t)]; }
  const Vec& regressor(std::size_t i) const { return h_[i]; }

  Constants constants() const override { return constants_; }
  Vec feasible_point() const override { return x0_; }

 protected:
  double do_objective(std::size_t i, std::size_t t, const Vec& x) const override {
    if (params_.kind == SuiteKind::tracking) return 0.5 * (x - target(i, t)).squaredNorm();
    double r = h_[i].dot(x - target(i, t));
    return 0.5 * r * r;
  }
  Vec do_objective_gradient(std::size_t i, std::size_t t, const Vec& x) const override {
    if (params_.kind == SuiteKind::tracking) return x - target(i, t);
    return h_[i] * h_[i].dot(x - target(i, t));
  }
  Vec do_constraint(std::size_t i, std::size_t t, const Vec& x) const override {
    return A_[i] * x - b_[idx(i, t)];
  }
  Mat do_constraint_jacobian(std::size_t i, std::size_t, const Vec&) const override { return A_[i]; }

 private:
  std::size_t idx(std::size_t i, std::size_t t) const { return (t - 1) * agents() + i; }

  void generate() {
    const std::size_t n = agents();
    const std::size_t T = horizon();
    const Eigen::Index d = dim();
    const Eigen::Index m = constraints();
    Rng rng(params_.seed, "problem");
    detail::CubeEmbedding embed{&set()};
    x0_ = set().center();

    const bool active = params_.regime == ConstraintRegime::active;
    const double amp = active ? detail::kAmplitude : 0.5 * detail::kAmplitude;
    const double lo = active ? 0.5 : 0.5 - amp, hi = active ? 1.0 - amp : 0.5 + amp;
    // Bound on ||c - x0|| over every drifting point of the interior regime.
    const double reach = embed.lipschitz() * 2.0 * amp * std::sqrt(static_cast<double>(d));

    // Phase: theta_1 = 0, theta_t - theta_{t-1} = step / t^rho.
    const double step = params_.drift_delta / (embed.lipschitz() * amp * std::sqrt(static_cast<double>(d)));
    theta_.assign(T + 1, 0.0);
    for (std::size_t t = 2; t <= T; ++t)
      theta_[t] = theta_[t - 1] + step / std::pow(static_cast<double>(t), params_.drift_rho);

    // Interior: phase offsets shared by all agents, so the network average
    // moves with the full amplitude. Active: per-agent offsets, so the average
    // stays on the upper side of x0.
    Mat base(d, n), phi(d, n), psi(m, n);
    Vec shared(d);
    for (Eigen::Index k = 0; k < d; ++k) shared[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    A_.clear();
    h_.clear();
    extra_.assign(n, Vec());
    for (std::size_t i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) {
        base(k, i) = rng.uniform(lo, hi);
        phi(k, i) = active ? rng.uniform(0.0, 2.0 * std::numbers::pi) : shared[k];
      }
      for (Eigen::Index k = 0; k < m; ++k) psi(k, i) = rng.uniform(0.0, 2.0 * std::numbers::pi);
      A_.push_back(detail::random_rows(rng, m, d, params_.kind == SuiteKind::tracking && !active ? -1.0 : 0.0));
      h_.push_back(params_.kind == SuiteKind::regression ? Vec(detail::random_rows(rng, 1, d, -1.0).row(0).transpose())
                                                         : Vec::Zero(d));
      extra_[i] = active ? Vec::Zero(m) : Vec(A_[i].rowwise().norm() * reach);
    }

    const double mid = active ? detail::kActiveSlackMid : detail::kSlackMid;
    const double swing = active ? detail::kActiveSlackAmp : detail::kSlackAmp;
    smax_ = mid + swing;
    targets_.assign(T * n, Vec());
    b_.assign(T * n, Vec());
    for (std::size_t t = 1; t <= T; ++t)
      for (std::size_t i = 0; i < n; ++i) {
        Vec p(d);
        for (Eigen::Index k = 0; k < d; ++k) p[k] = base(k, i) + amp * std::cos(theta_[t] + phi(k, i));
        targets_[idx(i, t)] = embed(p);
        Vec s(m);
        for (Eigen::Index k = 0; k < m; ++k) s[k] = extra_[i][k] + mid + swing * std::sin(theta_[t] + psi(k, i));
        b_[idx(i, t)] = A_[i] * x0_ + s;
      }

    compute_constants();
  }

  void compute_constants() {
    const double diam = set().diameter();
    const double rc = set().center_radius();
    Constants c;
    for (std::size_t i = 0; i < agents(); ++i) {
      double Ff, Gf;
      if (params_.kind == SuiteKind::tracking) {
        Ff = 0.5 * diam * diam;  // x, c in X
        Gf = diam;
      } else {
        const double h2 = h_[i].squaredNorm();
        Ff = 0.5 * h2 * diam * diam;
        Gf = h2 * diam;
      }
      double g2 = 0.0;
      for (Eigen::Index k = 0; k < A_[i].rows(); ++k) {
        const double gk = A_[i].row(k).norm() * rc + extra_[i][k] + smax_;
        g2 += gk * gk;
      }
      const double Gg = A_[i].norm();  // Frobenius
      c.F = std::max({c.F, Ff, std::sqrt(g2)});
      c.G = std::max({c.G, Gf, Gg});
      c.L = std::max({c.L, Gf, Gg});
    }
    constants_ = c;
  }

  SuiteParams params_;
  Vec x0_;
  std::vector<double> theta_;
  std::vector<Mat> A_;
  std::vector<Vec> h_;
  std::vector<Vec> targets_;
  std::vector<Vec> b_;
  std::vector<Vec> extra_;  // slack added so the interior regime never binds at a target
  double smax_ = 0.0;
  Constants constants_;
};

inline std::unique_ptr<GeneratedSuite> make_suite(const SuiteParams& params, const FeasibleSet& set) {
  return std::make_unique<GeneratedSuite>(params, set);
}

struct Certificate {
  Constants declared;
  Constants empirical;
  bool passed = false;
};

// Audits the declared constants against `samples` random draws of
// (i, t, x, y). Failures are reported, not thrown.
inline Certificate certify_constants(const Problem& problem, std::size_t samples, std::uint64_t seed = 0) {
  if (samples < 1) throw ValidationError("certify_constants: samples must be at least 1");
  if (problem.horizon() < 1) throw ValidationError("certify_constants: problem has no rounds");
  Rng rng(seed, "certify");
  Certificate cert;
  cert.declared = problem.constants();
  Constants& e = cert.empirical;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i = rng.below(problem.agents());
    const std::size_t t = 1 + rng.below(problem.horizon());
    const Vec x = problem.set().sample(rng);
    const Vec y = problem.set().sample(rng);
    const double fx = problem.objective(i, t, x);
    const Vec gx = problem.constraint(i, t, x);
    e.F = std::max({e.F, std::abs(fx), gx.norm()});
    e.G = std::max({e.G, problem.objective_gradient(i, t, x).norm(),
                    problem.constraint_jacobian(i, t, x).norm()});
    const double dist = (x - y).norm();
    if (dist > 1e-12) {
      e.L = std::max({e.L, std::abs(fx - problem.objective(i, t, y)) / dist,
                      (gx - problem.constraint(i, t, y)).norm() / dist});
    }
  }
  cert.passed = cert.declared.F >= e.F && cert.declared.G >= e.G && cert.declared.L >= e.L;
  return cert;
}

}  // namespace doco::problems
