#include <gtest/gtest.h>

#include <cmath>

#include "doco/problems.hpp"
#include "doco/properties.hpp"

using namespace doco;
using mirror::FeasibleSet;
using problems::ConstraintRegime;
using problems::CustomProblem;
using problems::SuiteKind;
using problems::SuiteParams;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Tracking problem toward c = (1,1) with g(x) = x_1 - 0.5, built from callables.
CustomProblem hand_problem(int* calls = nullptr) {
  CustomProblem::Functions fns;
  const Vec c = v2(1, 1);
  fns.f = [c, calls](std::size_t, std::size_t, const Vec& x) {
    if (calls) ++*calls;
    return 0.5 * (x - c).squaredNorm();
  };
  fns.grad_f = [c](std::size_t, std::size_t, const Vec& x) -> Vec { return x - c; };
  fns.g = [](std::size_t, std::size_t, const Vec& x) -> Vec { return Vec::Constant(1, x[0] - 0.5); };
  fns.jac_g = [](std::size_t, std::size_t, const Vec&) -> Mat { return Mat{{1.0, 0.0}}; };
  return CustomProblem(1, 1, 4, FeasibleSet::unit_box(2), fns, {1.0, std::sqrt(2.0), std::sqrt(2.0)});
}

SuiteParams params(SuiteKind kind, ConstraintRegime regime, std::uint64_t seed) {
  SuiteParams p;
  p.kind = kind;
  p.regime = regime;
  p.n = 6;
  p.d = 2;
  p.m = 2;
  p.T = 64;
  p.seed = seed;
  return p;
}

std::vector<FeasibleSet> sets() {
  return {FeasibleSet::unit_box(2), FeasibleSet::ball(v2(0.5, 0.5), 1.0), FeasibleSet::simplex(2)};
}

}  // namespace

TEST(Objective, RoundZeroIsTheZeroFunction) {
  int calls = 0;
  auto p = hand_problem(&calls);
  EXPECT_EQ(p.objective(0, 0, v2(0.3, 0.2)), 0.0);
  EXPECT_EQ(p.objective_gradient(0, 0, v2(0.3, 0.2)), Vec::Zero(2));
  EXPECT_EQ(p.constraint(0, 0, v2(0.3, 0.2)), Vec::Zero(1));
  EXPECT_EQ(p.constraint_jacobian(0, 0, v2(0.3, 0.2)), Mat::Zero(1, 2));
  EXPECT_EQ(calls, 0);
}

TEST(Objective, TrackingClosedForm) {
  auto p = hand_problem();
  // 0.5 ||(0,0) - (1,1)||^2 = 1.
  EXPECT_EQ(p.objective(0, 1, v2(0, 0)), 1.0);
  EXPECT_EQ(p.objective_gradient(0, 1, v2(0, 0)), v2(-1, -1));
  EXPECT_EQ(p.objective(0, 2, v2(1, 1)), 0.0);
  EXPECT_EQ(p.objective_gradient(0, 2, v2(1, 1)), v2(0, 0));
}

TEST(Objective, GeneratedTrackingAtTargetIsZero) {
  auto suite = problems::make_suite(params(SuiteKind::tracking, ConstraintRegime::interior, 3), FeasibleSet::unit_box(2));
  for (std::size_t t : {1u, 17u, 64u}) {
    const Vec& c = suite->target(2, t);
    EXPECT_EQ(suite->objective(2, t, c), 0.0);
    EXPECT_EQ(suite->objective_gradient(2, t, c), Vec::Zero(2));
  }
}

TEST(Objective, IndexErrors) {
  auto p = hand_problem();
  EXPECT_THROW(p.objective(1, 1, v2(0, 0)), ValidationError);
  EXPECT_THROW(p.objective(0, 5, v2(0, 0)), ValidationError);
  EXPECT_THROW(p.constraint(0, 1, Vec::Zero(3)), ValidationError);
}

TEST(Constraint, AffineExamples) {
  auto p = hand_problem();
  EXPECT_NEAR(p.constraint(0, 1, v2(0.8, 0.1))[0], 0.3, 1e-15);
  EXPECT_EQ(p.constraint_jacobian(0, 1, v2(0.8, 0.1)), (Mat{{1.0, 0.0}}));

  CustomProblem::Functions fns;
  fns.f = [](std::size_t, std::size_t, const Vec&) { return 0.0; };
  fns.grad_f = [](std::size_t, std::size_t, const Vec& x) -> Vec { return Vec::Zero(x.size()); };
  fns.g = [](std::size_t, std::size_t, const Vec& x) -> Vec { return Vec::Constant(1, x.sum() - 2.0); };
  fns.jac_g = [](std::size_t, std::size_t, const Vec&) -> Mat { return Mat::Ones(1, 2); };
  CustomProblem budget(1, 1, 1, FeasibleSet::unit_box(2), fns, {});
  EXPECT_EQ(budget.constraint(0, 1, v2(1, 1))[0], 0.0);
}

TEST(Certify, TrackingOnUnitBox) {
  SuiteParams sp = params(SuiteKind::tracking, ConstraintRegime::interior, 5);
  auto suite = problems::make_suite(sp, FeasibleSet::unit_box(2));
  auto cert = problems::certify_constants(*suite, 5000, 1);
  EXPECT_TRUE(cert.passed);
  // sup over the box of 0.5||x - c||^2 with x, c in [0,1]^2 is 1.
  double fmax = 0.0;
  Rng rng(9);
  for (int s = 0; s < 5000; ++s) {
    const Vec x = FeasibleSet::unit_box(2).sample(rng);
    fmax = std::max(fmax, suite->objective(rng.below(sp.n), 1 + rng.below(sp.T), x));
  }
  EXPECT_LE(fmax, 1.0);
  EXPECT_GE(cert.declared.F, 1.0);
}

TEST(Certify, ZeroProblemAndZeroSamples) {
  CustomProblem::Functions fns;
  fns.f = [](std::size_t, std::size_t, const Vec&) { return 0.0; };
  fns.grad_f = [](std::size_t, std::size_t, const Vec& x) -> Vec { return Vec::Zero(x.size()); };
  fns.g = [](std::size_t, std::size_t, const Vec&) -> Vec { return Vec::Zero(1); };
  fns.jac_g = [](std::size_t, std::size_t, const Vec&) -> Mat { return Mat::Zero(1, 2); };
  CustomProblem zero(2, 1, 3, FeasibleSet::unit_box(2), fns, {});
  auto cert = problems::certify_constants(zero, 200);
  EXPECT_EQ(cert.empirical.F, 0.0);
  EXPECT_EQ(cert.empirical.G, 0.0);
  EXPECT_EQ(cert.empirical.L, 0.0);
  EXPECT_TRUE(cert.passed);
  EXPECT_THROW(problems::certify_constants(zero, 0), ValidationError);
}

TEST(Certify, DeclaredConstantsDominateOnEverySuite) {
  for (auto kind : {SuiteKind::tracking, SuiteKind::regression})
    for (auto regime : {ConstraintRegime::interior, ConstraintRegime::active})
      for (const auto& set : sets()) {
        auto suite = problems::make_suite(params(kind, regime, 11), set);
        auto cert = problems::certify_constants(*suite, 2000, 4);
        EXPECT_TRUE(cert.passed) << to_string(kind) << "/" << to_string(regime) << "/" << to_string(set.kind())
                                 << " F " << cert.declared.F << " vs " << cert.empirical.F << ", G "
                                 << cert.declared.G << " vs " << cert.empirical.G << ", L " << cert.declared.L
                                 << " vs " << cert.empirical.L;
      }
}

TEST(Suite, DeterministicUnderSeed) {
  for (auto kind : {SuiteKind::tracking, SuiteKind::regression}) {
    auto a = problems::make_suite(params(kind, ConstraintRegime::interior, 21), FeasibleSet::unit_box(2));
    auto b = problems::make_suite(params(kind, ConstraintRegime::interior, 21), FeasibleSet::unit_box(2));
    auto c = problems::make_suite(params(kind, ConstraintRegime::interior, 22), FeasibleSet::unit_box(2));
    bool differs = false;
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_EQ(a->constraint_matrix(i), b->constraint_matrix(i));
      EXPECT_EQ(a->regressor(i), b->regressor(i));
      for (std::size_t t = 1; t <= 64; ++t) {
        EXPECT_EQ(a->target(i, t), b->target(i, t));
        EXPECT_EQ(a->constraint_offset(i, t), b->constraint_offset(i, t));
        differs = differs || a->target(i, t) != c->target(i, t);
      }
    }
    EXPECT_TRUE(differs);
  }
}

TEST(Suite, TargetsStayInSetAndFeasiblePointIsStrict) {
  for (auto kind : {SuiteKind::tracking, SuiteKind::regression})
    for (auto regime : {ConstraintRegime::interior, ConstraintRegime::active})
      for (const auto& set : sets()) {
        auto suite = problems::make_suite(params(kind, regime, 8), set);
        const Vec x0 = suite->feasible_point();
        EXPECT_TRUE(set.contains(x0));
        for (std::size_t t = 1; t <= 64; ++t)
          for (std::size_t i = 0; i < 6; ++i) {
            EXPECT_TRUE(set.contains(suite->target(i, t), 1e-12));
            EXPECT_LT(suite->constraint(i, t, x0).maxCoeff(), 0.0);
          }
      }
}

TEST(Suite, DriftStepIsBoundedByDeltaOverTRho) {
  for (double rho : {0.0, 0.5, 1.0}) {
    SuiteParams sp = params(SuiteKind::tracking, ConstraintRegime::interior, 2);
    sp.drift_rho = rho;
    sp.drift_delta = 0.05;
    for (const auto& set : sets()) {
      auto suite = problems::make_suite(sp, set);
      for (std::size_t t = 2; t <= sp.T; ++t)
        for (std::size_t i = 0; i < sp.n; ++i) {
          const double step = (suite->target(i, t) - suite->target(i, t - 1)).norm();
          EXPECT_LE(step, sp.drift_delta / std::pow(static_cast<double>(t), rho) + 1e-15);
        }
    }
  }
}

TEST(Suite, RegimesBindAsAdvertised) {
  // Interior: every agent's target satisfies every agent's constraints, so
  // the unconstrained minimizer is feasible. Active: some target does not.
  auto count_binding = [](ConstraintRegime regime) {
    auto suite = problems::make_suite(params(SuiteKind::tracking, regime, 13), FeasibleSet::unit_box(2));
    std::size_t binding = 0;
    for (std::size_t t = 1; t <= 64; ++t) {
      Vec mean = Vec::Zero(2);
      for (std::size_t j = 0; j < 6; ++j) mean += suite->target(j, t) / 6.0;
      for (std::size_t i = 0; i < 6; ++i)
        if (suite->constraint(i, t, mean).maxCoeff() > 0.0) ++binding;
    }
    return binding;
  };
  EXPECT_EQ(count_binding(ConstraintRegime::interior), 0u);
  EXPECT_GT(count_binding(ConstraintRegime::active), 0u);
}

TEST(Suite, MidpointConvexity) {
  for (auto kind : {SuiteKind::tracking, SuiteKind::regression})
    for (const auto& set : sets()) {
      auto suite = problems::make_suite(params(kind, ConstraintRegime::active, 17), set);
      auto r = properties::midpoint_convexity(*suite, 500, 3);
      EXPECT_TRUE(r.passed) << r.name << " " << r.worst;
      EXPECT_GE(r.samples, 500u);
    }
}
