#include <gtest/gtest.h>

#include <cmath>

#include "doco/mirror.hpp"
#include "doco/properties.hpp"
#include "oracles.hpp"

using namespace doco;
using mirror::FeasibleSet;
using mirror::MapKind;
using mirror::MirrorMap;
using Vec = Eigen::VectorXd;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST(Bregman, ClosedForms) {
  auto box = FeasibleSet::unit_box(2);
  MirrorMap euc(MapKind::euclidean, box);
  EXPECT_EQ(mirror::bregman(euc, v2(1, 0), v2(0, 0)), 0.5);
  EXPECT_EQ(mirror::bregman(euc, v2(0.3, 0.7), v2(0.3, 0.7)), 0.0);

  MirrorMap ent(MapKind::negative_entropy, FeasibleSet::simplex(2));
  const double kl = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  EXPECT_NEAR(mirror::bregman(ent, v2(0.5, 0.5), v2(0.25, 0.75)), kl, 1e-15);
  EXPECT_NEAR(mirror::bregman(ent, v2(0.4, 0.6), v2(0.4, 0.6)), 0.0, 1e-16);
}

TEST(Bregman, EntropyDomainErrors) {
  MirrorMap ent(MapKind::negative_entropy, FeasibleSet::simplex(2));
  EXPECT_THROW(mirror::bregman(ent, v2(0.5, 0.5), v2(0.0, 1.0)), DomainError);
  EXPECT_THROW(mirror::bregman(ent, v2(0.5, 0.5), v2(-0.1, 1.1)), DomainError);
}

TEST(MirrorMap, EntropyOnlyOnSimplex) {
  EXPECT_THROW(MirrorMap(MapKind::negative_entropy, FeasibleSet::unit_box(2)), ValidationError);
  EXPECT_THROW(MirrorMap(MapKind::negative_entropy, FeasibleSet::ball(Vec::Zero(2), 1.0)), ValidationError);
}

TEST(MirrorMap, Constants) {
  MirrorMap euc(MapKind::euclidean, FeasibleSet::unit_box(2));
  EXPECT_NEAR(euc.K(), 2.0 * std::sqrt(2.0), 1e-15);
  MirrorMap ent(MapKind::negative_entropy, FeasibleSet::simplex(3));
  EXPECT_NEAR(ent.K(), std::sqrt(3.0) * std::log((1 + 3e-6) / 1e-6), 1e-12);
  EXPECT_EQ(ent.mu(), 1.0);
}

TEST(RegularizedProjection, ClosedForms) {
  auto box = FeasibleSet::unit_box(2);
  MirrorMap euc(MapKind::euclidean, box);
  EXPECT_EQ(mirror::regularized_projection(euc, box, v2(0.5, 0.5), v2(1, 0), 1.0), v2(0, 0.5));
  EXPECT_EQ(mirror::regularized_projection(euc, box, v2(0.2, 0.9), v2(0, 0), 0.7), v2(0.2, 0.9));

  auto sx = FeasibleSet::simplex(2);
  MirrorMap ent(MapKind::negative_entropy, sx);
  Vec y = mirror::regularized_projection(ent, sx, v2(0.5, 0.5), v2(std::log(2.0), 0), 1.0);
  EXPECT_NEAR(y[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(y[1], 2.0 / 3, 1e-15);
  Vec same = mirror::regularized_projection(ent, sx, v2(0.3, 0.7), v2(0, 0), 2.0);
  EXPECT_NEAR((same - v2(0.3, 0.7)).norm(), 0.0, 1e-15);
}

TEST(RegularizedProjection, Errors) {
  auto box = FeasibleSet::unit_box(2);
  MirrorMap euc(MapKind::euclidean, box);
  EXPECT_THROW(mirror::regularized_projection(euc, box, v2(0.5, 0.5), v2(1, 0), 0.0), ValidationError);
  EXPECT_THROW(mirror::regularized_projection(euc, box, v2(0.5, 0.5), v2(1, 0), -1.0), ValidationError);
  MirrorMap ent(MapKind::negative_entropy, FeasibleSet::simplex(2));
  EXPECT_THROW(mirror::regularized_projection(ent, box, v2(0.5, 0.5), v2(1, 0), 1.0), ValidationError);
}

TEST(RegularizedProjection, MatchesGridSearchOnBoxAndBall) {
  Rng rng(11);
  auto box = FeasibleSet::box(v2(-0.5, 0), v2(1, 0.75));
  auto ball = FeasibleSet::ball(v2(0.2, -0.1), 0.6);
  for (const auto* set : {&box, &ball}) {
    MirrorMap euc(MapKind::euclidean, *set);
    for (int k = 0; k < 5; ++k) {
      Vec z = set->sample(rng), a = rng.uniform_vector(2, -2, 2);
      const double alpha = rng.uniform(0.1, 1.0);
      Vec y = mirror::regularized_projection(euc, *set, z, a, alpha);
      auto obj = [&](const Vec& x) { return alpha * a.dot(x) + 0.5 * (x - z).squaredNorm(); };
      double lo0, hi0, lo1, hi1;
      if (set->kind() == mirror::SetKind::box) {
        lo0 = set->lo()[0], hi0 = set->hi()[0], lo1 = set->lo()[1], hi1 = set->hi()[1];
      } else {
        const Vec& c = set->ball_center();
        lo0 = c[0] - set->radius(), hi0 = c[0] + set->radius(), lo1 = c[1] - set->radius(), hi1 = c[1] + set->radius();
      }
      auto best = oracle::grid_min_2d_refined(obj, [&](const Vec& x) { return set->contains(x, 0.0); }, lo0, hi0, lo1, hi1);
      EXPECT_LE((y - best.x).norm(), 2e-3) << to_string(set->kind()) << " z=" << z.transpose() << " a=" << a.transpose() << " alpha=" << alpha << " y=" << y.transpose() << " grid=" << best.x.transpose();
      EXPECT_LE(obj(y), best.f + 1e-12);
    }
  }
}

TEST(Project, ClosedForms) {
  auto box = FeasibleSet::unit_box(2);
  EXPECT_EQ(mirror::project(box, v2(2, -1)), v2(1, 0));
  EXPECT_EQ(mirror::project(box, v2(0.25, 0.5)), v2(0.25, 0.5));
  auto ball = FeasibleSet::ball(Vec::Zero(2), 1.0);
  EXPECT_NEAR((mirror::project(ball, v2(3, 4)) - v2(0.6, 0.8)).norm(), 0.0, 1e-15);
  auto sx = FeasibleSet::simplex(3);
  Vec y(3);
  y << 0.2, 0.3, 0.5;
  EXPECT_NEAR((mirror::project(sx, y) - y).norm(), 0.0, 1e-15);
  y << 2.0, 0.0, 0.0;
  Vec e0 = Vec::Zero(3);
  e0[0] = 1.0;
  EXPECT_NEAR((mirror::project(sx, y) - e0).norm(), 0.0, 1e-15);
}

TEST(Project, NonnegClamp) {
  EXPECT_EQ(mirror::nonneg_project(v2(0, 0)), v2(0, 0));
  EXPECT_EQ(mirror::nonneg_project(v2(-1, 2)), v2(0, 2));
  EXPECT_EQ(mirror::nonneg_project(v2(-3, -4)), v2(0, 0));
}

TEST(Project, SimplexMatchesBisectionOracle) {
  Rng rng(5);
  auto sx = FeasibleSet::simplex(5);
  for (int k = 0; k < 200; ++k) {
    Vec y = rng.uniform_vector(5, -2, 2);
    // Threshold tau solves sum max(y - tau, 0) = 1.
    double lo = y.minCoeff() - 1.0, hi = y.maxCoeff();
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      ((y.array() - mid).max(0.0).sum() > 1.0 ? lo : hi) = mid;
    }
    Vec expect = (y.array() - 0.5 * (lo + hi)).max(0.0).matrix();
    EXPECT_LE((mirror::project(sx, y) - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ClampToInterior, FloorsAndRenormalizes) {
  Vec x(3);
  x << 0.0, 0.5, 0.5;
  const double change = mirror::clamp_to_interior(x);
  EXPECT_GE(x.minCoeff(), 1e-6 / (1 + 3e-6));
  EXPECT_NEAR(x.sum(), 1.0, 1e-15);
  EXPECT_GT(change, 0.0);
  EXPECT_LE(change, 1e-6 * 3);
}

TEST(MirrorProperties, ThousandSamplesPerMap) {
  struct Case {
    MapKind map;
    FeasibleSet set;
  };
  std::vector<Case> cases{{MapKind::euclidean, FeasibleSet::unit_box(2)},
                          {MapKind::euclidean, FeasibleSet::ball(v2(0.5, -0.5), 2.0)},
                          {MapKind::euclidean, FeasibleSet::simplex(4)},
                          {MapKind::negative_entropy, FeasibleSet::simplex(3)}};
  for (const auto& c : cases) {
    MirrorMap map(c.map, c.set);
    for (const auto& r : properties::mirror_suite(map, c.set, 1000, 42)) {
      EXPECT_TRUE(r.passed) << r.name << " worst " << r.worst;
      EXPECT_GE(r.samples, 1000u);
    }
  }
}
