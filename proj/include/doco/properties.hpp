#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doco/mirror.hpp"
#include "doco/network.hpp"
#include "doco/problems.hpp"
#include "doco/rng.hpp"

// Randomized property suites shared by `doco check` and the test binaries.
namespace doco::properties {

using Vec = Eigen::VectorXd;

struct Result {
  std::string name;
  std::size_t samples = 0;
  bool passed = true;
  double worst = 0.0;  // largest observed violation (lhs - rhs); <= tol when passing
};

namespace detail {

inline void observe(Result& r, double excess, double tol) {
  r.worst = std::max(r.worst, excess);
  if (excess > tol) r.passed = false;
}

// Point of the set the map is valid on: the floored simplex for the entropy
// map, the set itself otherwise.
inline Vec sample_paired(const mirror::MirrorMap& map, const mirror::FeasibleSet& set, Rng& rng) {
  Vec x = set.sample(rng);
  if (map.kind() == mirror::MapKind::negative_entropy) mirror::clamp_to_interior(x);
  return x;
}

inline std::string tag(const mirror::MirrorMap& map, const char* what) {
  return std::string(what) + "[" + mirror::to_string(map.kind()) + "]";
}

}  // namespace detail

// D_R(x, y) >= (mu/2) ||x - y||^2.
inline Result bregman_lower_bound(const mirror::MirrorMap& map, const mirror::FeasibleSet& set,
                                  std::size_t samples, std::uint64_t seed, double tol = 1e-9) {
  Rng rng(seed, "prop.lower_bound");
  Result r{detail::tag(map, "bregman_lower_bound"), samples};
  for (std::size_t s = 0; s < samples; ++s) {
    Vec x = detail::sample_paired(map, set, rng), y = detail::sample_paired(map, set, rng);
    detail::observe(r, 0.5 * map.mu() * (x - y).squaredNorm() - mirror::bregman(map, x, y), tol);
  }
  return r;
}

// D_R(x, sum_k w_k y_k) <= sum_k w_k D_R(x, y_k), with 2 or 3 points.
inline Result separate_convexity(const mirror::MirrorMap& map, const mirror::FeasibleSet& set,
                                 std::size_t samples, std::uint64_t seed, double tol = 1e-9) {
  Rng rng(seed, "prop.separate_convexity");
  Result r{detail::tag(map, "separate_convexity"), samples};
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t m = 2 + s % 2;
    Vec x = detail::sample_paired(map, set, rng);
    Vec w(m);
    for (std::size_t k = 0; k < m; ++k) w[k] = -std::log(1.0 - rng.uniform());
    w /= w.sum();
    Vec mixture = Vec::Zero(set.dim());
    double rhs = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      Vec y = detail::sample_paired(map, set, rng);
      mixture += w[k] * y;
      rhs += w[k] * mirror::bregman(map, x, y);
    }
    detail::observe(r, mirror::bregman(map, x, mixture) - rhs, tol);
  }
  return r;
}

// |D_R(x, y) - D_R(z, y)| <= K ||x - z||.
inline Result bregman_lipschitz(const mirror::MirrorMap& map, const mirror::FeasibleSet& set,
                                std::size_t samples, std::uint64_t seed, double tol = 1e-9) {
  Rng rng(seed, "prop.lipschitz");
  Result r{detail::tag(map, "bregman_lipschitz"), samples};
  for (std::size_t s = 0; s < samples; ++s) {
    Vec x = detail::sample_paired(map, set, rng), y = detail::sample_paired(map, set, rng),
        z = detail::sample_paired(map, set, rng);
    detail::observe(r, std::abs(mirror::bregman(map, x, y) - mirror::bregman(map, z, y)) - map.K() * (x - z).norm(),
                    tol);
  }
  return r;
}

// D_R(x, y) <= K d(X).
inline Result bregman_bounded(const mirror::MirrorMap& map, const mirror::FeasibleSet& set, std::size_t samples,
                              std::uint64_t seed, double tol = 1e-9) {
  Rng rng(seed, "prop.bounded");
  Result r{detail::tag(map, "bregman_bounded"), samples};
  for (std::size_t s = 0; s < samples; ++s) {
    Vec x = detail::sample_paired(map, set, rng), y = detail::sample_paired(map, set, rng);
    detail::observe(r, mirror::bregman(map, x, y) - map.K() * set.diameter(), tol);
  }
  return r;
}

// y = argmin alpha <x, a> + D_R(x, z) satisfies
// <y - x, alpha a> <= D_R(x, z) - D_R(x, y) - D_R(y, z) for every x in X.
inline Result projection_inequality(const mirror::MirrorMap& map, const mirror::FeasibleSet& set,
                                    std::size_t samples, std::uint64_t seed, std::size_t comparisons = 100,
                                    double tol = 1e-9) {
  Rng rng(seed, "prop.projection_inequality");
  Result r{detail::tag(map, "projection_inequality"), samples};
  for (std::size_t s = 0; s < samples; ++s) {
    Vec z = detail::sample_paired(map, set, rng);
    Vec a = rng.uniform_vector(set.dim(), -2.0, 2.0);
    const double alpha = rng.uniform(0.01, 1.0);
    Vec y = mirror::regularized_projection(map, set, z, a, alpha);
    const double dyz = mirror::bregman(map, y, z);
    for (std::size_t c = 0; c < comparisons; ++c) {
      Vec x = set.sample(rng);
      const double lhs = alpha * (y - x).dot(a);
      const double rhs = mirror::bregman(map, x, z) - mirror::bregman(map, x, y) - dyz;
      detail::observe(r, lhs - rhs, tol);
    }
  }
  return r;
}

// ||[x]_+ - [y]_+|| <= ||x - y|| and ||P_X(x) - P_X(y)|| <= ||x - y||.
inline Result projection_nonexpansive(const mirror::FeasibleSet& set, std::size_t samples, std::uint64_t seed,
                                      double tol = 1e-12) {
  Rng rng(seed, "prop.nonexpansive");
  Result r{std::string("projection_nonexpansive[") + mirror::to_string(set.kind()) + "]", samples};
  for (std::size_t s = 0; s < samples; ++s) {
    Vec x = rng.uniform_vector(set.dim(), -3.0, 3.0), y = rng.uniform_vector(set.dim(), -3.0, 3.0);
    const double d = (x - y).norm();
    detail::observe(r, (mirror::nonneg_project(x) - mirror::nonneg_project(y)).norm() - d, tol);
    detail::observe(r, (mirror::project(set, x) - mirror::project(set, y)).norm() - d, tol);
  }
  return r;
}

inline std::vector<Result> mirror_suite(const mirror::MirrorMap& map, const mirror::FeasibleSet& set,
                                        std::size_t samples, std::uint64_t seed, double tol = 1e-9) {
  return {bregman_lower_bound(map, set, samples, seed, tol),  separate_convexity(map, set, samples, seed, tol),
          bregman_lipschitz(map, set, samples, seed, tol),    bregman_bounded(map, set, samples, seed, tol),
          projection_inequality(map, set, samples, seed, 100, tol), projection_nonexpansive(set, samples, seed)};
}

// Row/column sums, symmetry, mean preservation and contraction of mix().
inline std::vector<Result> network_suite(const network::WeightMatrix& W, std::size_t samples, std::uint64_t seed) {
  std::vector<Result> out;
  Result ds{"doubly_stochastic", 1};
  try {
    network::validate_doubly_stochastic(W.matrix(), network::kStochasticTol);
  } catch (const ValidationError&) {
    ds.passed = false;
  }
  out.push_back(ds);

  Rng rng(seed, "prop.network");
  const std::size_t n = W.size();
  Result mean{"mix_preserves_mean", samples}, contraction{"mix_contraction", samples};
  for (std::size_t s = 0; s < samples; ++s) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(3));
    std::vector<Vec> ys(n);
    Vec avg = Vec::Zero(d);
    for (auto& y : ys) {
      y = rng.uniform_vector(d, -1.0, 1.0);
      avg += y;
    }
    avg /= static_cast<double>(n);
    auto xs = network::mix(W, ys);
    Vec avg_out = Vec::Zero(d);
    double dev_in = 0.0, dev_out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      avg_out += xs[i];
      dev_in += (ys[i] - avg).squaredNorm();
      dev_out += (xs[i] - avg).squaredNorm();
    }
    avg_out /= static_cast<double>(n);
    detail::observe(mean, (avg_out - avg).norm(), 1e-12);
    detail::observe(contraction, std::sqrt(dev_out) - W.sigma2() * std::sqrt(dev_in), 1e-12);
  }
  out.push_back(mean);
  out.push_back(contraction);
  return out;
}

// Sampled midpoint convexity of every f_{i,t} and every component of g_{i,t}.
inline Result midpoint_convexity(const problems::Problem& p, std::size_t samples, std::uint64_t seed,
                                 double tol = 1e-9) {
  Rng rng(seed, "prop.convexity");
  Result r{"midpoint_convexity", samples};
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i = rng.below(p.agents());
    const std::size_t t = 1 + rng.below(p.horizon());
    Vec x = p.set().sample(rng), y = p.set().sample(rng);
    Vec mid = 0.5 * (x + y);
    detail::observe(r, p.objective(i, t, mid) - 0.5 * (p.objective(i, t, x) + p.objective(i, t, y)), tol);
    Vec gm = p.constraint(i, t, mid) - 0.5 * (p.constraint(i, t, x) + p.constraint(i, t, y));
    if (gm.size() > 0) detail::observe(r, gm.maxCoeff(), tol);
  }
  return r;
}

inline Result constants_certified(const problems::Problem& p, std::size_t samples, std::uint64_t seed) {
  auto cert = problems::certify_constants(p, samples, seed);
  Result r{"declared_constants", samples, cert.passed};
  r.worst = std::max({cert.empirical.F - cert.declared.F, cert.empirical.G - cert.declared.G,
                      cert.empirical.L - cert.declared.L, 0.0});
  return r;
}

}  // namespace doco::properties
