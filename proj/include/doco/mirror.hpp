#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doco/error.hpp"
#include "doco/rng.hpp"

namespace doco::mirror {

using Vec = Eigen::VectorXd;

enum class SetKind { box, ball, simplex };

inline const char* to_string(SetKind k) {
  switch (k) {
    case SetKind::box: return "box";
    case SetKind::ball: return "ball";
    case SetKind::simplex: return "simplex";
  }
  return "?";
}

// Compact convex feasible set with closed-form Euclidean projection.
class FeasibleSet {
 public:
  static FeasibleSet box(Vec lo, Vec hi) {
    if (lo.size() != hi.size() || lo.size() == 0)
      throw ValidationError("box: bounds must be non-empty and of equal dimension");
    for (Eigen::Index k = 0; k < lo.size(); ++k)
      if (!(lo[k] <= hi[k])) throw ValidationError("box: lo > hi at coordinate " + std::to_string(k));
    return FeasibleSet(SetKind::box, std::move(lo), std::move(hi), 0.0);
  }

  static FeasibleSet unit_box(Eigen::Index d) {
    return box(Vec::Zero(d), Vec::Ones(d));
  }

  static FeasibleSet ball(Vec center, double radius) {
    if (center.size() == 0) throw ValidationError("ball: empty center");
    if (!(radius > 0.0)) throw ValidationError("ball: radius must be positive");
    Vec unused = center;
    return FeasibleSet(SetKind::ball, std::move(center), std::move(unused), radius);
  }

  // Probability simplex in R^d, d >= 2.
  static FeasibleSet simplex(Eigen::Index d) {
    if (d < 2) throw ValidationError("simplex: dimension must be at least 2");
    return FeasibleSet(SetKind::simplex, Vec::Zero(d), Vec::Ones(d), 0.0);
  }

  SetKind kind() const noexcept { return kind_; }
  Eigen::Index dim() const noexcept { return a_.size(); }
  const Vec& lo() const noexcept { return a_; }
  const Vec& hi() const noexcept { return b_; }
  const Vec& ball_center() const noexcept { return a_; }
  double radius() const noexcept { return r_; }

  // sup ||x - y|| over the set.
  double diameter() const {
    switch (kind_) {
      case SetKind::box: return (b_ - a_).norm();
      case SetKind::ball: return 2.0 * r_;
      case SetKind::simplex: return std::sqrt(2.0);
    }
    return 0.0;
  }

  // Box midpoint, ball center, uniform simplex point.
  Vec center() const {
    switch (kind_) {
      case SetKind::box: return 0.5 * (a_ + b_);
      case SetKind::ball: return a_;
      case SetKind::simplex: return Vec::Constant(dim(), 1.0 / static_cast<double>(dim()));
    }
    return {};
  }

  // sup ||x - center()|| over the set.
  double center_radius() const {
    switch (kind_) {
      case SetKind::box: return 0.5 * (b_ - a_).norm();
      case SetKind::ball: return r_;
      case SetKind::simplex: {
        const double d = static_cast<double>(dim());
        return std::sqrt((d - 1.0) / d);
      }
    }
    return 0.0;
  }

  // sup ||x|| over the set.
  double max_norm() const {
    switch (kind_) {
      case SetKind::box: return a_.cwiseAbs().cwiseMax(b_.cwiseAbs()).norm();
      case SetKind::ball: return a_.norm() + r_;
      case SetKind::simplex: return 1.0;
    }
    return 0.0;
  }

  bool contains(const Vec& x, double tol = 1e-12) const {
    if (x.size() != dim()) return false;
    switch (kind_) {
      case SetKind::box:
        for (Eigen::Index k = 0; k < x.size(); ++k)
          if (x[k] < a_[k] - tol || x[k] > b_[k] + tol) return false;
        return true;
      case SetKind::ball: return (x - a_).norm() <= r_ + tol;
      case SetKind::simplex:
        return x.minCoeff() >= -tol && std::abs(x.sum() - 1.0) <= tol * static_cast<double>(dim());
    }
    return false;
  }

  // Random point of the set; not uniform for the ball or simplex, only
  // guaranteed to cover them.
  Vec sample(Rng& rng) const {
    const Eigen::Index d = dim();
    switch (kind_) {
      case SetKind::box: {
        Vec x(d);
        for (Eigen::Index k = 0; k < d; ++k) x[k] = rng.uniform(a_[k], b_[k]);
        return x;
      }
      case SetKind::ball: {
        Vec dir = rng.uniform_vector(d, -1.0, 1.0);
        double nrm = dir.norm();
        if (nrm == 0.0) return a_;
        double rad = r_ * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
        return a_ + (rad / nrm) * dir;
      }
      case SetKind::simplex: {
        Vec e(d);
        for (Eigen::Index k = 0; k < d; ++k) e[k] = -std::log(1.0 - rng.uniform());
        return e / e.sum();
      }
    }
    return {};
  }

 private:
  FeasibleSet(SetKind k, Vec a, Vec b, double r) : kind_(k), a_(std::move(a)), b_(std::move(b)), r_(r) {}

  SetKind kind_;
  Vec a_;  // box lo / ball center
  Vec b_;  // box hi
  double r_;
};

// Euclidean projection onto the nonnegative orthant.
inline Vec nonneg_project(const Vec& v) { return v.cwiseMax(0.0); }

// Sort-and-threshold projection onto the probability simplex.
inline Vec project_simplex(const Vec& y) {
  const Eigen::Index d = y.size();
  std::vector<double> u(y.data(), y.data() + d);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    cum += u[k];
    double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  return (y.array() - theta).max(0.0).matrix();
}

// argmin_{x in X} ||x - y||^2.
inline Vec project(const FeasibleSet& set, const Vec& y) {
  if (y.size() != set.dim()) throw ValidationError("project: dimension mismatch");
  switch (set.kind()) {
    case SetKind::box: return y.cwiseMax(set.lo()).cwiseMin(set.hi());
    case SetKind::ball: {
      Vec off = y - set.ball_center();
      double nrm = off.norm();
      if (nrm <= set.radius()) return y;
      return set.ball_center() + (set.radius() / nrm) * off;
    }
    case SetKind::simplex: return project_simplex(y);
  }
  return y;
}

enum class MapKind { euclidean, negative_entropy };

inline const char* to_string(MapKind k) {
  return k == MapKind::euclidean ? "euclidean" : "negative_entropy";
}

// Floor used to keep entropy-map iterates away from the simplex boundary,
// where the gradient of the generator blows up.
inline constexpr double kEntropyFloor = 1e-6;

// Mirror map paired with the feasible set it operates on. Construction
// validates the pairing and fixes the constants mu (strong convexity in the
// Euclidean norm) and K (Lipschitz constant of D_R(., y) on the set).
class MirrorMap {
 public:
  MirrorMap(MapKind kind, const FeasibleSet& set) : kind_(kind), dim_(set.dim()) {
    if (kind == MapKind::negative_entropy && set.kind() != SetKind::simplex)
      throw ValidationError(std::string("unsupported (mirror, set) pair: negative_entropy x ") +
                            to_string(set.kind()));
    if (kind == MapKind::euclidean) {
      // ||grad_x D_R(x, y)|| = ||x - y|| <= d(X) <= d(X) + sup ||x||.
      K_ = set.diameter() + set.max_norm();
    } else {
      // grad_x D_R(x, y) = ln x - ln y. After clamp_to_interior every
      // coordinate is at least eps / (1 + d eps).
      const double d = static_cast<double>(dim_);
      K_ = std::sqrt(d) * std::log((1.0 + d * kEntropyFloor) / kEntropyFloor);
    }
  }

  MapKind kind() const noexcept { return kind_; }
  Eigen::Index dim() const noexcept { return dim_; }
  double mu() const noexcept { return 1.0; }
  double K() const noexcept { return K_; }

  double value(const Vec& x) const {
    if (kind_ == MapKind::euclidean) return 0.5 * x.squaredNorm();
    double s = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k)
      if (x[k] > 0.0) s += x[k] * std::log(x[k]);
    return s;
  }

  Vec gradient(const Vec& y) const {
    if (kind_ == MapKind::euclidean) return y;
    check_positive(y);
    return (y.array().log() + 1.0).matrix();
  }

  void check_positive(const Vec& y) const {
    for (Eigen::Index k = 0; k < y.size(); ++k)
      if (!(y[k] > 0.0))
        throw DomainError("negative_entropy: coordinate " + std::to_string(k) +
                          " is not strictly positive");
  }

 private:
  MapKind kind_;
  Eigen::Index dim_;
  double K_ = 0.0;
};

// D_R(x, y) = R(x) - R(y) - <x - y, grad R(y)>.
inline double bregman(const MirrorMap& map, const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw ValidationError("bregman: dimension mismatch");
  if (map.kind() == MapKind::euclidean) return 0.5 * (x - y).squaredNorm();
  map.check_positive(y);
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (x[k] < 0.0) throw DomainError("negative_entropy: x has a negative coordinate");
  // Expanded form of the definition; identical to sum x ln(x/y) - x + y.
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x[k] > 0.0) s += x[k] * std::log(x[k] / y[k]);
    s += y[k] - x[k];
  }
  return s;
}

// argmin_{x in X} alpha <x, a> + D_R(x, z).
inline Vec regularized_projection(const MirrorMap& map, const FeasibleSet& set, const Vec& z,
                                  const Vec& a, double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("regularized_projection: alpha must be positive");
  if (z.size() != set.dim() || a.size() != set.dim() || map.dim() != set.dim())
    throw ValidationError("regularized_projection: dimension mismatch");
  if (map.kind() == MapKind::euclidean) return project(set, z - alpha * a);
  if (set.kind() != SetKind::simplex)
    throw ValidationError("regularized_projection: negative_entropy requires the simplex");
  map.check_positive(z);
  // Multiplicative weights, shifted by the max exponent for stability.
  Vec expo = (z.array().log() - alpha * a.array()).matrix();
  const double top = expo.maxCoeff();
  Vec y = (expo.array() - top).exp().matrix();
  return y / y.sum();
}

// Floor every coordinate at eps and renormalize. Returns the max-abs change.
inline double clamp_to_interior(Vec& x, double eps = kEntropyFloor) {
  Vec before = x;
  x = x.cwiseMax(eps);
  x /= x.sum();
  return (x - before).cwiseAbs().maxCoeff();
}

}  // namespace doco::mirror
