#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "doco/error.hpp"
#include "doco/rng.hpp"

namespace doco::network {

using Edge = std::pair<std::size_t, std::size_t>;

// Undirected simple graph on nodes 0..n-1. Edges are stored normalized
// (first < second) and sorted.
class Topology {
 public:
  Topology(std::size_t n, std::vector<Edge> edges) : n_(n) {
    if (n == 0) throw ValidationError("topology needs at least one node");
    std::set<Edge> seen;
    for (auto [i, j] : edges) {
      if (i >= n || j >= n)
        throw ValidationError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                              ") out of range for n=" + std::to_string(n));
      if (i == j) throw ValidationError("self-loop at node " + std::to_string(i));
      Edge e = std::minmax(i, j);
      if (!seen.insert(e).second)
        throw ValidationError("duplicate edge (" + std::to_string(e.first) + "," +
                              std::to_string(e.second) + ")");
    }
    edges_.assign(seen.begin(), seen.end());
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> deg(n_, 0);
    for (auto [i, j] : edges_) {
      ++deg[i];
      ++deg[j];
    }
    return deg;
  }

  // First node (in index order) not reachable from node 0, if any.
  std::optional<std::size_t> unreachable_node() const {
    std::vector<std::vector<std::size_t>> adj(n_);
    for (auto [i, j] : edges_) {
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
    std::vector<bool> seen(n_, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : adj[u])
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
    }
    for (std::size_t v = 0; v < n_; ++v)
      if (!seen[v]) return v;
    return std::nullopt;
  }

  bool connected() const { return !unreachable_node().has_value(); }

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
};

inline Topology ring(std::size_t n) {
  std::vector<Edge> e;
  if (n == 2) e.emplace_back(0, 1);
  if (n >= 3)
    for (std::size_t i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return Topology(n, std::move(e));
}

inline Topology path(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Topology(n, std::move(e));
}

// Node 0 is the hub.
inline Topology star(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 1; i < n; ++i) e.emplace_back(0, i);
  return Topology(n, std::move(e));
}

inline Topology complete(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return Topology(n, std::move(e));
}

inline constexpr int kErdosRenyiMaxDraws = 1000;

// G(n, p), redrawn until connected.
inline Topology erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("erdos_renyi: p must lie in [0,1]");
  Rng rng(seed, "graph");
  for (int draw = 0; draw < kErdosRenyiMaxDraws; ++draw) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform() < p) e.emplace_back(i, j);
    Topology topo(n, std::move(e));
    if (topo.connected()) return topo;
  }
  throw ValidationError("erdos_renyi: no connected graph after " +
                        std::to_string(kErdosRenyiMaxDraws) + " draws (n=" + std::to_string(n) +
                        ", p=" + std::to_string(p) + ")");
}

inline constexpr double kStochasticTol = 1e-12;

inline void validate_doubly_stochastic(const Eigen::MatrixXd& w, double tol = kStochasticTol) {
  if (w.rows() != w.cols() || w.rows() == 0)
    throw ValidationError("weight matrix must be square and non-empty");
  const Eigen::Index n = w.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (w(i, j) != w(j, i))
        throw ValidationError("weight matrix not symmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
      if (!(w(i, j) >= 0.0 && w(i, j) <= 1.0))
        throw ValidationError("weight outside [0,1] at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
    }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(w.row(i).sum() - 1.0) > tol)
      throw ValidationError("row " + std::to_string(i) + " does not sum to 1");
    if (std::abs(w.col(i).sum() - 1.0) > tol)
      throw ValidationError("column " + std::to_string(i) + " does not sum to 1");
  }
}

// Second-largest eigenvalue magnitude of a symmetric doubly stochastic matrix.
// A single node has no second eigenvalue; 0 is returned.
inline double spectral_gap(const Eigen::MatrixXd& w) {
  validate_doubly_stochastic(w);
  if (w.rows() == 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw ValidationError("eigensolver failed");
  std::vector<double> mags(static_cast<std::size_t>(w.rows()));
  for (Eigen::Index k = 0; k < w.rows(); ++k) mags[k] = std::abs(solver.eigenvalues()[k]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  return std::min(1.0, mags[1]);
}

class WeightMatrix {
 public:
  // Validated loader for a user-supplied matrix.
  static WeightMatrix from_matrix(Eigen::MatrixXd w) {
    double s2 = spectral_gap(w);
    return WeightMatrix(std::move(w), s2);
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(w_.rows()); }
  const Eigen::MatrixXd& matrix() const noexcept { return w_; }
  double operator()(std::size_t i, std::size_t j) const { return w_(i, j); }
  double sigma2() const noexcept { return sigma2_; }

 private:
  WeightMatrix(Eigen::MatrixXd w, double s2) : w_(std::move(w)), sigma2_(s2) {}

  Eigen::MatrixXd w_;
  double sigma2_;
};

// Metropolis-Hastings weights: 1/(1 + max(deg_i, deg_j)) on edges, the
// diagonal takes the remainder of each row.
inline WeightMatrix build_metropolis_weights(const Topology& topo) {
  if (auto bad = topo.unreachable_node())
    throw ValidationError("topology is disconnected: node " + std::to_string(*bad) +
                          " is unreachable from node 0");
  const std::size_t n = topo.size();
  const auto deg = topo.degrees();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (auto [i, j] : topo.edges()) {
    double v = 1.0 / (1.0 + static_cast<double>(std::max(deg[i], deg[j])));
    w(i, j) = v;
    w(j, i) = v;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return WeightMatrix::from_matrix(std::move(w));
}

// out[i] = sum_j W(i,j) * ys[j], summed in index order so the result does not
// depend on how the caller scheduled the ys.
inline std::vector<Eigen::VectorXd> mix(const WeightMatrix& w, std::span<const Eigen::VectorXd> ys) {
  const std::size_t n = w.size();
  if (ys.size() != n)
    throw ValidationError("mix: expected " + std::to_string(n) + " vectors, got " +
                          std::to_string(ys.size()));
  const Eigen::Index d = n ? ys[0].size() : 0;
  for (const auto& y : ys)
    if (y.size() != d) throw ValidationError("mix: vectors have mismatched dimensions");
  std::vector<Eigen::VectorXd> out(n, Eigen::VectorXd::Zero(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double wij = w(i, j);
      if (wij != 0.0) out[i] += wij * ys[j];
    }
  return out;
}

}  // namespace doco::network
