#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace doco {

// Seeded generator with a platform-independent uniform draw. The standard
// distributions are implementation-defined, so they are avoided wherever the
// result lands in a trace.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream) : engine_(seed_for(seed, stream)) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0. Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  Eigen::VectorXd uniform_vector(Eigen::Index d, double lo, double hi) {
    Eigen::VectorXd v(d);
    for (Eigen::Index k = 0; k < d; ++k) v[k] = uniform(lo, hi);
    return v;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::seed_seq::result_type fnv1a32(std::string_view s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
      h ^= c;
      h *= 16777619u;
    }
    return h;
  }

  static std::mt19937_64 seed_for(std::uint64_t seed, std::string_view stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      fnv1a32(stream)};
    return std::mt19937_64(seq);
  }

  std::mt19937_64 engine_;
};

}  // namespace doco
