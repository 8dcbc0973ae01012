#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace doco {

// Base of every error the library throws. The CLI maps the subclasses to
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad dimensions, bad parameters, unsupported combinations.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A point outside the admissible domain of a mirror map.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Run configuration problems; `key` names the offending config entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// A runtime invariant of the engine failed at round t, node i.
class InvariantViolation : public Error {
 public:
  InvariantViolation(std::string invariant, std::size_t t, std::size_t node,
                     const std::string& detail)
      : Error("invariant '" + invariant + "' violated at t=" + std::to_string(t) +
              ", node=" + std::to_string(node) + ": " + detail),
        invariant_(std::move(invariant)),
        t_(t),
        node_(node),
        detail_(detail) {}

  const std::string& invariant() const noexcept { return invariant_; }
  std::size_t round() const noexcept { return t_; }
  std::size_t node() const noexcept { return node_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string invariant_;
  std::size_t t_;
  std::size_t node_;
  std::string detail_;
};

// An iterative solver hit its iteration cap.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::size_t iterations, double residual)
      : Error(what + " (iterations=" + std::to_string(iterations) +
              ", residual=" + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

}  // namespace doco
