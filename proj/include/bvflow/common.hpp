#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bvflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline bool is_infinite(double x) { return x == kInfinity; }

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Argument inside the domain but outside the range where a finite answer exists.
class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

/// Metric tensor failed to be symmetric positive definite.
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A feasibility constraint (e.g. f >= slope) was violated by the caller.
class ConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration / input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_finite_nonnegative(double x, const char* what) {
  if (!std::isfinite(x) || x < 0.0) {
    throw DomainError(std::string(what) + " must be finite and nonnegative, got " +
                      std::to_string(x));
  }
}

}  // namespace detail
}  // namespace bvflow
