#pragma once

// Evolution systems (X, d, E, F, P) on R^n: energy, differential, partial time
// derivative, slope F = dual norm of the differential, and power P.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bvflow/common.hpp"
#include "bvflow/metric.hpp"

namespace bvflow {

using ScalarField = std::function<double(double, const Vector&)>;
using CovectorField = std::function<Vector(double, const Vector&)>;

/// One member I(t, u, eta) of a finite family whose pointwise minimum is a marginal energy.
struct Branch {
  ScalarField value;
  CovectorField gradient;
  ScalarField time_derivative;
};

class EvolutionSystem {
 public:
  enum class PowerMode { Simple, Marginal };

  static EvolutionSystem simple(std::string name, int dimension, double horizon, ScalarField energy,
                                CovectorField gradient, ScalarField time_derivative,
                                MetricStructure metric = MetricStructure::euclidean()) {
    validate_shape(dimension, horizon);
    EvolutionSystem sys;
    sys.name_ = std::move(name);
    sys.dimension_ = dimension;
    sys.horizon_ = horizon;
    sys.metric_ = std::move(metric);
    sys.mode_ = PowerMode::Simple;
    auto data = std::make_shared<Data>();
    data->energy = std::move(energy);
    data->gradient = std::move(gradient);
    data->time_derivative = std::move(time_derivative);
    sys.data_ = std::move(data);
    return sys;
  }

  /// E(t, u) = min over branches of I(t, u, eta). Membership in the argmin set uses
  /// the tolerance argmin_tol * (1 + |E|).
  static EvolutionSystem marginal(std::string name, int dimension, double horizon,
                                  std::vector<Branch> branches,
                                  MetricStructure metric = MetricStructure::euclidean(),
                                  double argmin_tol = 1e-9) {
    validate_shape(dimension, horizon);
    if (branches.empty()) throw DomainError("marginal system needs at least one branch");
    if (!(argmin_tol > 0.0)) throw DomainError("argmin tolerance must be positive");
    EvolutionSystem sys;
    sys.name_ = std::move(name);
    sys.dimension_ = dimension;
    sys.horizon_ = horizon;
    sys.metric_ = std::move(metric);
    sys.mode_ = PowerMode::Marginal;
    auto data = std::make_shared<Data>();
    data->branches = std::move(branches);
    data->argmin_tol = argmin_tol;
    sys.data_ = std::move(data);
    return sys;
  }

  const std::string& name() const { return name_; }
  int dimension() const { return dimension_; }
  double horizon() const { return horizon_; }
  const MetricStructure& metric() const { return metric_; }
  PowerMode power_mode() const { return mode_; }
  std::size_t branch_count() const { return data_->branches.size(); }

  /// Returns a copy sharing the energy but using another metric.
  EvolutionSystem with_metric(MetricStructure metric) const {
    EvolutionSystem copy = *this;
    copy.metric_ = std::move(metric);
    return copy;
  }

  double energy(double t, const Vector& u) const {
    check_state(u);
    if (mode_ == PowerMode::Simple) return data_->energy(t, u);
    double best = kInfinity;
    for (const auto& b : data_->branches) best = std::min(best, b.value(t, u));
    return best;
  }

  /// Indices of the branches attaining the minimum (marginal mode), or {0}.
  std::vector<std::size_t> active_branches(double t, const Vector& u) const {
    if (mode_ == PowerMode::Simple) return {0};
    const auto& branches = data_->branches;
    std::vector<double> values(branches.size());
    double best = kInfinity;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      values[i] = branches[i].value(t, u);
      best = std::min(best, values[i]);
    }
    const double tol = data_->argmin_tol * (1.0 + std::abs(best));
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      if (values[i] <= best + tol) active.push_back(i);
    }
    return active;
  }

  /// D_u E, or in marginal mode the differential of the active branch of least dual norm.
  Vector gradient(double t, const Vector& u) const {
    check_state(u);
    if (mode_ == PowerMode::Simple) return data_->gradient(t, u);
    Vector best_grad;
    double best_norm = kInfinity;
    for (std::size_t i : active_branches(t, u)) {
      Vector g = data_->branches[i].gradient(t, u);
      const double n = metric_.dual_norm(u, g);
      if (n < best_norm) {
        best_norm = n;
        best_grad = std::move(g);
      }
    }
    return best_grad;
  }

  /// Partial time derivative; in marginal mode the power at the minimal admissible force.
  double time_derivative(double t, const Vector& u) const {
    check_state(u);
    if (mode_ == PowerMode::Simple) return data_->time_derivative(t, u);
    return power(t, u, slope(t, u));
  }

  double slope(double t, const Vector& u) const {
    check_state(u);
    if (mode_ == PowerMode::Simple) return metric_.dual_norm(u, data_->gradient(t, u));
    double best = kInfinity;
    for (std::size_t i : active_branches(t, u)) {
      best = std::min(best, metric_.dual_norm(u, data_->branches[i].gradient(t, u)));
    }
    return best;
  }

  /// Slopes of the active branches, sorted ascending (the breakpoints of P(t, u, .)).
  std::vector<double> branch_slopes(double t, const Vector& u) const {
    if (mode_ == PowerMode::Simple) return {slope(t, u)};
    std::vector<double> out;
    for (std::size_t i : active_branches(t, u)) {
      out.push_back(metric_.dual_norm(u, data_->branches[i].gradient(t, u)));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// P(t, u, f). Throws ConstraintError when f is below the slope.
  double power(double t, const Vector& u, double f) const {
    check_state(u);
    if (mode_ == PowerMode::Simple) {
      const double F = metric_.dual_norm(u, data_->gradient(t, u));
      if (f < F - 1e-9 * (1.0 + F)) {
        throw ConstraintError("power requested at f below the slope");
      }
      return data_->time_derivative(t, u);
    }
    const double e = energy(t, u);
    const double tol = data_->argmin_tol * (1.0 + std::abs(e));
    double best = -kInfinity;
    for (std::size_t i : active_branches(t, u)) {
      const auto& b = data_->branches[i];
      if (metric_.dual_norm(u, b.gradient(t, u)) <= f + tol) {
        best = std::max(best, b.time_derivative(t, u));
      }
    }
    if (best == -kInfinity) {
      throw ConstraintError("power requested at f below the slope: no admissible branch");
    }
    return best;
  }

 private:
  struct Data {
    ScalarField energy;
    CovectorField gradient;
    ScalarField time_derivative;
    std::vector<Branch> branches;
    double argmin_tol = 1e-9;
  };

  static void validate_shape(int dimension, double horizon) {
    if (dimension <= 0) throw DomainError("system dimension must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be positive");
  }

  void check_state(const Vector& u) const {
    if (u.size() != dimension_) throw DomainError("state has wrong dimension");
  }

  std::string name_;
  int dimension_ = 1;
  double horizon_ = 1.0;
  MetricStructure metric_;
  PowerMode mode_ = PowerMode::Simple;
  std::shared_ptr<const Data> data_;
};

/// Dense polynomial c0 + c1 x + c2 x^2 + ...
struct Polynomial {
  std::vector<double> coefficients;

  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  Polynomial derivative() const {
    Polynomial d;
    for (std::size_t i = 1; i < coefficients.size(); ++i) {
      d.coefficients.push_back(static_cast<double>(i) * coefficients[i]);
    }
    return d;
  }

  /// (u^2 - 1)^2 / 4
  static Polynomial double_well() { return {{0.25, 0.0, -0.5, 0.0, 0.25}}; }
};

/// Parameters of the built-in example systems. Unused fields are ignored by a given example.
struct ExampleParams {
  int dimension = 1;
  double horizon = 1.0;
  Polynomial potential = Polynomial::double_well();
  Polynomial load{{0.0}};
  std::vector<double> load_profile;  // per-component weights of the load, default all ones
  double length = 1.0;               // spatial length for allen_cahn_fd
  std::optional<MetricStructure> metric;
};

namespace detail {

inline Vector profile_vector(const ExampleParams& params, int n) {
  if (params.load_profile.empty()) return Vector::Ones(n);
  if (static_cast<int>(params.load_profile.size()) != n) {
    throw DomainError("load_profile length must equal the dimension");
  }
  return Eigen::Map<const Vector>(params.load_profile.data(), n);
}

}  // namespace detail

/// Built-in systems: double_well_1d, allen_cahn_fd, quadratic, marginal_demo.
inline EvolutionSystem make_example(const std::string& name, const ExampleParams& params = {}) {
  if (params.dimension <= 0) throw DomainError("dimension must be positive");
  const auto W = params.potential;
  const auto dW = W.derivative();
  const auto load = params.load;
  const auto dload = load.derivative();

  if (name == "double_well_1d") {
    if (params.dimension != 1) throw DomainError("double_well_1d is one-dimensional");
    return EvolutionSystem::simple(
        name, 1, params.horizon,
        [W, load](double t, const Vector& u) { return W(u[0]) - load(t) * u[0]; },
        [dW, load](double t, const Vector& u) {
          Vector g(1);
          g[0] = dW(u[0]) - load(t);
          return g;
        },
        [dload](double t, const Vector& u) { return -dload(t) * u[0]; },
        params.metric.value_or(MetricStructure::euclidean()));
  }

  if (name == "allen_cahn_fd") {
    const int n = params.dimension;
    if (!(params.length > 0.0)) throw DomainError("allen_cahn_fd needs a positive length");
    const double h = params.length / n;
    const Vector profile = detail::profile_vector(params, n);
    auto energy = [W, load, profile, h, n](double t, const Vector& u) {
      double e = 0.0;
      for (int i = 0; i + 1 < n; ++i) {
        const double du = u[i + 1] - u[i];
        e += du * du / (2.0 * h);
      }
      const double lt = load(t);
      for (int i = 0; i < n; ++i) e += (W(u[i]) - lt * profile[i] * u[i]) * h;
      return e;
    };
    auto gradient = [dW, load, profile, h, n](double t, const Vector& u) {
      Vector g(n);
      const double lt = load(t);
      for (int i = 0; i < n; ++i) g[i] = (dW(u[i]) - lt * profile[i]) * h;
      for (int i = 0; i + 1 < n; ++i) {
        const double flux = (u[i + 1] - u[i]) / h;
        g[i] -= flux;
        g[i + 1] += flux;
      }
      return g;
    };
    auto time_derivative = [dload, profile, h](double t, const Vector& u) {
      return -dload(t) * h * profile.dot(u);
    };
    return EvolutionSystem::simple(name, n, params.horizon, energy, gradient, time_derivative,
                                   params.metric.value_or(MetricStructure::diagonal(Vector::Constant(n, h))));
  }

  if (name == "quadratic") {
    const int n = params.dimension;
    const Vector profile = detail::profile_vector(params, n);
    return EvolutionSystem::simple(
        name, n, params.horizon,
        [load, profile](double t, const Vector& u) { return 0.5 * (u - load(t) * profile).squaredNorm(); },
        [load, profile](double t, const Vector& u) -> Vector { return u - load(t) * profile; },
        [load, dload, profile](double t, const Vector& u) {
          return -dload(t) * profile.dot(u - load(t) * profile);
        },
        params.metric.value_or(MetricStructure::euclidean()));
  }

  if (name == "marginal_demo") {
    if (params.dimension != 1) throw DomainError("marginal_demo is one-dimensional");
    auto branch = [](double sign) {
      return Branch{
          [sign](double t, const Vector& u) { return u[0] * u[0] + sign * t; },
          [](double, const Vector& u) {
            Vector g(1);
            g[0] = 2.0 * u[0];
            return g;
          },
          [sign](double, const Vector&) { return sign; }};
    };
    return EvolutionSystem::marginal(name, 1, params.horizon, {branch(-1.0), branch(1.0)},
                                     params.metric.value_or(MetricStructure::euclidean()));
  }

  throw DomainError("unknown example system '" + name + "'");
}

}  // namespace bvflow
