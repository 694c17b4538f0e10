#pragma once

// Metric dissipation functions psi: [0, inf) -> [0, inf), convex, nondecreasing,
// psi(0) = 0, together with their Legendre conjugates and subdifferentials.

#include <algorithm>
#include <cmath>
#include <string>

#include "bvflow/common.hpp"

namespace bvflow {

/// Closed interval [lo, hi]; hi may be +inf.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
  double distance_to(double x) const {
    if (x < lo) return lo - x;
    if (x > hi) return x - hi;
    return 0.0;
  }
};

class DissipationFunction {
 public:
  enum class Family { Power, ViscousLinear, CappedQuadratic, PseudoRelativistic, Linear };

  /// psi(v) = v^p / p, p > 1.
  static DissipationFunction power(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("power dissipation needs p > 1");
    return DissipationFunction(Family::Power, p, 0.0, 0.0);
  }

  /// psi(v) = v + eps v^p, eps >= 0, p > 1.
  static DissipationFunction viscous_linear(double eps, double p) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("viscous_linear needs eps >= 0");
    if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("viscous_linear needs p > 1");
    return DissipationFunction(Family::ViscousLinear, p, eps, 0.0);
  }

  /// psi(v) = int_0^v min(r, L) dr.
  static DissipationFunction capped_quadratic(double L) {
    if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("capped_quadratic needs L > 0");
    return DissipationFunction(Family::CappedQuadratic, 0.0, 0.0, L);
  }

  /// psi(v) = sqrt(1 + v^2) - 1 (shifted so that psi(0) = 0).
  static DissipationFunction pseudo_relativistic() {
    return DissipationFunction(Family::PseudoRelativistic, 0.0, 0.0, 1.0);
  }

  /// psi(v) = L v, the rate-independent case.
  static DissipationFunction linear(double L) {
    if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("linear dissipation needs L > 0");
    return DissipationFunction(Family::Linear, 0.0, 0.0, L);
  }

  Family family() const { return family_; }
  double exponent() const { return p_; }
  double eps() const { return eps_; }
  double cap() const { return cap_; }

  /// L = lim psi(v)/v, +inf for superlinear families.
  double growth() const {
    switch (family_) {
      case Family::Power:
        return kInfinity;
      case Family::ViscousLinear:
        return eps_ > 0.0 ? kInfinity : 1.0;
      case Family::CappedQuadratic:
      case Family::Linear:
        return cap_;
      case Family::PseudoRelativistic:
        return 1.0;
    }
    return kInfinity;
  }

  bool superlinear() const { return is_infinite(growth()); }

  /// True when psi is differentiable on (0, inf) and psi'(0+) = 0.
  bool smooth() const {
    switch (family_) {
      case Family::Power:
      case Family::CappedQuadratic:
      case Family::PseudoRelativistic:
        return true;
      case Family::ViscousLinear:
      case Family::Linear:
        return false;
    }
    return false;
  }

  double operator()(double v) const { return eval(v); }

  double eval(double v) const {
    detail::require_finite_nonnegative(v, "velocity");
    switch (family_) {
      case Family::Power:
        return std::pow(v, p_) / p_;
      case Family::ViscousLinear:
        return v + eps_ * std::pow(v, p_);
      case Family::CappedQuadratic:
        return v <= cap_ ? 0.5 * v * v : cap_ * v - 0.5 * cap_ * cap_;
      case Family::PseudoRelativistic:
        // sqrt(1+v^2) - 1 without cancellation for small v
        return v * v / (std::sqrt(1.0 + v * v) + 1.0);
      case Family::Linear:
        return cap_ * v;
    }
    return 0.0;
  }

  /// psi*(f) = sup_{v >= 0} (f v - psi(v)); +inf exactly when f > growth().
  double conjugate(double f) const {
    detail::require_finite_nonnegative(f, "force");
    switch (family_) {
      case Family::Power: {
        const double q = p_ / (p_ - 1.0);
        return std::pow(f, q) / q;
      }
      case Family::ViscousLinear:
        if (f <= 1.0) return 0.0;
        if (eps_ == 0.0) return kInfinity;
        return numerical_conjugate(f);
      case Family::CappedQuadratic:
        return f <= cap_ ? 0.5 * f * f : kInfinity;
      case Family::PseudoRelativistic:
        return f <= 1.0 ? f * f / (1.0 + std::sqrt(std::max(0.0, 1.0 - f * f))) : kInfinity;
      case Family::Linear:
        return f <= cap_ ? 0.0 : kInfinity;
    }
    return kInfinity;
  }

  /// [psi'(v-), psi'(v+)], with the lower end fixed at 0 for v = 0.
  Interval subdifferential(double v) const {
    detail::require_finite_nonnegative(v, "velocity");
    if (v == 0.0) return {0.0, right_derivative(0.0)};
    switch (family_) {
      case Family::Linear:
        return {cap_, cap_};
      default: {
        const double d = right_derivative(v);
        return {d, d};
      }
    }
  }

  /// psi'(v+).
  double right_derivative(double v) const {
    switch (family_) {
      case Family::Power:
        return v == 0.0 ? 0.0 : std::pow(v, p_ - 1.0);
      case Family::ViscousLinear:
        return 1.0 + (v == 0.0 ? 0.0 : eps_ * p_ * std::pow(v, p_ - 1.0));
      case Family::CappedQuadratic:
        return std::min(v, cap_);
      case Family::PseudoRelativistic:
        return v / std::sqrt(1.0 + v * v);
      case Family::Linear:
        return cap_;
    }
    return 0.0;
  }

  /// psi''(v) on the smooth part; +inf where the second derivative blows up.
  double second_derivative(double v) const {
    switch (family_) {
      case Family::Power:
        if (v == 0.0) return p_ < 2.0 ? kInfinity : (p_ == 2.0 ? 1.0 : 0.0);
        return (p_ - 1.0) * std::pow(v, p_ - 2.0);
      case Family::ViscousLinear:
        if (v == 0.0) return p_ < 2.0 ? kInfinity : (p_ == 2.0 ? 2.0 * eps_ : 0.0);
        return eps_ * p_ * (p_ - 1.0) * std::pow(v, p_ - 2.0);
      case Family::CappedQuadratic:
        return v < cap_ ? 1.0 : 0.0;
      case Family::PseudoRelativistic:
        return std::pow(1.0 + v * v, -1.5);
      case Family::Linear:
        return 0.0;
    }
    return 0.0;
  }

  /// Smallest v >= 0 with f in subdifferential(v). Requires 0 <= f < growth().
  double inverse_subdifferential(double f) const {
    detail::require_finite_nonnegative(f, "force");
    if (!(f < growth())) {
      throw RangeError("no finite velocity realizes force " + std::to_string(f) +
                       " (growth " + std::to_string(growth()) + ")");
    }
    switch (family_) {
      case Family::Power:
        return std::pow(f, 1.0 / (p_ - 1.0));
      case Family::ViscousLinear:
        return f <= 1.0 ? 0.0 : std::pow((f - 1.0) / (eps_ * p_), 1.0 / (p_ - 1.0));
      case Family::CappedQuadratic:
        return f;
      case Family::PseudoRelativistic:
        return f / std::sqrt((1.0 - f) * (1.0 + f));
      case Family::Linear:
        return 0.0;
    }
    return 0.0;
  }

  std::string describe() const {
    char buf[128];
    switch (family_) {
      case Family::Power:
        std::snprintf(buf, sizeof buf, "power(p=%.17g)", p_);
        break;
      case Family::ViscousLinear:
        std::snprintf(buf, sizeof buf, "viscous_linear(eps=%.17g, p=%.17g)", eps_, p_);
        break;
      case Family::CappedQuadratic:
        std::snprintf(buf, sizeof buf, "capped_quadratic(L=%.17g)", cap_);
        break;
      case Family::PseudoRelativistic:
        std::snprintf(buf, sizeof buf, "pseudo_relativistic");
        break;
      case Family::Linear:
        std::snprintf(buf, sizeof buf, "linear(L=%.17g)", cap_);
        break;
    }
    return buf;
  }

 private:
  DissipationFunction(Family family, double p, double eps, double cap)
      : family_(family), p_(p), eps_(eps), cap_(cap) {}

  // Golden-section maximization of the concave map v -> f v - psi(v).
  double numerical_conjugate(double f) const {
    auto objective = [&](double v) { return f * v - eval(v); };
    double hi = 1.0;
    while (objective(2.0 * hi) > objective(hi) && hi < 1e300) hi *= 2.0;
    hi *= 2.0;
    double lo = 0.0;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - inv_phi * (hi - lo);
    double b = lo + inv_phi * (hi - lo);
    double fa = objective(a);
    double fb = objective(b);
    const double tol = 1e-10 * std::max(1.0, hi);
    while (hi - lo > tol) {
      if (fa < fb) {
        lo = a;
        a = b;
        fa = fb;
        b = lo + inv_phi * (hi - lo);
        fb = objective(b);
      } else {
        hi = b;
        b = a;
        fb = fa;
        a = hi - inv_phi * (hi - lo);
        fa = objective(a);
      }
    }
    return std::max({0.0, objective(0.5 * (lo + hi)), fa, fb});
  }

  Family family_;
  double p_;
  double eps_;
  double cap_;
};

}  // namespace bvflow
