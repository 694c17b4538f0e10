#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "bvflow/common.hpp"

namespace bvflow {

/// Norms on the tangent spaces of R^n: Euclidean, constant diagonal weights, or a
/// state-dependent SPD tensor G(u).
class MetricStructure {
 public:
  enum class Kind { Euclidean, DiagonalWeights, Riemannian };
  using TensorField = std::function<Matrix(const Vector&)>;

  MetricStructure() = default;

  static MetricStructure euclidean() { return MetricStructure(); }

  static MetricStructure diagonal(Vector weights) {
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
        throw MetricError("diagonal metric weights must be positive");
      }
    }
    MetricStructure m;
    m.kind_ = Kind::DiagonalWeights;
    m.weights_ = std::move(weights);
    return m;
  }

  static MetricStructure riemannian(TensorField tensor) {
    MetricStructure m;
    m.kind_ = Kind::Riemannian;
    m.tensor_ = std::make_shared<const TensorField>(std::move(tensor));
    return m;
  }

  Kind kind() const { return kind_; }
  const Vector& weights() const { return weights_; }

  /// G(u) as a dense matrix of size n.
  Matrix tensor(const Vector& u) const {
    const auto n = u.size();
    switch (kind_) {
      case Kind::Euclidean:
        return Matrix::Identity(n, n);
      case Kind::DiagonalWeights:
        check_size(weights_.size(), n);
        return weights_.asDiagonal();
      case Kind::Riemannian: {
        Matrix g = (*tensor_)(u);
        if (g.rows() != n || g.cols() != n) throw DomainError("metric tensor has wrong size");
        return g;
      }
    }
    return Matrix::Identity(n, n);
  }

  double norm(const Vector& u, const Vector& v) const {
    check_size(u.size(), v.size());
    switch (kind_) {
      case Kind::Euclidean:
        return v.norm();
      case Kind::DiagonalWeights:
        check_size(weights_.size(), v.size());
        return std::sqrt((weights_.array() * v.array().square()).sum());
      case Kind::Riemannian:
        return std::sqrt(checked_form(tensor(u), v));
    }
    return 0.0;
  }

  double dual_norm(const Vector& u, const Vector& xi) const {
    check_size(u.size(), xi.size());
    switch (kind_) {
      case Kind::Euclidean:
        return xi.norm();
      case Kind::DiagonalWeights:
        check_size(weights_.size(), xi.size());
        return std::sqrt((xi.array().square() / weights_.array()).sum());
      case Kind::Riemannian: {
        const Vector raised = raise(u, xi);
        return std::sqrt(std::max(0.0, xi.dot(raised)));
      }
    }
    return 0.0;
  }

  /// G(u)^{-1} xi, the vector dual to the covector xi.
  Vector raise(const Vector& u, const Vector& xi) const {
    check_size(u.size(), xi.size());
    switch (kind_) {
      case Kind::Euclidean:
        return xi;
      case Kind::DiagonalWeights:
        return (xi.array() / weights_.array()).matrix();
      case Kind::Riemannian: {
        Eigen::LLT<Matrix> llt(tensor(u));
        if (llt.info() != Eigen::Success) throw MetricError("metric tensor is not positive definite");
        return llt.solve(xi);
      }
    }
    return xi;
  }

  /// Exact for flat metrics; for Riemannian metrics the length of the straight segment,
  /// integrated by Simpson's rule with Richardson refinement (an upper bound of the
  /// geodesic distance).
  double distance(const Vector& u0, const Vector& u1) const {
    check_size(u0.size(), u1.size());
    const Vector delta = u1 - u0;
    if (kind_ != Kind::Riemannian) return norm(u0, delta);
    if (delta.isZero(0.0)) return 0.0;
    auto speed = [&](double s) {
      const Vector p = u0 + s * delta;
      return norm(p, delta);
    };
    auto simpson = [&](int panels) {
      const double h = 1.0 / panels;
      double sum = speed(0.0) + speed(1.0);
      for (int i = 1; i < panels; ++i) sum += speed(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
      return sum * h / 3.0;
    };
    double coarse = simpson(8);
    for (int panels = 16; panels <= (1 << 16); panels *= 2) {
      const double fine = simpson(panels);
      const double extrapolated = fine + (fine - coarse) / 15.0;
      if (std::abs(fine - coarse) <= 1e-13 * (1.0 + std::abs(fine))) return extrapolated;
      coarse = fine;
    }
    return coarse;
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::Euclidean:
        return "euclidean";
      case Kind::DiagonalWeights:
        return "diagonal";
      case Kind::Riemannian:
        return "riemannian";
    }
    return "unknown";
  }

 private:
  static void check_size(Eigen::Index a, Eigen::Index b) {
    if (a != b) throw DomainError("dimension mismatch in metric evaluation");
  }

  static double checked_form(const Matrix& g, const Vector& v) {
    const double q = v.dot(g * v);
    if (!(q > 0.0) && !v.isZero(0.0)) throw MetricError("metric tensor is not positive definite");
    return std::max(0.0, q);
  }

  Kind kind_ = Kind::Euclidean;
  Vector weights_;
  std::shared_ptr<const TensorField> tensor_;
};

}  // namespace bvflow
