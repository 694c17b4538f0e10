#pragma once

// Reference computations used by the tests. They avoid the library's own numerics.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// sup_v (f v - psi(v)) over a uniform grid on [0, vmax], then refined around the best node.
inline double grid_sup_conjugate(const std::function<double(double)>& psi, double f, double vmax,
                                 int n = 200000) {
  double best = 0.0;
  double arg = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double v = vmax * i / n;
    const double val = f * v - psi(v);
    if (val > best) {
      best = val;
      arg = v;
    }
  }
  double h = vmax / n;
  for (int round = 0; round < 40; ++round) {
    for (double v : {arg - h, arg + h}) {
      if (v < 0.0) continue;
      const double val = f * v - psi(v);
      if (val > best) {
        best = val;
        arg = v;
      }
    }
    h *= 0.5;
  }
  return best;
}

// Composite 5-point Gauss-Legendre rule.
inline double gauss_legendre(const std::function<double(double)>& g, double a, double b, int panels = 2000) {
  static const double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                              0.9061798459386640};
  static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                              0.2369268850561891};
  const double h = (b - a) / panels;
  double acc = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double mid = a + (i + 0.5) * h;
    for (int j = 0; j < 5; ++j) acc += w[j] * g(mid + 0.5 * h * x[j]);
  }
  return 0.5 * h * acc;
}

// sup over sampled unit vectors v (v^T G v = 1) of xi . v.
inline double sampled_dual_norm(const Eigen::MatrixXd& G, const Eigen::VectorXd& xi, int samples,
                                std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd v(xi.size());
    for (int i = 0; i < v.size(); ++i) v[i] = normal(rng);
    v /= std::sqrt(v.dot(G * v));
    best = std::max(best, std::abs(xi.dot(v)));
  }
  return best;
}

// Classical RK4 for a scalar autonomous ODE.
inline double rk4(const std::function<double(double)>& rhs, double y0, double T, int steps) {
  const double h = T / steps;
  double y = y0;
  for (int i = 0; i < steps; ++i) {
    const double k1 = rhs(y);
    const double k2 = rhs(y + 0.5 * h * k1);
    const double k3 = rhs(y + 0.5 * h * k2);
    const double k4 = rhs(y + h * k3);
    y += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
  }
  return y;
}

}  // namespace oracle
