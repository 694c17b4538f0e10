#pragma once

// Conformal transition costs at frozen time t: the length of a path weighted by the
// factor f(t, x) = max(F(t, x), L), its infimum over connecting paths (bicost), the cost
// through a pinned intermediate state (tricost), and the jump functional of a BV curve.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "bvflow/common.hpp"
#include "bvflow/system.hpp"

namespace bvflow {

struct TransitionPath {
  double t = 0.0;
  std::vector<Vector> nodes;  // nodes.front() and nodes.back() are the pinned endpoints
};

inline double conformal_factor(const EvolutionSystem& sys, double t, const Vector& x, double cap_L) {
  return std::max(sys.slope(t, x), cap_L);
}

/// Midpoint rule: sum_j f(t, midpoint_j) d(theta_j, theta_{j+1}).
inline double conformal_length(const EvolutionSystem& sys, double t, const TransitionPath& path, double cap_L) {
  if (path.nodes.size() < 2) throw DomainError("transition path needs at least two nodes");
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < path.nodes.size(); ++j) {
    const Vector& a = path.nodes[j];
    const Vector& b = path.nodes[j + 1];
    const double d = sys.metric().distance(a, b);
    if (d == 0.0) continue;
    total += conformal_factor(sys, t, 0.5 * (a + b), cap_L) * d;
  }
  return total;
}

namespace detail {

template <class Fn>
double adaptive_simpson(const Fn& f, double a, double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class Fn>
double integrate(const Fn& f, double a, double b, double tol) {
  // Split into a few panels first so that narrow features are not missed.
  const int panels = 16;
  double total = 0.0;
  const double h = (b - a) / panels;
  for (int i = 0; i < panels; ++i) {
    const double lo = a + i * h;
    const double hi = lo + h;
    const double flo = f(lo);
    const double fmid = f(0.5 * (lo + hi));
    const double fhi = f(hi);
    const double whole = h / 6.0 * (flo + 4.0 * fmid + fhi);
    total += adaptive_simpson(f, lo, hi, flo, fmid, fhi, whole, tol / panels, 40);
  }
  return total;
}

}  // namespace detail

/// int_0^1 f(t, gamma(s)) |gamma'(s)|_{gamma(s)} ds along the straight segment a -> b,
/// by adaptive Simpson quadrature.
inline double segment_cost(const EvolutionSystem& sys, double t, const Vector& a, const Vector& b, double cap_L,
                           double tol = 1e-11) {
  const Vector delta = b - a;
  if (delta.isZero(0.0)) return 0.0;
  auto integrand = [&](double s) {
    const Vector x = a + s * delta;
    return conformal_factor(sys, t, x, cap_L) * sys.metric().norm(x, delta);
  };
  return detail::integrate(integrand, 0.0, 1.0, tol);
}

/// Conformal length of a polygon with each segment integrated adaptively.
inline double polygon_cost(const EvolutionSystem& sys, double t, const TransitionPath& path, double cap_L,
                           double tol = 1e-11) {
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < path.nodes.size(); ++j) {
    total += segment_cost(sys, t, path.nodes[j], path.nodes[j + 1], cap_L, tol / path.nodes.size());
  }
  return total;
}

struct BicostOptions {
  std::size_t nodes = 64;      // segments M of the discrete path
  int starts = 8;              // straight segment plus perturbed starts
  double rel_tol = 1e-8;       // sweep stopping rule
  int max_sweeps = 400;
  double certify_tol = 1e-6;   // relative refinement gap accepted as certified
  std::uint64_t seed = 7;
};

struct BicostResult {
  double value = 0.0;
  double gap = 0.0;        // |value(M) - value(2M)|, zero for exact quadrature
  bool certified = true;
  int best_start = 0;
  TransitionPath path;
};

namespace detail {

// Coordinate-wise Gauss-Seidel descent on the interior nodes of a path.
inline double relax_path(const EvolutionSystem& sys, double t, double cap_L, std::vector<Vector>& nodes,
                         const BicostOptions& opts) {
  const std::size_t M = nodes.size() - 1;
  auto local = [&](std::size_t j, const Vector& x) {
    const Vector& a = nodes[j - 1];
    const Vector& b = nodes[j + 1];
    const double da = sys.metric().distance(a, x);
    const double db = sys.metric().distance(x, b);
    double c = 0.0;
    if (da > 0.0) c += conformal_factor(sys, t, 0.5 * (a + x), cap_L) * da;
    if (db > 0.0) c += conformal_factor(sys, t, 0.5 * (x + b), cap_L) * db;
    return c;
  };
  auto total = [&]() {
    TransitionPath p{t, nodes};
    return conformal_length(sys, t, p, cap_L);
  };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double current = total();
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    for (std::size_t j = 1; j < M; ++j) {
      for (Eigen::Index i = 0; i < nodes[j].size(); ++i) {
        const double span = std::max((nodes[j + 1] - nodes[j - 1]).norm(), 1e-12);
        Vector x = nodes[j];
        const double x0 = x[i];
        const double c0 = local(j, x);
        auto eval = [&](double xi) {
          x[i] = xi;
          return local(j, x);
        };
        double lo = x0 - span;
        double hi = x0 + span;
        double a = hi - inv_phi * (hi - lo);
        double b = lo + inv_phi * (hi - lo);
        double fa = eval(a);
        double fb = eval(b);
        for (int it = 0; it < 60 && hi - lo > 1e-13 * (1.0 + std::abs(x0)); ++it) {
          if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = eval(a);
          } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = eval(b);
          }
        }
        const double xi = fa < fb ? a : b;
        const double ci = std::min(fa, fb);
        nodes[j][i] = ci < c0 ? xi : x0;
      }
    }
    const double next = total();
    const double improvement = current - next;
    current = next;
    if (improvement <= opts.rel_tol * std::max(1e-300, std::abs(next))) break;
  }
  return current;
}

inline std::vector<Vector> straight_nodes(const Vector& u0, const Vector& u1, std::size_t M) {
  std::vector<Vector> nodes(M + 1);
  for (std::size_t j = 0; j <= M; ++j) {
    const double s = static_cast<double>(j) / static_cast<double>(M);
    nodes[j] = (1.0 - s) * u0 + s * u1;
  }
  nodes.front() = u0;
  nodes.back() = u1;
  return nodes;
}

}  // namespace detail

/// Discrete-path minimization of the conformal length between u0 and u1: multi-start
/// Gauss-Seidel on M interior nodes (midpoint factor), then one refinement to 2M nodes.
/// The reported value integrates the optimized polygon adaptively.
inline BicostResult optimize_path(const EvolutionSystem& sys, double t, const Vector& u0, const Vector& u1,
                                  double cap_L, const BicostOptions& opts = {}) {
  if (opts.nodes < 1) throw DomainError("path needs at least one segment");
  BicostResult result;
  const double d = sys.metric().distance(u0, u1);
  if (d == 0.0) {
    result.path = {t, {u0, u1}};
    return result;
  }
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t M = opts.nodes;
  double best = kInfinity;
  std::vector<Vector> best_nodes;
  for (int s = 0; s < std::max(1, opts.starts); ++s) {
    auto nodes = detail::straight_nodes(u0, u1, M);
    if (s > 0) {
      Vector xi(u0.size());
      for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal(rng);
      xi *= 0.5 * d * static_cast<double>(s) / static_cast<double>(opts.starts) / std::max(xi.norm(), 1e-300);
      const double freq = static_cast<double>(1 + (s - 1) % 2);
      for (std::size_t j = 1; j < M; ++j) {
        nodes[j] += std::sin(freq * M_PI * static_cast<double>(j) / static_cast<double>(M)) * xi;
      }
    }
    const double value = detail::relax_path(sys, t, cap_L, nodes, opts);
    if (value < best) {
      best = value;
      best_nodes = nodes;
      result.best_start = s;
    }
  }
  TransitionPath coarse{t, best_nodes};
  const double coarse_value = polygon_cost(sys, t, coarse, cap_L);

  std::vector<Vector> fine_nodes;
  fine_nodes.reserve(2 * M + 1);
  for (std::size_t j = 0; j < M; ++j) {
    fine_nodes.push_back(best_nodes[j]);
    fine_nodes.push_back(0.5 * (best_nodes[j] + best_nodes[j + 1]));
  }
  fine_nodes.push_back(best_nodes.back());
  detail::relax_path(sys, t, cap_L, fine_nodes, opts);
  TransitionPath fine{t, fine_nodes};
  const double fine_value = polygon_cost(sys, t, fine, cap_L);

  result.gap = std::abs(coarse_value - fine_value);
  if (fine_value <= coarse_value) {
    result.value = fine_value;
    result.path = std::move(fine);
  } else {
    result.value = coarse_value;
    result.path = std::move(coarse);
  }
  result.certified = result.gap <= opts.certify_tol * (1.0 + result.value);
  return result;
}

/// Infimal conformal length between u0 and u1 at time t. In one dimension the straight
/// segment is optimal and is integrated exactly; otherwise the path optimizer is used.
inline BicostResult bicost(const EvolutionSystem& sys, double t, const Vector& u0, const Vector& u1, double cap_L,
                           const BicostOptions& opts = {}) {
  if (!(cap_L > 0.0)) throw DomainError("transition cost needs L > 0");
  if (sys.dimension() == 1 || (u1 - u0).isZero(0.0)) {
    BicostResult r;
    r.value = segment_cost(sys, t, u0, u1, cap_L);
    r.path = {t, {u0, u1}};
    return r;
  }
  return optimize_path(sys, t, u0, u1, cap_L, opts);
}

/// bicost(u0, u_mid) + bicost(u_mid, u1).
inline BicostResult tricost(const EvolutionSystem& sys, double t, const Vector& u0, const Vector& u_mid,
                            const Vector& u1, double cap_L, const BicostOptions& opts = {}) {
  const auto first = bicost(sys, t, u0, u_mid, cap_L, opts);
  const auto second = bicost(sys, t, u_mid, u1, cap_L, opts);
  BicostResult r;
  r.value = first.value + second.value;
  r.gap = first.gap + second.gap;
  r.certified = first.certified && second.certified;
  r.path.t = t;
  r.path.nodes = first.path.nodes;
  r.path.nodes.insert(r.path.nodes.end(), second.path.nodes.begin() + 1, second.path.nodes.end());
  return r;
}

/// A jump of a BV curve at time t: u(t-), u(t), u(t+), together with the grid steps
/// [first_step, last_step] across which it was resolved.
struct JumpRecord {
  double t = 0.0;
  std::size_t first_step = 0;
  std::size_t last_step = 0;
  Vector minus;
  Vector at;
  Vector plus;

  std::size_t first_node() const { return first_step; }
  std::size_t last_node() const { return last_step + 1; }
};

/// Jump functional over the jumps resolved inside the node range [node_begin, node_end]:
/// the endpoint bicosts and the interior tricosts (each endpoint term is a tricost whose
/// first half collapses, since u(alpha) = u(t-) there).
inline double jump_total(const EvolutionSystem& sys, std::span<const JumpRecord> jumps, double cap_L,
                         std::size_t node_begin, std::size_t node_end, const BicostOptions& opts = {}) {
  double total = 0.0;
  for (const auto& j : jumps) {
    if (j.first_node() < node_begin || j.last_node() > node_end) continue;
    total += tricost(sys, j.t, j.minus, j.at, j.plus, cap_L, opts).value;
  }
  return total;
}

}  // namespace bvflow
