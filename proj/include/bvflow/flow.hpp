#pragma once

// psi-gradient flows of the doubly nonlinear equation
//   D_v psi(|u'|) + D_u E(t, u) = 0
// integrated by minimizing movements
//   u_{k+1} in argmin_u  tau psi(d(u, u_k) / tau) + E(t_{k+1}, u),
// with an explicit direct-ODE stepper kept as a cross-check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bvflow/common.hpp"
#include "bvflow/dissipation.hpp"
#include "bvflow/system.hpp"

namespace bvflow {

class TimeGrid {
 public:
  TimeGrid() = default;

  static TimeGrid uniform(double horizon, std::size_t steps) {
    if (steps == 0) throw DomainError("time grid needs at least one step");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be positive");
    std::vector<double> nodes(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
      nodes[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    }
    nodes.back() = horizon;
    return TimeGrid(std::move(nodes));
  }

  static TimeGrid from_nodes(std::vector<double> nodes) {
    if (nodes.size() < 2) throw DomainError("time grid needs at least two nodes");
    if (nodes.front() != 0.0) throw DomainError("time grid must start at 0");
    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
      if (!(nodes[k + 1] > nodes[k])) throw DomainError("time grid must be strictly increasing");
    }
    return TimeGrid(std::move(nodes));
  }

  std::size_t steps() const { return nodes_.size() - 1; }
  std::size_t size() const { return nodes_.size(); }
  double operator[](std::size_t k) const { return nodes_[k]; }
  double step(std::size_t k) const { return nodes_[k + 1] - nodes_[k]; }
  double horizon() const { return nodes_.back(); }
  const std::vector<double>& nodes() const { return nodes_; }

 private:
  explicit TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {}
  std::vector<double> nodes_{0.0, 1.0};
};

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 200;          // scalar bracket refinement
  int prox_max_iter = 20000;   // proximal-gradient iterations for n > 1
  int multistart = 4;          // perturbed seeds besides u_prev (n > 1)
  std::uint64_t seed = 20240101;
};

struct StepDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  int start = 0;  // 0 = u_prev, k > 0 = k-th perturbed seed (or ray for n = 1)
};

struct StepResult {
  Vector state;
  Vector increment;  // displacement found by the solver, before it is rounded into `state`
  double objective = 0.0;
  StepDiagnostics diagnostics;
};

class StepError : public std::runtime_error {
 public:
  StepError(const std::string& what, std::size_t index, StepDiagnostics diag)
      : std::runtime_error(what), index_(index), diag_(diag) {}
  std::size_t index() const { return index_; }
  const StepDiagnostics& diagnostics() const { return diag_; }

 private:
  std::size_t index_;
  StepDiagnostics diag_;
};

namespace detail {

// Penalty tau psi(rho / tau) of a displacement of length rho.
inline double penalty(const DissipationFunction& psi, double tau, double rho) {
  return tau * psi.eval(rho / tau);
}

// Minimizes the one-dimensional step objective along the rays u_prev +/- rho e,
// following the basin of u_prev: each ray is marched while the objective decreases and
// the first sign change of its derivative is refined by bisection.
inline StepResult scalar_step(const EvolutionSystem& sys, const DissipationFunction& psi,
                              double t_next, const Vector& u_prev, double tau,
                              const SolverOptions& opts) {
  const double c = std::sqrt(sys.metric().tensor(u_prev)(0, 0));
  const double base = u_prev[0];
  Vector probe(1);
  auto energy_at = [&](double x) {
    probe[0] = x;
    return sys.energy(t_next, probe);
  };
  auto grad_at = [&](double x) {
    probe[0] = x;
    return sys.gradient(t_next, probe)[0];
  };

  StepResult best;
  best.state = u_prev;
  best.increment = Vector::Zero(1);
  best.objective = energy_at(base);
  int total_iterations = 0;
  double residual = 0.0;

  const double slope0 = std::abs(grad_at(base)) / c;
  double rho_guess = 0.0;
  if (slope0 < psi.growth()) rho_guess = tau * psi.inverse_subdifferential(slope0) / c;
  else rho_guess = tau * slope0 / c;
  const double floor = 1e-14 * (1.0 + std::abs(base));
  rho_guess = std::max(rho_guess, floor);

  for (int ray = 0; ray < 2; ++ray) {
    const double dir = ray == 0 ? -1.0 : 1.0;
    auto dphi = [&](double rho) { return c * psi.right_derivative(c * rho / tau) + dir * grad_at(base + dir * rho); };
    auto phi = [&](double rho) { return penalty(psi, tau, c * rho) + energy_at(base + dir * rho); };
    if (dphi(0.0) >= 0.0) continue;

    double lo = 0.0;
    double hi = rho_guess;
    int march = 0;
    while (dphi(hi) < 0.0) {
      lo = hi;
      hi *= 1.25;
      ++march;
      if (!std::isfinite(phi(hi)) || hi > 1e150 || march > 100000) {
        StepDiagnostics diag{total_iterations + march, kInfinity, ray + 1};
        throw StepError("inner solver diverged: step objective unbounded below along the descent ray", 0, diag);
      }
    }
    // Root far below the initial guess: shrink geometrically so the bracket is relative.
    if (lo == 0.0) {
      while (hi > 1e-300 && dphi(0.125 * hi) >= 0.0) {
        hi *= 0.125;
        ++march;
      }
      lo = 0.125 * hi;
    }
    total_iterations += march;
    int it = 0;
    while (hi - lo > opts.tol * 1e-6 * hi && it < opts.max_iter) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (dphi(mid) < 0.0) lo = mid;
      else hi = mid;
      ++it;
    }
    total_iterations += it;
    const double width = hi - lo;
    if (width > opts.tol * hi) {
      StepDiagnostics diag{total_iterations, width, ray + 1};
      throw StepError("inner solver did not converge within max_iter", 0, diag);
    }
    // Pick the bracket end with the lower objective. The objective decreases strictly on
    // (0, lo], so a descending ray always beats staying put even when rounding hides it.
    const double rho = phi(lo) <= phi(hi) ? lo : hi;
    const double value = phi(rho);
    if (value < best.objective || best.diagnostics.start == 0) {
      best.objective = value;
      best.state = u_prev;
      best.state[0] = base + dir * rho;
      best.increment = Vector::Constant(1, dir * rho);
      best.diagnostics.start = ray + 1;
      residual = width;
    }
  }
  best.diagnostics.iterations = total_iterations;
  best.diagnostics.residual = residual;
  return best;
}

// prox of gamma * tau psi(|delta|_G / tau) in the G-norm, for the radial part.
inline double prox_radius(const DissipationFunction& psi, double tau, double gamma, double z_norm) {
  if (z_norm <= gamma * psi.right_derivative(0.0)) return 0.0;
  // r + gamma psi'(r / tau) = z_norm, left side increasing in r.
  double lo = 0.0;
  double hi = z_norm;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mid + gamma * psi.right_derivative(mid / tau) < z_norm) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct ProxOutcome {
  Vector delta;
  double objective = kInfinity;
  int iterations = 0;
  double residual = kInfinity;
  bool converged = false;
};

// Monotone accelerated proximal gradient on delta -> tau psi(|delta|_G/tau) + E(t, u_prev + delta).
inline ProxOutcome prox_gradient(const EvolutionSystem& sys, const DissipationFunction& psi, double t_next,
                                 const Vector& u_prev, double tau, const Vector& start,
                                 const SolverOptions& opts) {
  const Matrix G = sys.metric().tensor(u_prev);
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() != Eigen::Success) throw MetricError("metric tensor is not positive definite");
  auto gnorm = [&](const Vector& v) { return std::sqrt(std::max(0.0, v.dot(G * v))); };
  auto smooth = [&](const Vector& d) { return sys.energy(t_next, u_prev + d); };
  auto objective = [&](const Vector& d) { return penalty(psi, tau, gnorm(d)) + smooth(d); };
  auto prox = [&](const Vector& z, double gamma) -> Vector {
    const double zn = gnorm(z);
    if (zn == 0.0) return Vector::Zero(z.size());
    return z * (prox_radius(psi, tau, gamma, zn) / zn);
  };

  ProxOutcome out;
  Vector x = start;
  double fx = objective(x);
  Vector y = x;
  double theta = 1.0;
  double gamma = tau;
  {
    const Vector g = sys.gradient(t_next, u_prev + x);
    const double curv = std::max(1.0, g.norm());
    gamma = std::min(tau, 1.0 / curv);
  }
  for (int it = 1; it <= opts.prox_max_iter; ++it) {
    const Vector gy = sys.gradient(t_next, u_prev + y);
    const Vector step_dir = llt.solve(gy);
    const double ey = smooth(y);
    Vector candidate;
    for (int bt = 0; bt < 60; ++bt) {
      candidate = prox(y - gamma * step_dir, gamma);
      const Vector diff = candidate - y;
      const double model = ey + gy.dot(diff) + diff.dot(G * diff) / (2.0 * gamma);
      if (smooth(candidate) <= model + 1e-15 * (1.0 + std::abs(ey))) break;
      gamma *= 0.5;
    }
    const double residual = gnorm(candidate - y) / gamma;
    const double fc = objective(candidate);
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    // Near the minimizer the objective is flat to rounding; refusing such candidates would
    // freeze x about sqrt(eps) away from the fixed point.
    const bool accept = fc <= fx + 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(fx));
    Vector x_next = accept ? candidate : x;
    const double f_next = accept ? fc : fx;
    y = x_next + (theta / theta_next) * (candidate - x_next) + ((theta - 1.0) / theta_next) * (x_next - x);
    if (fc > fx) {
      // restart momentum
      y = x_next;
      theta = 1.0;
    } else {
      theta = theta_next;
    }
    x = std::move(x_next);
    fx = f_next;
    gamma *= 1.25;
    out.iterations = it;
    const double scale = 1.0 + sys.metric().dual_norm(u_prev, gy);
    out.residual = residual / scale;
    if (out.residual <= opts.tol) {
      out.converged = true;
      break;
    }
  }
  out.delta = x;
  out.objective = fx;
  return out;
}

}  // namespace detail

/// One minimizing-movement step. The returned state never increases the step objective
/// above its value at u_prev.
inline StepResult minimizing_movement_step(const EvolutionSystem& sys, const DissipationFunction& psi,
                                           double t_next, const Vector& u_prev, double tau,
                                           const SolverOptions& opts = {}) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("time step must be positive");
  const double e_prev = sys.energy(t_next, u_prev);
  if (!std::isfinite(e_prev)) throw DomainError("energy at the previous state is not finite");
  if (sys.dimension() == 1) return detail::scalar_step(sys, psi, t_next, u_prev, tau, opts);

  const auto n = u_prev.size();
  const double F0 = sys.slope(t_next, u_prev);
  double radius = tau * (1.0 + F0);
  if (F0 < psi.growth()) radius = std::max(radius, tau * psi.inverse_subdifferential(F0));
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  StepResult best;
  best.state = u_prev;
  best.increment = Vector::Zero(n);
  best.objective = e_prev;
  bool any_converged = false;
  StepDiagnostics worst;
  for (int s = 0; s <= opts.multistart; ++s) {
    Vector start = Vector::Zero(n);
    if (s > 0) {
      for (Eigen::Index i = 0; i < n; ++i) start[i] = normal(rng);
      start *= radius / std::max(start.norm(), 1e-300);
    }
    const auto outcome = detail::prox_gradient(sys, psi, t_next, u_prev, tau, start, opts);
    if (!outcome.converged) {
      worst = {outcome.iterations, outcome.residual, s};
      continue;
    }
    any_converged = true;
    if (outcome.objective < best.objective) {
      best.objective = outcome.objective;
      best.state = u_prev + outcome.delta;
      best.increment = outcome.delta;
      best.diagnostics = {outcome.iterations, outcome.residual, s};
    } else if (s == 0) {
      best.diagnostics = {outcome.iterations, outcome.residual, s};
    }
  }
  if (!any_converged) {
    throw StepError("inner solver did not converge within max_iter (residual " +
                        std::to_string(worst.residual) + ")",
                    0, worst);
  }
  return best;
}

/// Fully instrumented output of a flow run. speeds[k] belongs to the step [t_k, t_{k+1}];
/// all other arrays are indexed by node.
struct Trajectory {
  TimeGrid grid;
  std::vector<Vector> states;
  std::vector<double> speeds;
  std::vector<double> slopes;
  std::vector<double> chosen_F;
  std::vector<double> energies;
  std::vector<double> powers;
  std::vector<StepDiagnostics> diagnostics;
};

namespace detail {

// Minimal selection: argmin over f in [F, f_max] of s f - P(t, u, f). P is a nondecreasing
// step function of f whose breakpoints are the slopes of the active branches.
inline double minimal_selection(const EvolutionSystem& sys, const DissipationFunction& psi, double t,
                                const Vector& u, double F, double speed) {
  if (sys.power_mode() == EvolutionSystem::PowerMode::Simple) {
    return speed == 0.0 ? std::min(F, psi.growth()) : F;
  }
  const double f_max = std::isfinite(psi.growth()) ? std::max(psi.growth(), F) : 10.0 * std::max(F, 1e-12);
  double best_f = F;
  double best_value = speed * F - sys.power(t, u, F);
  for (double f : sys.branch_slopes(t, u)) {
    if (f <= F || f > f_max) continue;
    const double value = speed * f - sys.power(t, u, f);
    if (value < best_value) {
      best_value = value;
      best_f = f;
    }
  }
  return best_f;
}

inline double node_power(const EvolutionSystem& sys, double t, const Vector& u, double f) {
  if (sys.power_mode() == EvolutionSystem::PowerMode::Simple) return sys.time_derivative(t, u);
  return sys.power(t, u, f);
}

}  // namespace detail

/// Builds a Trajectory from states sampled on a grid: step speeds (base point at the left
/// node), slopes, energies, minimal-selection forces and powers. Used for flow output and
/// for auditing arbitrary sampled curves.
inline Trajectory instrument(const EvolutionSystem& sys, const DissipationFunction& psi, const TimeGrid& grid,
                             std::vector<Vector> states, std::vector<StepDiagnostics> diagnostics = {},
                             const std::vector<Vector>& increments = {}) {
  const std::size_t N = grid.steps();
  if (states.size() != N + 1) throw DomainError("state count does not match the time grid");
  Trajectory traj;
  traj.grid = grid;
  traj.states = std::move(states);
  traj.diagnostics = std::move(diagnostics);
  traj.diagnostics.resize(N);
  traj.speeds.resize(N);
  for (std::size_t k = 0; k < N; ++k) {
    const Vector du = increments.empty() ? Vector(traj.states[k + 1] - traj.states[k]) : increments[k];
    traj.speeds[k] = sys.metric().norm(traj.states[k], du) / grid.step(k);
  }
  traj.slopes.resize(N + 1);
  traj.chosen_F.resize(N + 1);
  traj.energies.resize(N + 1);
  traj.powers.resize(N + 1);
  for (std::size_t k = 0; k <= N; ++k) {
    const double t = grid[k];
    const Vector& u = traj.states[k];
    traj.slopes[k] = sys.slope(t, u);
    traj.energies[k] = sys.energy(t, u);
    const double incoming = traj.speeds[k == 0 ? 0 : k - 1];
    traj.chosen_F[k] = detail::minimal_selection(sys, psi, t, u, traj.slopes[k], incoming);
    traj.powers[k] = detail::node_power(sys, t, u, traj.chosen_F[k]);
  }
  return traj;
}

/// Iterates minimizing_movement_step over the grid and records speeds, slopes, energies,
/// the selected forces and the powers.
inline Trajectory run_flow(const EvolutionSystem& sys, const DissipationFunction& psi, const Vector& u0,
                           const TimeGrid& grid, const SolverOptions& opts = {}) {
  if (u0.size() != sys.dimension()) throw DomainError("initial state has wrong dimension");
  if (!std::isfinite(sys.energy(0.0, u0))) throw DomainError("initial energy must be finite");
  const std::size_t N = grid.steps();
  Trajectory traj;
  traj.grid = grid;
  traj.states.reserve(N + 1);
  traj.states.push_back(u0);
  traj.diagnostics.resize(N);
  std::vector<Vector> increments;
  increments.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    StepResult step;
    try {
      step = minimizing_movement_step(sys, psi, grid[k + 1], traj.states[k], grid.step(k), opts);
    } catch (const StepError& e) {
      throw StepError(std::string(e.what()) + " at step " + std::to_string(k), k, e.diagnostics());
    }
    traj.diagnostics[k] = step.diagnostics;
    traj.states.push_back(std::move(step.state));
    increments.push_back(std::move(step.increment));
  }
  return instrument(sys, psi, grid, std::move(traj.states), std::move(traj.diagnostics), increments);
}

/// Explicit Euler step along the steepest-descent direction with speed
/// (psi')^{-1}(slope). Requires a superlinear psi.
inline Vector direct_ode_step(const EvolutionSystem& sys, const DissipationFunction& psi, double t,
                              const Vector& u, double tau) {
  if (!psi.superlinear()) throw DomainError("direct ODE stepping needs a superlinear dissipation");
  const Vector grad = sys.gradient(t, u);
  const double F = sys.metric().dual_norm(u, grad);
  if (F == 0.0) return u;
  const double speed = psi.inverse_subdifferential(F);
  const Vector direction = -sys.metric().raise(u, grad) / F;
  return u + tau * speed * direction;
}

inline std::vector<Vector> run_direct_ode(const EvolutionSystem& sys, const DissipationFunction& psi,
                                          const Vector& u0, const TimeGrid& grid) {
  std::vector<Vector> states{u0};
  states.reserve(grid.size());
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    states.push_back(direct_ode_step(sys, psi, grid[k], states[k], grid.step(k)));
  }
  return states;
}

}  // namespace bvflow
