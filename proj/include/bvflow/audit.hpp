#pragma once

// Energy-dissipation audits along instrumented trajectories.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bvflow/common.hpp"
#include "bvflow/dissipation.hpp"
#include "bvflow/flow.hpp"
#include "bvflow/system.hpp"

namespace bvflow {

struct AuditReport {
  /// Cumulative residual R_k of the psi-psi* energy-dissipation balance, one per node.
  std::vector<double> residual;
  double max_abs_residual = 0.0;
  double min_residual = 0.0;
  /// Nodes whose psi*(chosen_F) is infinite; their conjugate term is left out of R.
  std::vector<std::size_t> infinite_conjugate;

  std::size_t vs_checked = 0;
  std::size_t vs_violations = 0;
  double vs_max_gap = 0.0;

  std::string quadrature = "trapezoid";
};

/// R_k = e_k - e_0 + sum_{j<k} tau_j [psi(s_j) + (psi*(F_j) + psi*(F_{j+1}))/2]
///                 - sum_{j<k} tau_j (p_j + p_{j+1})/2.
/// Vanishes under refinement for psi-gradient flows and is nonnegative (up to quadrature)
/// along any curve of an upper-gradient system.
inline AuditReport ed_residual(const Trajectory& traj, const DissipationFunction& psi) {
  AuditReport report;
  const std::size_t N = traj.grid.steps();
  report.residual.assign(N + 1, 0.0);
  std::vector<double> conj(N + 1, 0.0);
  for (std::size_t k = 0; k <= N; ++k) {
    conj[k] = psi.conjugate(traj.chosen_F[k]);
    if (!std::isfinite(conj[k])) {
      report.infinite_conjugate.push_back(k);
      conj[k] = 0.0;
    }
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const double tau = traj.grid.step(k);
    acc += tau * psi.eval(traj.speeds[k]);
    acc += 0.5 * tau * (conj[k] + conj[k + 1]);
    acc -= 0.5 * tau * (traj.powers[k] + traj.powers[k + 1]);
    report.residual[k + 1] = traj.energies[k + 1] - traj.energies[0] + acc;
  }
  report.max_abs_residual = 0.0;
  report.min_residual = 0.0;
  for (double r : report.residual) {
    report.max_abs_residual = std::max(report.max_abs_residual, std::abs(r));
    report.min_residual = std::min(report.min_residual, r);
  }
  return report;
}

struct VelocitySlopeReport {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double max_gap = 0.0;
  std::vector<std::size_t> violating_steps;

  double pass_fraction() const {
    return checked == 0 ? 1.0 : 1.0 - static_cast<double>(violations) / static_cast<double>(checked);
  }
};

/// Checks chosen_F in the subdifferential of psi at the discrete speed. The implicit
/// scheme realizes the inclusion at the terminal node of each step, so the force of node
/// k+1 is paired with the speed of step k. Tolerance tol_rel * (1 + s).
inline VelocitySlopeReport velocity_slope_check(const Trajectory& traj, const DissipationFunction& psi,
                                                double tol_rel = 1e-6) {
  VelocitySlopeReport report;
  const std::size_t N = traj.grid.steps();
  for (std::size_t k = 0; k < N; ++k) {
    const double s = traj.speeds[k];
    const double F = traj.chosen_F[k + 1];
    const double gap = psi.subdifferential(s).distance_to(F);
    ++report.checked;
    report.max_gap = std::max(report.max_gap, gap);
    if (gap > tol_rel * (1.0 + s)) {
      ++report.violations;
      report.violating_steps.push_back(k);
    }
  }
  return report;
}

inline void attach_velocity_slope(AuditReport& audit, const VelocitySlopeReport& vs) {
  audit.vs_checked = vs.checked;
  audit.vs_violations = vs.violations;
  audit.vs_max_gap = vs.max_gap;
}

/// Worst margin over sub-intervals [alpha, beta] of the chain-rule inequality
///   E(q(beta)) + int F |u'| - E(q(alpha)) - int P t'  >= 0
/// along a sampled time-ordered curve (trapezoid rule).
inline double chain_rule_check(const EvolutionSystem& sys, std::span<const double> times,
                               std::span<const Vector> states, std::span<const double> F_choice) {
  const std::size_t n = times.size();
  if (n < 2 || states.size() != n || F_choice.size() != n) {
    throw DomainError("chain_rule_check needs matching samples (at least two)");
  }
  std::vector<double> power(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && times[k] < times[k - 1]) throw DomainError("curve must be time-ordered");
    const double F = sys.slope(times[k], states[k]);
    if (F_choice[k] < F - 1e-9 * (1.0 + F)) {
      throw ConstraintError("F_choice below the slope at sample " + std::to_string(k));
    }
    power[k] = detail::node_power(sys, times[k], states[k], F_choice[k]);
  }
  // G_k = E_k + int_0^{t_k} F|u'| - int_0^{t_k} P dt; margin = min_{i<j} G_j - G_i.
  double acc = 0.0;
  double running_max = sys.energy(times[0], states[0]);
  double margin = kInfinity;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double len = sys.metric().distance(states[k], states[k + 1]);
    acc += 0.5 * (F_choice[k] + F_choice[k + 1]) * len;
    acc -= 0.5 * (power[k] + power[k + 1]) * (times[k + 1] - times[k]);
    const double G = sys.energy(times[k + 1], states[k + 1]) + acc;
    margin = std::min(margin, G - running_max);
    running_max = std::max(running_max, G);
  }
  return margin;
}

/// Flat key-value rendering of an audit report.
inline std::string format_audit(const AuditReport& audit) {
  std::string out;
  char buf[256];
  auto line = [&](const char* key, double value) {
    std::snprintf(buf, sizeof buf, "%s=%.17g\n", key, value);
    out += buf;
  };
  auto count = [&](const char* key, std::size_t value) {
    std::snprintf(buf, sizeof buf, "%s=%zu\n", key, value);
    out += buf;
  };
  line("ed_residual_final", audit.residual.empty() ? 0.0 : audit.residual.back());
  line("ed_residual_max_abs", audit.max_abs_residual);
  line("ed_residual_min", audit.min_residual);
  count("infinite_conjugate_nodes", audit.infinite_conjugate.size());
  count("velocity_slope_checked", audit.vs_checked);
  count("velocity_slope_violations", audit.vs_violations);
  line("velocity_slope_max_gap", audit.vs_max_gap);
  out += "quadrature=" + audit.quadrature + "\n";
  out += "note=slope bound F >= F(t,u(t)) is enforced at grid nodes only\n";
  return out;
}

}  // namespace bvflow
