#pragma once

// BV curves sampled on a time grid: pointwise variation, jump detection, the
// absolutely continuous / Cantor / jump decomposition of the variation, and the
// checks defining BV solutions (local stability and energy balance).

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bvflow/common.hpp"
#include "bvflow/dissipation.hpp"
#include "bvflow/flow.hpp"
#include "bvflow/system.hpp"
#include "bvflow/transition.hpp"

namespace bvflow {

struct Decomposition {
  double ac = 0.0;
  double cantor = 0.0;  // clamped residual, never estimated directly
  double jump = 0.0;
  double clamp = 0.0;   // amount removed when the raw Cantor residual was negative
};

struct BVCurve {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<JumpRecord> jumps;
  std::vector<double> increments;  // d(u_k, u_{k+1}) per step
  std::vector<double> ac_speed;    // increment / tau off jump steps, 0 inside jumps
  std::vector<char> jump_step;     // 1 if the step belongs to a resolved jump
  double variation_total = 0.0;
  Decomposition parts;
};

struct JumpOptions {
  double delta_jump = 20.0;     // relative to the median increment
  double abs_floor_rel = 1e-3;  // relative to the state scale
  std::optional<double> abs_floor;
};

/// Partition sum of d(u_{k-1}, u_k).
inline double total_variation(std::span<const Vector> states, const MetricStructure& metric) {
  if (states.size() < 2) throw DomainError("total variation needs at least two samples");
  double v = 0.0;
  for (std::size_t k = 0; k + 1 < states.size(); ++k) v += metric.distance(states[k], states[k + 1]);
  return v;
}

/// State scale used by the absolute jump floor: the largest distance from u(0).
inline double state_scale(std::span<const Vector> states, const MetricStructure& metric) {
  double s = 0.0;
  for (const auto& u : states) s = std::max(s, metric.distance(states.front(), u));
  return s;
}

/// Flags steps whose increment exceeds delta_jump times the median increment and the
/// absolute floor, and merges consecutive flagged steps into one jump. u(t-) and u(t+) are
/// the samples bracketing the merged steps; the jump time and u(t) are the left sample of
/// the largest increment.
inline std::vector<JumpRecord> detect_jumps(std::span<const double> times, std::span<const Vector> states,
                                            const MetricStructure& metric, const JumpOptions& opts = {}) {
  const std::size_t n = states.size();
  if (times.size() != n) throw DomainError("times and states differ in length");
  std::vector<JumpRecord> jumps;
  if (n < 2) return jumps;
  std::vector<double> inc(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) inc[k] = metric.distance(states[k], states[k + 1]);
  std::vector<double> sorted = inc;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double floor = opts.abs_floor.value_or(opts.abs_floor_rel * state_scale(states, metric));
  auto flagged = [&](std::size_t k) { return inc[k] > opts.delta_jump * median && inc[k] > floor; };

  std::size_t k = 0;
  while (k + 1 < n) {
    if (!flagged(k)) {
      ++k;
      continue;
    }
    std::size_t last = k;
    while (last + 2 < n && flagged(last + 1)) ++last;
    std::size_t peak = k;
    for (std::size_t j = k; j <= last; ++j) {
      if (inc[j] > inc[peak]) peak = j;
    }
    JumpRecord rec;
    rec.t = times[peak];
    rec.first_step = k;
    rec.last_step = last;
    rec.minus = states[k];
    rec.at = states[peak];
    rec.plus = states[last + 1];
    jumps.push_back(std::move(rec));
    k = last + 1;
  }
  return jumps;
}

/// Variation split into the part carried by the off-jump steps, the jumps (d(u-, u) +
/// d(u, u+)), and the clamped remainder.
inline Decomposition decompose(const BVCurve& bv, const MetricStructure& metric) {
  Decomposition parts;
  for (std::size_t k = 0; k < bv.increments.size(); ++k) {
    if (!bv.jump_step[k]) parts.ac += bv.increments[k];
  }
  for (const auto& j : bv.jumps) {
    parts.jump += metric.distance(j.minus, j.at) + metric.distance(j.at, j.plus);
  }
  const double raw = bv.variation_total - parts.ac - parts.jump;
  if (raw < 0.0) {
    parts.clamp = -raw;
    parts.cantor = 0.0;
  } else {
    parts.cantor = raw;
  }
  return parts;
}

inline BVCurve make_bv_curve(std::vector<double> times, std::vector<Vector> states, const MetricStructure& metric,
                             const JumpOptions& opts = {}) {
  if (times.size() != states.size() || times.size() < 2) {
    throw DomainError("BV curve needs at least two matching samples");
  }
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    if (!(times[k + 1] > times[k])) throw DomainError("BV sample times must be strictly increasing");
  }
  BVCurve bv;
  bv.times = std::move(times);
  bv.states = std::move(states);
  const std::size_t steps = bv.states.size() - 1;
  bv.increments.resize(steps);
  for (std::size_t k = 0; k < steps; ++k) bv.increments[k] = metric.distance(bv.states[k], bv.states[k + 1]);
  bv.variation_total = 0.0;
  for (double d : bv.increments) bv.variation_total += d;
  bv.jumps = detect_jumps(bv.times, bv.states, metric, opts);
  bv.jump_step.assign(steps, 0);
  for (const auto& j : bv.jumps) {
    for (std::size_t k = j.first_step; k <= j.last_step; ++k) bv.jump_step[k] = 1;
  }
  bv.ac_speed.assign(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    if (!bv.jump_step[k]) bv.ac_speed[k] = bv.increments[k] / (bv.times[k + 1] - bv.times[k]);
  }
  bv.parts = decompose(bv, metric);
  return bv;
}

/// Per-jump Cantor residual: variation across the merged steps minus the jump's own
/// contribution, clamped at zero.
inline double jump_cantor_residual(const BVCurve& bv, const JumpRecord& j, const MetricStructure& metric) {
  double across = 0.0;
  for (std::size_t k = j.first_step; k <= j.last_step; ++k) across += bv.increments[k];
  return std::max(0.0, across - metric.distance(j.minus, j.at) - metric.distance(j.at, j.plus));
}

/// Marks nodes within `margin` steps of a resolved jump.
inline std::vector<char> jump_window_nodes(const BVCurve& bv, std::size_t margin = 0) {
  std::vector<char> in(bv.states.size(), 0);
  for (const auto& j : bv.jumps) {
    const std::size_t lo = j.first_node() > margin ? j.first_node() - margin : 0;
    const std::size_t hi = std::min(bv.states.size() - 1, j.last_node() + margin);
    for (std::size_t k = lo; k <= hi; ++k) in[k] = 1;
  }
  return in;
}

struct StabilityReport {
  std::size_t checked = 0;
  std::vector<double> violating_times;
  double max_excess = 0.0;  // max over checked nodes of slope - L
  bool passed() const { return violating_times.empty(); }
};

/// slope(t, u(t)) <= L + tol_stab at every sample outside the jump windows.
inline StabilityReport local_stability_check(const EvolutionSystem& sys, const BVCurve& bv, double cap_L,
                                             double tol_stab, std::size_t window_margin = 0) {
  StabilityReport report;
  report.max_excess = -kInfinity;
  const auto exempt = jump_window_nodes(bv, window_margin);
  for (std::size_t k = 0; k < bv.states.size(); ++k) {
    if (exempt[k]) continue;
    ++report.checked;
    const double excess = sys.slope(bv.times[k], bv.states[k]) - cap_L;
    report.max_excess = std::max(report.max_excess, excess);
    if (excess > tol_stab) report.violating_times.push_back(bv.times[k]);
  }
  if (report.checked == 0) report.max_excess = 0.0;
  return report;
}

struct EnergyBalance {
  double t1 = 0.0;
  double t2 = 0.0;
  std::size_t node_begin = 0;
  std::size_t node_end = 0;
  double energy_start = 0.0;
  double energy_end = 0.0;
  double dissipation = 0.0;   // int psi(|u'|) over off-jump steps
  double conjugate = 0.0;     // int psi*(F) over off-jump steps (omitted for psi = L v)
  double cantor = 0.0;        // L * Cantor variation
  double jumps = 0.0;         // jump functional
  double power = 0.0;         // int P(t, u, F)
  double residual = 0.0;
  bool rate_independent = false;
};

/// Snaps a time to the nearest node, moved out of the interior of any resolved jump.
inline std::size_t snap_node(const BVCurve& bv, double t, bool is_end) {
  auto it = std::lower_bound(bv.times.begin(), bv.times.end(), t);
  std::size_t k;
  if (it == bv.times.end()) k = bv.times.size() - 1;
  else if (it == bv.times.begin()) k = 0;
  else {
    const std::size_t hi = static_cast<std::size_t>(it - bv.times.begin());
    k = (t - bv.times[hi - 1] <= bv.times[hi] - t) ? hi - 1 : hi;
  }
  for (const auto& j : bv.jumps) {
    if (k > j.first_node() && k < j.last_node()) k = is_end ? j.last_node() : j.first_node();
  }
  return k;
}

/// Residual of the energy balance on [t1, t2]:
///   E(t2) + int [psi(|u'|) + psi*(F)] + L Cantor + Jmp - E(t1) - int P(t, u, F).
/// For psi = L v the rate-independent form is used (no psi* term). chosen_F defaults to
/// the slope at each sample.
inline EnergyBalance energy_balance_check(const EvolutionSystem& sys, const BVCurve& bv,
                                          const DissipationFunction& psi, std::span<const double> chosen_F,
                                          double t1, double t2, const BicostOptions& bicost_opts = {}) {
  if (!(t2 >= t1)) throw DomainError("energy balance interval must satisfy t1 <= t2");
  const std::size_t n = bv.states.size();
  std::vector<double> F(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double slope = sys.slope(bv.times[k], bv.states[k]);
    if (chosen_F.empty()) {
      F[k] = slope;
    } else {
      if (chosen_F.size() != n) throw DomainError("chosen_F must have one entry per sample");
      if (chosen_F[k] < slope - 1e-9 * (1.0 + slope)) {
        throw ConstraintError("chosen_F below the slope at sample " + std::to_string(k));
      }
      F[k] = chosen_F[k];
    }
  }
  EnergyBalance eb;
  eb.rate_independent = psi.family() == DissipationFunction::Family::Linear;
  eb.node_begin = snap_node(bv, t1, false);
  eb.node_end = std::max(eb.node_begin, snap_node(bv, t2, true));
  eb.t1 = bv.times[eb.node_begin];
  eb.t2 = bv.times[eb.node_end];
  eb.energy_start = sys.energy(eb.t1, bv.states[eb.node_begin]);
  eb.energy_end = sys.energy(eb.t2, bv.states[eb.node_end]);
  const double L = psi.growth();

  auto conj = [&](std::size_t k) {
    const double c = psi.conjugate(F[k]);
    if (!std::isfinite(c)) {
      throw ConstraintError("psi*(chosen_F) is infinite at sample " + std::to_string(k));
    }
    return c;
  };
  for (std::size_t k = eb.node_begin; k < eb.node_end; ++k) {
    const double tau = bv.times[k + 1] - bv.times[k];
    const double pk = detail::node_power(sys, bv.times[k], bv.states[k], F[k]);
    const double pk1 = detail::node_power(sys, bv.times[k + 1], bv.states[k + 1], F[k + 1]);
    eb.power += 0.5 * tau * (pk + pk1);
    if (bv.jump_step[k]) continue;
    eb.dissipation += tau * psi.eval(bv.increments[k] / tau);
    if (!eb.rate_independent) eb.conjugate += 0.5 * tau * (conj(k) + conj(k + 1));
  }
  const MetricStructure& metric = sys.metric();
  for (const auto& j : bv.jumps) {
    if (j.first_node() < eb.node_begin || j.last_node() > eb.node_end) continue;
    const double c = jump_cantor_residual(bv, j, metric);
    if (c > 0.0) eb.cantor += std::isfinite(L) ? L * c : kInfinity;
  }
  eb.jumps = jump_total(sys, bv.jumps, L, eb.node_begin, eb.node_end, bicost_opts);
  eb.residual = eb.energy_end + eb.dissipation + eb.conjugate + eb.cantor + eb.jumps - eb.energy_start - eb.power;
  return eb;
}

/// Scale used to normalize energy-balance residuals: max |E(t, u(t))| + int |P|.
inline double energy_scale(const EvolutionSystem& sys, const BVCurve& bv) {
  double emax = 0.0;
  double pint = 0.0;
  for (std::size_t k = 0; k < bv.states.size(); ++k) {
    emax = std::max(emax, std::abs(sys.energy(bv.times[k], bv.states[k])));
  }
  for (std::size_t k = 0; k + 1 < bv.states.size(); ++k) {
    const double tau = bv.times[k + 1] - bv.times[k];
    const double a = detail::node_power(sys, bv.times[k], bv.states[k], sys.slope(bv.times[k], bv.states[k]));
    const double b =
        detail::node_power(sys, bv.times[k + 1], bv.states[k + 1], sys.slope(bv.times[k + 1], bv.states[k + 1]));
    pint += 0.5 * tau * (std::abs(a) + std::abs(b));
  }
  return std::max(emax + pint, 1e-12);
}

struct BVValidationOptions {
  double tol_stab = 0.05;
  double tol_eb_rel = 0.05;  // relative to energy_scale
  int dyadic_levels = 3;
  std::size_t window_margin = 2;
  BicostOptions bicost;
};

struct BVValidation {
  StabilityReport stability;
  std::vector<EnergyBalance> intervals;  // dyadic intervals, level by level
  double scale = 0.0;
  double max_abs_residual = 0.0;
  double max_residual = 0.0;  // one-sided (energy-dissipation inequality) check
  bool one_sided_ok = true;
  bool two_sided_ok = true;
  bool passed() const { return stability.passed() && two_sided_ok; }
};

/// Local stability plus the energy balance on every dyadic sub-interval of [0, T].
inline BVValidation validate_bv(const EvolutionSystem& sys, const BVCurve& bv, const DissipationFunction& psi,
                                const BVValidationOptions& opts = {}, std::span<const double> chosen_F = {}) {
  BVValidation out;
  const double cap = std::isfinite(psi.growth()) ? psi.growth() : kInfinity;
  out.stability = local_stability_check(sys, bv, cap, opts.tol_stab, opts.window_margin);
  out.scale = energy_scale(sys, bv);
  const double T0 = bv.times.front();
  const double T1 = bv.times.back();
  const double tol = opts.tol_eb_rel * out.scale;
  for (int level = 0; level <= opts.dyadic_levels; ++level) {
    const int pieces = 1 << level;
    for (int i = 0; i < pieces; ++i) {
      const double a = T0 + (T1 - T0) * i / pieces;
      const double b = T0 + (T1 - T0) * (i + 1) / pieces;
      auto eb = energy_balance_check(sys, bv, psi, chosen_F, a, b, opts.bicost);
      out.max_abs_residual = std::max(out.max_abs_residual, std::abs(eb.residual));
      out.max_residual = std::max(out.max_residual, eb.residual);
      if (std::abs(eb.residual) > tol || !std::isfinite(eb.residual)) out.two_sided_ok = false;
      if (!(eb.residual <= tol)) out.one_sided_ok = false;
      out.intervals.push_back(eb);
    }
  }
  return out;
}

}  // namespace bvflow
