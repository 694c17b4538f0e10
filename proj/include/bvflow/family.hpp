#pragma once

// Families of psi_h-gradient flows (p_h -> 1, eps_h -> 0, or p_h -> p > 1), the pointwise
// limit candidate, and the compactness / convergence diagnostics evaluated on them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bvflow/audit.hpp"
#include "bvflow/bv.hpp"
#include "bvflow/common.hpp"
#include "bvflow/dissipation.hpp"
#include "bvflow/flow.hpp"
#include "bvflow/system.hpp"

namespace bvflow {

enum class FamilyLaw { PToOne, EpsToZero, PToLimit };

inline std::string to_string(FamilyLaw law) {
  switch (law) {
    case FamilyLaw::PToOne:
      return "p_to_one";
    case FamilyLaw::EpsToZero:
      return "eps_to_zero";
    case FamilyLaw::PToLimit:
      return "p_to_limit";
  }
  return "unknown";
}

struct FamilySpec {
  EvolutionSystem system;
  FamilyLaw law = FamilyLaw::PToOne;
  double ratio = 0.5;      // r in p_h = p_limit + r^h or eps_h = r^h
  int count = 6;           // H
  int first = 1;           // index of the first member
  double p_limit = 1.0;    // limit exponent for p_to_limit
  double eps_power = 2.0;  // exponent p of eps v^p for eps_to_zero
  Vector initial_state;
  TimeGrid grid;
  SolverOptions solver;
  bool parallel = true;

  std::vector<int> indices() const {
    std::vector<int> h(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) h[static_cast<std::size_t>(i)] = first + i;
    return h;
  }

  DissipationFunction member(int h) const {
    const double r = std::pow(ratio, h);
    switch (law) {
      case FamilyLaw::PToOne:
        return DissipationFunction::power(1.0 + r);
      case FamilyLaw::EpsToZero:
        return DissipationFunction::viscous_linear(r, eps_power);
      case FamilyLaw::PToLimit:
        return DissipationFunction::power(p_limit + r);
    }
    return DissipationFunction::power(1.0 + r);
  }

  DissipationFunction limit() const {
    if (law == FamilyLaw::PToLimit && p_limit > 1.0) return DissipationFunction::power(p_limit);
    return DissipationFunction::linear(1.0);
  }

  void validate() const {
    if (count < 1) throw DomainError("family needs at least one member");
    if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("family ratio must lie in (0, 1)");
    if (law == FamilyLaw::PToLimit && !(p_limit >= 1.0)) throw DomainError("p_limit must be >= 1");
    if (law == FamilyLaw::EpsToZero && !(eps_power > 1.0)) throw DomainError("eps_power must be > 1");
    if (initial_state.size() != system.dimension()) throw DomainError("initial state has wrong dimension");
  }
};

struct MemberRun {
  int h = 0;
  DissipationFunction psi = DissipationFunction::power(2.0);
  std::optional<Trajectory> trajectory;
  std::string error;
  std::optional<std::size_t> failed_step;
};

/// One flow per member; members are independent and returned in index order.
inline std::vector<MemberRun> run_family(const FamilySpec& spec) {
  spec.validate();
  const auto hs = spec.indices();
  auto run_one = [&spec](int h) {
    MemberRun run;
    run.h = h;
    run.psi = spec.member(h);
    try {
      run.trajectory = run_flow(spec.system, run.psi, spec.initial_state, spec.grid, spec.solver);
    } catch (const StepError& e) {
      run.error = e.what();
      run.failed_step = e.index();
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    return run;
  };
  std::vector<MemberRun> out;
  out.reserve(hs.size());
  if (spec.parallel && hs.size() > 1) {
    std::vector<std::future<MemberRun>> futures;
    for (int h : hs) futures.push_back(std::async(std::launch::async, run_one, h));
    for (auto& f : futures) out.push_back(f.get());
  } else {
    for (int h : hs) out.push_back(run_one(h));
  }
  return out;
}

struct LimitCandidate {
  BVCurve curve;
  int member = 0;  // index h of the member used as the limit
  /// cauchy[i][k] = d(u_{h_i}(t_k), u_{h_{i+1}}(t_k)) for consecutive successful members.
  std::vector<std::vector<double>> cauchy;
  std::vector<int> cauchy_members;  // h_i of each row
};

/// The finest successful member, sampled on the common grid, with Cauchy gaps between
/// consecutive members as the convergence certificate.
inline LimitCandidate pointwise_limit(const std::vector<MemberRun>& members, const MetricStructure& metric,
                                      const JumpOptions& jump_opts = {}) {
  std::vector<const MemberRun*> ok;
  for (const auto& m : members) {
    if (m.trajectory) ok.push_back(&m);
  }
  if (ok.empty()) throw DomainError("no successful member to build a limit from");
  const Trajectory& finest = *ok.back()->trajectory;
  for (const auto* m : ok) {
    if (m->trajectory->grid.nodes() != finest.grid.nodes()) throw DomainError("members must share the common grid");
  }
  LimitCandidate lc;
  lc.member = ok.back()->h;
  lc.curve = make_bv_curve(finest.grid.nodes(), finest.states, metric, jump_opts);
  for (std::size_t i = 0; i + 1 < ok.size(); ++i) {
    const auto& a = ok[i]->trajectory->states;
    const auto& b = ok[i + 1]->trajectory->states;
    std::vector<double> gaps(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) gaps[k] = metric.distance(a[k], b[k]);
    lc.cauchy.push_back(std::move(gaps));
    lc.cauchy_members.push_back(ok[i]->h);
  }
  return lc;
}

/// Lebesgue measure of {t : F_h(t) >= f}, with the force realized in step k taken at
/// its terminal node.
inline double slope_excess_measure(const Trajectory& traj, double f, double cap_L) {
  if (!(f > cap_L)) throw DomainError("slope excess threshold must exceed L");
  double measure = 0.0;
  for (std::size_t k = 0; k < traj.grid.steps(); ++k) {
    if (traj.chosen_F[k + 1] >= f) measure += traj.grid.step(k);
  }
  return measure;
}

inline std::pair<std::size_t, std::size_t> node_range(const TimeGrid& grid, double t1, double t2) {
  const auto& nodes = grid.nodes();
  auto lo = std::lower_bound(nodes.begin(), nodes.end(), t1 - 1e-12 * (1.0 + std::abs(t1)));
  auto hi = std::upper_bound(nodes.begin(), nodes.end(), t2 + 1e-12 * (1.0 + std::abs(t2)));
  std::size_t a = static_cast<std::size_t>(lo - nodes.begin());
  std::size_t b = hi == nodes.begin() ? 0 : static_cast<std::size_t>(hi - nodes.begin()) - 1;
  a = std::min(a, nodes.size() - 1);
  return {a, std::max(a, b)};
}

struct DissipationMargin {
  double margin = kInfinity;          // min over the inspected members
  std::vector<double> member_values;  // int psi_h(s) per inspected member
  double limit_value = 0.0;           // int psi(|u'|) + L Cantor on the limit
  double jump_cost = 0.0;             // jump functional of the limit in the interval
};

/// liminf int psi_h(|u_h'|) >= int psi(|u'|) + L Cantor, checked on the last `last` members.
inline DissipationMargin dissipation_liminf_check(const EvolutionSystem& sys, const std::vector<MemberRun>& members,
                                                  const BVCurve& bv, const DissipationFunction& psi_limit,
                                                  double t1, double t2, std::size_t last = 2) {
  DissipationMargin out;
  std::vector<const MemberRun*> ok;
  for (const auto& m : members) {
    if (m.trajectory) ok.push_back(&m);
  }
  if (ok.empty()) return out;
  const TimeGrid& grid = ok.back()->trajectory->grid;
  const auto [a, b] = node_range(grid, t1, t2);
  const double L = psi_limit.growth();
  for (std::size_t k = a; k < b; ++k) {
    if (bv.jump_step[k]) continue;
    const double tau = bv.times[k + 1] - bv.times[k];
    out.limit_value += tau * psi_limit.eval(bv.increments[k] / tau);
  }
  for (const auto& j : bv.jumps) {
    if (j.first_node() < a || j.last_node() > b) continue;
    const double c = jump_cantor_residual(bv, j, sys.metric());
    if (c > 0.0) out.limit_value += std::isfinite(L) ? L * c : kInfinity;
  }
  if (std::isfinite(L)) out.jump_cost = jump_total(sys, bv.jumps, L, a, b);
  const std::size_t begin = ok.size() > last ? ok.size() - last : 0;
  for (std::size_t i = begin; i < ok.size(); ++i) {
    const Trajectory& tr = *ok[i]->trajectory;
    double value = 0.0;
    for (std::size_t k = a; k < b; ++k) value += tr.grid.step(k) * ok[i]->psi.eval(tr.speeds[k]);
    out.member_values.push_back(value);
    out.margin = std::min(out.margin, value - out.limit_value);
  }
  return out;
}

struct EnergyGaps {
  std::vector<int> members;
  std::vector<std::vector<double>> gaps;  // per member, per node |E(t,u_h) - E(t,u)|
  std::vector<double> max_off_jump;        // per member
  std::vector<double> max_in_jump;         // per member
  std::vector<double> l1_off_jump;         // per member, int |gap| dt over steps outside the windows
};

/// |E(t, u_h(t)) - E(t, u(t))| per node for every successful member, split into nodes
/// outside and inside the jump windows of the limit.
inline EnergyGaps energy_convergence_check(const EvolutionSystem& sys, const std::vector<MemberRun>& members,
                                           const BVCurve& bv, std::size_t window_margin = 2) {
  EnergyGaps out;
  const auto window = jump_window_nodes(bv, window_margin);
  std::vector<double> limit_energy(bv.states.size());
  for (std::size_t k = 0; k < bv.states.size(); ++k) limit_energy[k] = sys.energy(bv.times[k], bv.states[k]);
  for (const auto& m : members) {
    if (!m.trajectory) continue;
    const auto& tr = *m.trajectory;
    std::vector<double> g(bv.states.size());
    double off = 0.0;
    double in = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      g[k] = std::abs(tr.energies[k] - limit_energy[k]);
      (window[k] ? in : off) = std::max(window[k] ? in : off, g[k]);
    }
    double l1 = 0.0;
    for (std::size_t k = 0; k + 1 < g.size(); ++k) {
      if (!window[k] && !window[k + 1]) l1 += 0.5 * (bv.times[k + 1] - bv.times[k]) * (g[k] + g[k + 1]);
    }
    out.members.push_back(m.h);
    out.l1_off_jump.push_back(l1);
    out.gaps.push_back(std::move(g));
    out.max_off_jump.push_back(off);
    out.max_in_jump.push_back(in);
  }
  return out;
}

struct AssumptionReport {
  bool c1_passed = false;
  double c1_a = 0.0;
  double c1_b = 0.0;
  std::optional<Vector> c1_witness;
  double c1_witness_time = 0.0;
  bool c3_passed = true;
  std::string c3_note = "metric is fixed along the family; condition holds trivially";
  bool c4_passed = false;
  double c4_worst = 0.0;
};

/// Spot-checks of the family assumptions on sampled states:
///   C1: E(t,u) + a d(u, u_ref) + b >= 0 for some a < L, b >= 0, with (a, b) fitted on a box
///       of radius R and confirmed on shells of radius 2R, 4R, 8R;
///   C3: recorded (fixed metric);
///   C4: continuity of E along sequences converging to sampled points.
inline AssumptionReport assumption_spotcheck(const EvolutionSystem& sys, const Vector& reference, double cap_L,
                                             double radius = 0.0, std::uint64_t seed = 99) {
  AssumptionReport rep;
  const int n = sys.dimension();
  const double R = radius > 0.0 ? radius : std::max(2.0, 2.0 * reference.lpNorm<Eigen::Infinity>());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample_shell = [&](double r_lo, double r_hi, int count) {
    std::vector<Vector> pts;
    if (n == 1) {
      for (int i = 0; i < count; ++i) {
        const double s = r_lo + (r_hi - r_lo) * (i / std::max(1.0, count / 2.0 - 1.0));
        if (i < count / 2) pts.push_back(reference + Vector::Constant(1, std::min(s, r_hi)));
        else pts.push_back(reference - Vector::Constant(1, r_lo + (r_hi - r_lo) * ((i - count / 2) / std::max(1.0, count / 2.0 - 1.0))));
      }
      return pts;
    }
    for (int i = 0; i < count; ++i) {
      Vector d(n);
      for (int j = 0; j < n; ++j) d[j] = normal(rng);
      d /= std::max(d.norm(), 1e-300);
      pts.push_back(reference + (r_lo + (r_hi - r_lo) * unit(rng)) * d);
    }
    return pts;
  };
  std::vector<double> times;
  for (int i = 0; i <= 10; ++i) times.push_back(sys.horizon() * i / 10.0);

  std::vector<double> a_grid;
  if (std::isfinite(cap_L)) a_grid = {0.0, 0.25 * cap_L, 0.5 * cap_L, 0.75 * cap_L, 0.9 * cap_L};
  else a_grid = {0.0, 1.0, 2.0, 4.0, 8.0};

  // For each a the fitting box grows (R0, 2R0, 4R0) until the fit survives the outer shells.
  std::vector<Vector> inner = sample_shell(0.0, R, 400);
  for (double a : a_grid) {
    for (int grow = 0; grow < 3 && !rep.c1_passed; ++grow) {
      const double Rg = R * std::ldexp(1.0, grow);
      const auto box = sample_shell(0.0, Rg, 400);
      std::vector<std::vector<Vector>> shells;
      for (double f : {2.0, 4.0, 8.0}) shells.push_back(sample_shell(0.5 * f * Rg, f * Rg, 200));
      double b = 0.0;
      for (double t : times) {
        for (const auto& u : box) {
          b = std::max(b, -(sys.energy(t, u) + a * sys.metric().distance(u, reference)));
        }
      }
      bool ok = true;
      for (const auto& shell : shells) {
        for (double t : times) {
          for (const auto& u : shell) {
            const double val = sys.energy(t, u) + a * sys.metric().distance(u, reference) + b;
            if (!(val >= -1e-9 * (1.0 + b))) {
              ok = false;
              rep.c1_witness = u;
              rep.c1_witness_time = t;
              break;
            }
          }
          if (!ok) break;
        }
        if (!ok) break;
      }
      rep.c1_a = a;
      rep.c1_b = b;
      if (ok) {
        rep.c1_passed = true;
        rep.c1_witness.reset();
      }
    }
    if (rep.c1_passed) break;
  }

  rep.c4_passed = true;
  rep.c4_worst = 0.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(inner.size(), 40); ++i) {
    const Vector& u = inner[i * inner.size() / 40];
    const double t = times[i % times.size()];
    const double e = sys.energy(t, u);
    Vector du(n);
    for (int j = 0; j < n; ++j) du[j] = normal(rng);
    const double dt = t < sys.horizon() ? 1.0 : -1.0;
    double last = kInfinity;
    for (int k = 10; k <= 40; k += 10) {
      const double s = std::ldexp(1.0, -k);
      const double tk = std::clamp(t + dt * s * sys.horizon(), 0.0, sys.horizon());
      last = std::abs(sys.energy(tk, u + s * du) - e);
    }
    rep.c4_worst = std::max(rep.c4_worst, last / (1.0 + std::abs(e)));
  }
  rep.c4_passed = rep.c4_worst <= 1e-6;
  return rep;
}

/// max over members and steps of tau_k [p_k]_+ (uniform bound used as the
/// equi-integrability indicator of the powers).
inline double power_equi_integrability(const std::vector<MemberRun>& members) {
  double worst = 0.0;
  for (const auto& m : members) {
    if (!m.trajectory) continue;
    const auto& tr = *m.trajectory;
    for (std::size_t k = 0; k < tr.grid.steps(); ++k) {
      worst = std::max(worst, tr.grid.step(k) * std::max(0.0, tr.powers[k]));
    }
  }
  return worst;
}

struct ConvergenceReport {
  FamilyLaw law = FamilyLaw::PToOne;
  std::vector<int> members;
  std::vector<std::string> member_status;
  std::vector<double> slope_excess;       // per successful member at f = L + excess_offset
  double excess_threshold = 0.0;
  std::vector<double> cauchy_max_off_jump;  // per consecutive pair
  std::vector<double> cauchy_max_in_jump;
  std::vector<double> cauchy_l1;  // int d(u_h, u_{h+1}) dt per consecutive pair
  EnergyGaps energy;
  DissipationMargin dissipation;
  AssumptionReport assumptions;
  double equi_integrability = 0.0;
  std::size_t jump_count = 0;
  std::vector<double> jump_times;
  std::vector<double> jump_tricost;
  std::vector<double> jump_energy_drop;
  Decomposition parts;
  double variation_total = 0.0;
  BVValidation validation;
  int limit_member = 0;
};

/// Runs every diagnostic on a computed family and its limit candidate.
inline ConvergenceReport assess_family(const FamilySpec& spec, const std::vector<MemberRun>& members,
                                       const LimitCandidate& limit, const BVValidationOptions& bv_opts,
                                       double excess_offset = 0.1) {
  ConvergenceReport rep;
  rep.law = spec.law;
  const auto psi_limit = spec.limit();
  const double L = psi_limit.growth();
  const auto& sys = spec.system;
  const auto& bv = limit.curve;
  rep.limit_member = limit.member;
  for (const auto& m : members) {
    rep.members.push_back(m.h);
    rep.member_status.push_back(m.trajectory ? "ok" : "failed: " + m.error);
  }
  rep.excess_threshold = std::isfinite(L) ? L + excess_offset : kInfinity;
  if (std::isfinite(L)) {
    for (const auto& m : members) {
      if (m.trajectory) rep.slope_excess.push_back(slope_excess_measure(*m.trajectory, rep.excess_threshold, L));
    }
  }
  const auto window = jump_window_nodes(bv, bv_opts.window_margin);
  for (const auto& row : limit.cauchy) {
    double off = 0.0;
    double in = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (window[k]) in = std::max(in, row[k]);
      else off = std::max(off, row[k]);
    }
    rep.cauchy_max_off_jump.push_back(off);
    rep.cauchy_max_in_jump.push_back(in);
    double l1 = 0.0;
    for (std::size_t k = 0; k + 1 < row.size(); ++k) l1 += 0.5 * (bv.times[k + 1] - bv.times[k]) * (row[k] + row[k + 1]);
    rep.cauchy_l1.push_back(l1);
  }
  rep.energy = energy_convergence_check(sys, members, bv, bv_opts.window_margin);
  rep.dissipation = dissipation_liminf_check(sys, members, bv, psi_limit, bv.times.front(), bv.times.back());
  rep.assumptions = assumption_spotcheck(sys, spec.initial_state, L);
  rep.equi_integrability = power_equi_integrability(members);
  rep.jump_count = bv.jumps.size();
  for (const auto& j : bv.jumps) {
    rep.jump_times.push_back(j.t);
    rep.jump_tricost.push_back(std::isfinite(L) ? tricost(sys, j.t, j.minus, j.at, j.plus, L).value : kInfinity);
    rep.jump_energy_drop.push_back(sys.energy(j.t, j.minus) - sys.energy(j.t, j.plus));
  }
  rep.parts = bv.parts;
  rep.variation_total = bv.variation_total;
  rep.validation = validate_bv(sys, bv, psi_limit, bv_opts);
  return rep;
}

}  // namespace bvflow
