#pragma once

// CSV and report serialization. Numbers are written with %.17g so that repeated runs
// give byte-identical files.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bvflow/audit.hpp"
#include "bvflow/bv.hpp"
#include "bvflow/common.hpp"
#include "bvflow/family.hpp"
#include "bvflow/flow.hpp"

namespace bvflow {

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

/// Row k: t_k, u(t_k), speed of the step ending at t_k (0 at k = 0), slope, chosen_F,
/// energy, power and cumulative ED residual at t_k.
inline std::string trajectory_csv(const Trajectory& traj, const AuditReport& audit) {
  std::ostringstream o;
  const auto n = traj.states.front().size();
  o << "t";
  for (Eigen::Index i = 0; i < n; ++i) o << ",u_" << i;
  o << ",speed,slope,chosen_F,energy,power,ed_residual\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    o << fmt(traj.grid[k]);
    for (Eigen::Index i = 0; i < n; ++i) o << ',' << fmt(traj.states[k][i]);
    o << ',' << fmt(k == 0 ? 0.0 : traj.speeds[k - 1]) << ',' << fmt(traj.slopes[k]) << ','
      << fmt(traj.chosen_F[k]) << ',' << fmt(traj.energies[k]) << ',' << fmt(traj.powers[k]) << ','
      << fmt(audit.residual[k]) << '\n';
  }
  return o.str();
}

inline std::string bv_csv(const BVCurve& bv) {
  std::ostringstream o;
  const auto n = bv.states.front().size();
  o << "t";
  for (Eigen::Index i = 0; i < n; ++i) o << ",u_" << i;
  o << '\n';
  for (std::size_t k = 0; k < bv.states.size(); ++k) {
    o << fmt(bv.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) o << ',' << fmt(bv.states[k][i]);
    o << '\n';
  }
  return o.str();
}

inline std::string jumps_csv(const BVCurve& bv, const std::vector<double>& tricosts, Eigen::Index n) {
  std::ostringstream o;
  o << "t";
  for (const char* part : {"u_minus_", "u_at_", "u_plus_"}) {
    for (Eigen::Index i = 0; i < n; ++i) o << ',' << part << i;
  }
  o << ",tricost\n";
  for (std::size_t j = 0; j < bv.jumps.size(); ++j) {
    const auto& r = bv.jumps[j];
    o << fmt(r.t);
    for (const Vector* v : {&r.minus, &r.at, &r.plus}) {
      for (Eigen::Index i = 0; i < n; ++i) o << ',' << fmt((*v)[i]);
    }
    o << ',' << fmt(j < tricosts.size() ? tricosts[j] : 0.0) << '\n';
  }
  return o.str();
}

struct SampledCurve {
  std::vector<double> times;
  std::vector<Vector> states;
};

/// Reads a CSV whose header starts with t,u_0,...,u_{n-1}; further columns are ignored.
/// Malformed input raises ConfigError naming the line.
inline SampledCurve read_curve_csv(const std::string& path, int dimension) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ConfigError(path + ":" + std::to_string(lineno) + ": " + what);
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) {
    lineno = 1;
    fail("missing header");
  }
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < static_cast<std::size_t>(dimension) + 1 || header[0] != "t") {
    fail("header must start with t,u_0,...,u_" + std::to_string(dimension - 1));
  }
  for (int i = 0; i < dimension; ++i) {
    if (header[static_cast<std::size_t>(i) + 1] != "u_" + std::to_string(i)) {
      fail("expected column u_" + std::to_string(i));
    }
  }
  SampledCurve curve;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) fail("expected " + std::to_string(header.size()) + " fields");
    auto num = [&](const std::string& c) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || *end != '\0' || !std::isfinite(v)) fail("invalid number '" + c + "'");
      return v;
    };
    const double t = num(cells[0]);
    if (!curve.times.empty() && !(t > curve.times.back())) fail("times must be strictly increasing");
    Vector u(dimension);
    for (int i = 0; i < dimension; ++i) u[i] = num(cells[static_cast<std::size_t>(i) + 1]);
    curve.times.push_back(t);
    curve.states.push_back(std::move(u));
  }
  if (curve.times.size() < 2) fail("need at least two samples");
  return curve;
}

namespace detail {

class KeyValueWriter {
 public:
  void num(const std::string& key, double v) { out_ << key << '=' << fmt(v) << '\n'; }
  void count(const std::string& key, std::size_t v) { out_ << key << '=' << v << '\n'; }
  void text(const std::string& key, const std::string& v) { out_ << key << '=' << v << '\n'; }
  void flag(const std::string& key, bool v) { out_ << key << '=' << (v ? "true" : "false") << '\n'; }
  void list(const std::string& key, const std::vector<double>& v) {
    out_ << key << '=';
    for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << fmt(v[i]);
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

}  // namespace detail

inline std::string bv_verdict(const BVValidation& v) { return v.passed() ? "PASS" : "FAIL"; }

/// Flat key-value form of the convergence report.
inline std::string convergence_kv(const ConvergenceReport& r) {
  detail::KeyValueWriter w;
  w.text("law", to_string(r.law));
  w.count("members", r.members.size());
  for (std::size_t i = 0; i < r.members.size(); ++i) {
    w.text("member." + std::to_string(r.members[i]) + ".status", r.member_status[i] == "ok" ? "ok" : "failed");
  }
  w.count("limit_member", static_cast<std::size_t>(r.limit_member));
  w.num("slope_excess.threshold", r.excess_threshold);
  w.list("slope_excess", r.slope_excess);
  w.list("cauchy.max_off_jump", r.cauchy_max_off_jump);
  w.list("cauchy.max_in_jump", r.cauchy_max_in_jump);
  w.list("cauchy.l1", r.cauchy_l1);
  w.list("energy_gap.max_off_jump", r.energy.max_off_jump);
  w.list("energy_gap.max_in_jump", r.energy.max_in_jump);
  w.list("energy_gap.l1_off_jump", r.energy.l1_off_jump);
  w.num("dissipation_liminf.margin", r.dissipation.margin);
  w.list("dissipation_liminf.member_values", r.dissipation.member_values);
  w.num("dissipation_liminf.limit_value", r.dissipation.limit_value);
  w.num("dissipation_liminf.jump_cost", r.dissipation.jump_cost);
  w.flag("c1.passed", r.assumptions.c1_passed);
  w.num("c1.a", r.assumptions.c1_a);
  w.num("c1.b", r.assumptions.c1_b);
  if (r.assumptions.c1_witness) {
    std::vector<double> wv(r.assumptions.c1_witness->data(),
                           r.assumptions.c1_witness->data() + r.assumptions.c1_witness->size());
    w.list("c1.witness_state", wv);
    w.num("c1.witness_time", r.assumptions.c1_witness_time);
  }
  w.flag("c3.passed", r.assumptions.c3_passed);
  w.flag("c4.passed", r.assumptions.c4_passed);
  w.num("c4.worst_relative_change", r.assumptions.c4_worst);
  w.num("equi_integrability.max_tau_power", r.equi_integrability);
  w.count("jumps.count", r.jump_count);
  w.list("jumps.t", r.jump_times);
  w.list("jumps.tricost", r.jump_tricost);
  w.list("jumps.energy_drop", r.jump_energy_drop);
  w.num("variation.total", r.variation_total);
  w.num("variation.ac", r.parts.ac);
  w.num("variation.cantor", r.parts.cantor);
  w.num("variation.jump", r.parts.jump);
  w.flag("stability.passed", r.validation.stability.passed());
  w.count("stability.violations", r.validation.stability.violating_times.size());
  w.num("stability.max_excess", r.validation.stability.max_excess);
  w.num("energy_balance.scale", r.validation.scale);
  w.num("energy_balance.max_abs_residual", r.validation.max_abs_residual);
  w.num("energy_balance.full_interval_residual",
        r.validation.intervals.empty() ? 0.0 : r.validation.intervals.front().residual);
  w.flag("energy_balance.one_sided_ok", r.validation.one_sided_ok);
  w.flag("energy_balance.two_sided_ok", r.validation.two_sided_ok);
  w.text("bv_verdict", bv_verdict(r.validation));
  return w.str();
}

/// Human-readable convergence report.
inline std::string convergence_text(const ConvergenceReport& r, const std::string& limit_psi) {
  std::ostringstream o;
  auto row = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) o << (i ? "  " : "") << fmt(v[i]);
    o << '\n';
  };
  o << "family law: " << to_string(r.law) << "\n";
  o << "limit dissipation: " << limit_psi << "\n";
  o << "members:\n";
  for (std::size_t i = 0; i < r.members.size(); ++i) o << "  h=" << r.members[i] << "  " << r.member_status[i] << "\n";
  o << "limit candidate: finest member h=" << r.limit_member << "\n\n";

  if (!r.slope_excess.empty()) {
    o << "slope excess measure at f=" << fmt(r.excess_threshold) << " (per member):\n  ";
    row(r.slope_excess);
  }
  o << "cauchy gaps between consecutive members:\n";
  o << "  max off jump window: ";
  row(r.cauchy_max_off_jump);
  o << "  max in jump window:  ";
  row(r.cauchy_max_in_jump);
  o << "  time integral:       ";
  row(r.cauchy_l1);
  o << "energy gaps to the limit (per member):\n";
  o << "  max off jump window: ";
  row(r.energy.max_off_jump);
  o << "  max in jump window:  ";
  row(r.energy.max_in_jump);
  o << "  time integral off window: ";
  row(r.energy.l1_off_jump);
  o << "dissipation liminf on [0,T]: margin " << fmt(r.dissipation.margin) << ", limit value "
    << fmt(r.dissipation.limit_value) << ", jump cost " << fmt(r.dissipation.jump_cost) << "\n";
  o << "equi-integrability bound max tau*[p]+: " << fmt(r.equi_integrability) << "\n\n";

  o << "assumptions:\n";
  o << "  C1 " << (r.assumptions.c1_passed ? "pass" : "FAIL") << " with a=" << fmt(r.assumptions.c1_a)
    << " b=" << fmt(r.assumptions.c1_b);
  if (r.assumptions.c1_witness) {
    o << "  witness t=" << fmt(r.assumptions.c1_witness_time) << " u=(";
    for (Eigen::Index i = 0; i < r.assumptions.c1_witness->size(); ++i) {
      o << (i ? "," : "") << fmt((*r.assumptions.c1_witness)[i]);
    }
    o << ")";
  }
  o << "\n  C3 pass: " << r.assumptions.c3_note << "\n";
  o << "  C4 " << (r.assumptions.c4_passed ? "pass" : "FAIL") << " (continuity sampling, worst relative change "
    << fmt(r.assumptions.c4_worst) << ")\n\n";

  o << "limit candidate:\n";
  o << "  variation total " << fmt(r.variation_total) << " = ac " << fmt(r.parts.ac) << " + cantor "
    << fmt(r.parts.cantor) << " + jump " << fmt(r.parts.jump) << "\n";
  if (r.jump_count == 0) {
    o << "  limit is absolutely continuous; jump set empty\n";
  } else {
    o << "  jumps: " << r.jump_count << "\n";
    for (std::size_t j = 0; j < r.jump_count; ++j) {
      o << "    t=" << fmt(r.jump_times[j]) << "  tricost " << fmt(r.jump_tricost[j]) << "  energy drop "
        << fmt(r.jump_energy_drop[j]) << "\n";
    }
  }
  o << "  local stability: " << (r.validation.stability.passed() ? "pass" : "FAIL") << " ("
    << r.validation.stability.violating_times.size() << " violations, max excess "
    << fmt(r.validation.stability.max_excess) << ")\n";
  o << "  energy balance: scale " << fmt(r.validation.scale) << ", max |residual| over dyadic intervals "
    << fmt(r.validation.max_abs_residual) << "\n";
  o << "  BV verdict: " << bv_verdict(r.validation) << "\n\n";
  o << "notes:\n";
  o << "  convergence is reported along the full computed sequence; subsequential behaviour cannot be "
       "distinguished with a deterministic family\n";
  o << "  the slope bound and the stability check are evaluated at grid nodes only\n";
  return o.str();
}

}  // namespace bvflow
