#pragma once

// Command implementations behind the bvflow executable. Each returns a process exit code:
// 0 success, 1 validation verdict FAIL, 2 solver error, 3 configuration or input error.

#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "bvflow/audit.hpp"
#include "bvflow/bv.hpp"
#include "bvflow/config.hpp"
#include "bvflow/family.hpp"
#include "bvflow/flow.hpp"
#include "bvflow/io.hpp"
#include "bvflow/transition.hpp"

namespace bvflow::cli {

enum ExitCode : int { kOk = 0, kVerdictFail = 1, kSolverError = 2, kConfigError = 3 };

struct GlobalOptions {
  std::string config;
  std::string out;
  bool strict = false;
};

inline std::filesystem::path resolve_out_dir(const GlobalOptions& g, const RunConfig& cfg) {
  if (!g.out.empty()) return g.out;
  if (!cfg.output.dir.empty()) return cfg.output.dir;
  if (const char* env = std::getenv("BVFLOW_OUT_DIR"); env && *env) return env;
  return "bvflow_out";
}

namespace detail {

inline void echo_config(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out) {
  const std::string text = effective_config(cfg);
  out << "# effective configuration\n" << text << "\n";
  write_text((out_dir / "effective_config.ini").string(), text);
}

inline std::string audit_text(const AuditReport& audit, const DissipationFunction& psi, const Trajectory& traj,
                              double audit_tol) {
  std::string s = "dissipation=" + psi.describe() + "\n";
  s += "steps=" + std::to_string(traj.grid.steps()) + "\n";
  s += format_audit(audit);
  s += "audit_tol=" + fmt(audit_tol) + "\n";
  s += std::string("ed_verdict=") + (audit.max_abs_residual <= audit_tol ? "PASS" : "FAIL") + "\n";
  return s;
}

inline Trajectory integrate(const RunConfig& cfg, const EvolutionSystem& sys, const DissipationFunction& psi,
                            const Vector& u0, const TimeGrid& grid) {
  if (cfg.solver.method == "direct_ode") {
    auto states = run_direct_ode(sys, psi, u0, grid);
    for (std::size_t k = 0; k < states.size(); ++k) {
      if (!states[k].allFinite()) {
        throw StepError("direct ODE state is not finite at step " + std::to_string(k ? k - 1 : 0), k ? k - 1 : 0,
                        {});
      }
    }
    return instrument(sys, psi, grid, std::move(states));
  }
  return run_flow(sys, psi, u0, grid, build_solver(cfg.solver));
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const StepError& e) {
    err << "solver error: " << e.what() << "\n";
    return kSolverError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kSolverError;
  }
}

// Builds the objects a command needs; any failure here is a configuration error.
struct Setup {
  EvolutionSystem system;
  DissipationFunction psi;
  Vector u0;
  TimeGrid grid;
};

inline Setup setup(const RunConfig& cfg) {
  try {
    return Setup{build_system(cfg), build_dissipation(cfg.dissipation), build_initial_state(cfg),
                 build_grid(cfg.grid)};
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace detail

inline int cmd_flow(const GlobalOptions& g, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto s = detail::setup(cfg);
    const auto dir = resolve_out_dir(g, cfg);
    std::filesystem::create_directories(dir);
    detail::echo_config(cfg, dir, out);
    const Trajectory traj = detail::integrate(cfg, s.system, s.psi, s.u0, s.grid);
    AuditReport audit = ed_residual(traj, s.psi);
    attach_velocity_slope(audit, velocity_slope_check(traj, s.psi));
    write_text((dir / "trajectory.csv").string(), trajectory_csv(traj, audit));
    const std::string text = detail::audit_text(audit, s.psi, traj, cfg.solver.audit_tol);
    write_text((dir / "audit.txt").string(), text);
    out << text;
    return static_cast<int>(kOk);
  });
}

/// Audits a sampled curve read from CSV against the configured system and dissipation.
inline int cmd_audit(const GlobalOptions& g, const RunConfig& cfg, const std::string& input, std::ostream& out,
                     std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto s = detail::setup(cfg);
    const auto curve = read_curve_csv(input, s.system.dimension());
    TimeGrid grid;
    try {
      grid = TimeGrid::from_nodes(curve.times);
    } catch (const std::exception& e) {
      throw ConfigError(input + ": " + e.what());
    }
    const auto dir = resolve_out_dir(g, cfg);
    std::filesystem::create_directories(dir);
    detail::echo_config(cfg, dir, out);
    const Trajectory traj = instrument(s.system, s.psi, grid, curve.states);
    AuditReport audit = ed_residual(traj, s.psi);
    attach_velocity_slope(audit, velocity_slope_check(traj, s.psi));
    const double margin = chain_rule_check(s.system, traj.grid.nodes(), traj.states, traj.slopes);
    std::string text = detail::audit_text(audit, s.psi, traj, cfg.solver.audit_tol);
    text += "chain_rule_margin=" + fmt(margin) + "\n";
    write_text((dir / "audit.txt").string(), text);
    out << text;
    return static_cast<int>(kOk);
  });
}

inline int cmd_sweep(const GlobalOptions& g, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (!cfg.family.present) throw ConfigError("sweep needs a [family] section");
    const FamilySpec spec = [&] {
      try {
        return build_family(cfg);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }();
    const auto dir = resolve_out_dir(g, cfg);
    std::filesystem::create_directories(dir);
    detail::echo_config(cfg, dir, out);

    const auto members = run_family(spec);
    bool any_failed = false;
    bool any_ok = false;
    for (const auto& m : members) {
      if (m.trajectory) {
        any_ok = true;
        out << "member h=" << m.h << " " << m.psi.describe() << ": ok\n";
        if (cfg.output.members) {
          const auto audit = ed_residual(*m.trajectory, m.psi);
          write_text((dir / ("member_h" + std::to_string(m.h) + ".csv")).string(),
                     trajectory_csv(*m.trajectory, audit));
        }
      } else {
        any_failed = true;
        err << "member h=" << m.h << " failed: " << m.error << "\n";
      }
    }
    if (!any_ok) return static_cast<int>(kSolverError);
    if (any_failed && g.strict) return static_cast<int>(kSolverError);

    if (members.size() == 1) {
      const auto& m = members.front();
      AuditReport audit = ed_residual(*m.trajectory, m.psi);
      attach_velocity_slope(audit, velocity_slope_check(*m.trajectory, m.psi));
      write_text((dir / "trajectory.csv").string(), trajectory_csv(*m.trajectory, audit));
      write_text((dir / "audit.txt").string(), detail::audit_text(audit, m.psi, *m.trajectory, cfg.solver.audit_tol));
    }

    const auto limit = pointwise_limit(members, spec.system.metric(), build_jump_options(cfg.bv));
    const auto report = assess_family(spec, members, limit, build_bv_options(cfg.bv), cfg.family.excess_offset);
    write_text((dir / "limit_bv.csv").string(), bv_csv(limit.curve));
    write_text((dir / "jumps.csv").string(), jumps_csv(limit.curve, report.jump_tricost, spec.system.dimension()));
    const std::string text = convergence_text(report, spec.limit().describe());
    write_text((dir / "convergence_report.txt").string(), text);
    write_text((dir / "convergence_report.kv").string(), convergence_kv(report));
    out << text;
    return static_cast<int>(kOk);
  });
}

struct JumpcostOptions {
  double t = 0.0;
  std::vector<double> u0;
  std::vector<double> u1;
  std::vector<double> mid;  // empty: bicost
  double L = 1.0;
  int M = 64;
  int starts = 8;
};

inline int cmd_jumpcost(const RunConfig& cfg, const JumpcostOptions& j, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto s = detail::setup(cfg);
    const auto n = static_cast<std::size_t>(s.system.dimension());
    if (j.u0.size() != n || j.u1.size() != n || (!j.mid.empty() && j.mid.size() != n)) {
      throw ConfigError("endpoints must have " + std::to_string(n) + " components");
    }
    if (!(j.L > 0.0)) throw ConfigError("L must be positive");
    if (j.M < 2 || j.starts < 1) throw ConfigError("M must be >= 2 and starts >= 1");
    if (!(j.t >= 0.0 && j.t <= s.system.horizon())) throw ConfigError("t must lie in [0, T]");
    auto vec = [](const std::vector<double>& v) {
      return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    BicostOptions opts;
    opts.nodes = static_cast<std::size_t>(j.M);
    opts.starts = j.starts;
    const BicostResult r = j.mid.empty() ? bicost(s.system, j.t, vec(j.u0), vec(j.u1), j.L, opts)
                                         : tricost(s.system, j.t, vec(j.u0), vec(j.mid), vec(j.u1), j.L, opts);
    out << "value=" << fmt(r.value) << "\n";
    out << "gap=" << fmt(r.gap) << "\n";
    out << "certified=" << (r.certified ? "true" : "false") << "\n";
    return static_cast<int>(kOk);
  });
}

inline int cmd_validate_bv(const GlobalOptions& g, const RunConfig& cfg, const std::string& input,
                           std::ostream& out, std::ostream& err) {
  (void)g;
  return detail::guarded(err, [&] {
    const auto s = detail::setup(cfg);
    const DissipationFunction psi = cfg.family.present ? build_family(cfg).limit() : s.psi;
    const auto curve = read_curve_csv(input, s.system.dimension());
    const BVCurve bv = make_bv_curve(curve.times, curve.states, s.system.metric(), build_jump_options(cfg.bv));
    const BVValidation v = validate_bv(s.system, bv, psi, build_bv_options(cfg.bv));
    out << "dissipation=" << psi.describe() << "\n";
    out << "jumps=" << bv.jumps.size() << "\n";
    for (const auto& j : bv.jumps) out << "jump t=" << fmt(j.t) << "\n";
    out << "stability_checked=" << v.stability.checked << "\n";
    out << "stability_violations=" << v.stability.violating_times.size() << "\n";
    for (double t : v.stability.violating_times) out << "stability_violation t=" << fmt(t) << "\n";
    out << "energy_scale=" << fmt(v.scale) << "\n";
    out << "tolerance=" << fmt(cfg.bv.tol_eb_rel * v.scale) << "\n";
    for (const auto& eb : v.intervals) {
      out << "eb [" << fmt(eb.t1) << ", " << fmt(eb.t2) << "] residual=" << fmt(eb.residual) << "\n";
    }
    out << "verdict=" << bv_verdict(v) << "\n";
    return static_cast<int>(v.passed() ? kOk : kVerdictFail);
  });
}

}  // namespace bvflow::cli
