#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bvflow/cli.hpp"

namespace {

bvflow::RunConfig read_config(const std::string& path) {
  if (path.empty()) return bvflow::parse_config("");
  return bvflow::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace bvflow::cli;
  CLI::App app{"bvflow: metric gradient flows, vanishing-viscosity sweeps and BV solution checks"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "run configuration file");
  app.add_option("--out", g.out, "output directory (default: [output] dir, then $BVFLOW_OUT_DIR)");
  app.add_flag("--strict", g.strict, "treat any failed family member as a solver error");

  auto* flow = app.add_subcommand("flow", "integrate one flow and audit it");
  auto* sweep = app.add_subcommand("sweep", "run a dissipation family and analyse its limit");
  auto* audit = app.add_subcommand("audit", "audit a sampled curve against the configured system");
  std::string audit_input;
  audit->add_option("--input", audit_input, "CSV with columns t,u_0,...")->required();
  auto* jump = app.add_subcommand("jumpcost", "conformal transition cost between two states");
  JumpcostOptions jc;
  jump->add_option("--t", jc.t, "frozen time");
  jump->add_option("--u0", jc.u0, "start state")->delimiter(',')->required();
  jump->add_option("--u1", jc.u1, "end state")->delimiter(',')->required();
  jump->add_option("--mid", jc.mid, "intermediate state (tricost)")->delimiter(',');
  jump->add_option("--L", jc.L, "growth coefficient");
  jump->add_option("--M", jc.M, "path segments");
  jump->add_option("--starts", jc.starts, "optimizer starts");
  auto* validate = app.add_subcommand("validate-bv", "check a sampled BV curve for local stability and energy balance");
  std::string bv_path;
  validate->add_option("bv", bv_path, "BV samples CSV (t,u_0,...)")->required();
  for (auto* sub : {flow, sweep, audit, jump, validate}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  bvflow::RunConfig cfg;
  try {
    cfg = read_config(g.config);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  if ((*flow || *sweep || *audit || *validate) && g.config.empty()) {
    std::cerr << "config error: --config is required for this command\n";
    return kConfigError;
  }

  if (*flow) return cmd_flow(g, cfg, std::cout, std::cerr);
  if (*sweep) return cmd_sweep(g, cfg, std::cout, std::cerr);
  if (*audit) return cmd_audit(g, cfg, audit_input, std::cout, std::cerr);
  if (*jump) return cmd_jumpcost(cfg, jc, std::cout, std::cerr);
  return cmd_validate_bv(g, cfg, bv_path, std::cout, std::cerr);
}
