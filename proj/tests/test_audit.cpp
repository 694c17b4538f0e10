#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bvflow/audit.hpp"
#include "bvflow/flow.hpp"

using namespace bvflow;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

EvolutionSystem quadratic(int n = 1) {
  ExampleParams p;
  p.dimension = n;
  return make_example("quadratic", p);
}

Trajectory closed_form_quadratic(std::size_t N) {
  const auto grid = TimeGrid::uniform(1.0, N);
  std::vector<Vector> states;
  const double tau = 1.0 / static_cast<double>(N);
  for (std::size_t k = 0; k <= N; ++k) states.push_back(scalar(std::pow(1.0 + tau, -static_cast<double>(k))));
  return instrument(quadratic(), DissipationFunction::power(2.0), grid, std::move(states));
}

}  // namespace

TEST(EdResidual, ConstantAtCriticalPoint) {
  const auto sys = quadratic(2);
  const auto psi = DissipationFunction::power(2.0);
  const auto grid = TimeGrid::uniform(1.0, 10);
  const auto traj = instrument(sys, psi, grid, std::vector<Vector>(11, Vector::Zero(2)));
  const auto audit = ed_residual(traj, psi);
  for (double r : audit.residual) EXPECT_EQ(r, 0.0);
}

TEST(EdResidual, ClosedFormFlowIsFirstOrder) {
  const auto psi = DissipationFunction::power(2.0);
  double prev = 0.0;
  for (std::size_t N : {50u, 100u, 200u, 400u}) {
    const double r = ed_residual(closed_form_quadratic(N), psi).max_abs_residual;
    EXPECT_LE(r, 1.0 / static_cast<double>(N));
    if (prev > 0.0) {
      EXPECT_GE(prev / r, 1.5);
    }
    prev = r;
  }
}

TEST(EdResidual, ConstantCurveAwayFromCriticalPoint) {
  const auto sys = quadratic();
  const auto psi = DissipationFunction::power(2.0);
  const auto grid = TimeGrid::uniform(1.0, 8);
  const auto traj = instrument(sys, psi, grid, std::vector<Vector>(9, scalar(2.0)));
  const auto audit = ed_residual(traj, psi);
  // only the conjugate term accumulates: tau * F^2 / 2 per step with F = 2
  for (std::size_t k = 0; k < audit.residual.size(); ++k) {
    EXPECT_NEAR(audit.residual[k], 2.0 * grid[k], 1e-14);
    if (k > 0) {
      EXPECT_GT(audit.residual[k], audit.residual[k - 1]);
    }
  }
}

TEST(EdResidual, InfiniteConjugateIsReported) {
  const auto sys = quadratic();
  const auto psi = DissipationFunction::linear(1.0);
  const auto grid = TimeGrid::uniform(1.0, 4);
  std::vector<Vector> states;
  for (int k = 0; k < 5; ++k) states.push_back(scalar(3.0 - 0.1 * k));
  const auto traj = instrument(sys, psi, grid, std::move(states));
  const auto audit = ed_residual(traj, psi);
  EXPECT_EQ(audit.infinite_conjugate.size(), 5u);
  for (double r : audit.residual) EXPECT_TRUE(std::isfinite(r));
}

TEST(EdResidual, NonnegativeOnArbitraryCurves) {
  ExampleParams p;
  p.load = {{0.0, 1.0}};
  const auto dw = make_example("double_well_1d", p);
  const auto psi = DissipationFunction::power(2.0);
  const auto grid = TimeGrid::uniform(1.0, 4000);
  for (int c = 0; c < 10; ++c) {
    std::vector<Vector> states;
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
      const double t = grid[k];
      states.push_back(scalar(-1.0 + 0.3 * c * t + 0.2 * std::sin((c + 1) * 3.0 * t)));
    }
    const auto audit = ed_residual(instrument(dw, psi, grid, std::move(states)), psi);
    EXPECT_GE(audit.min_residual, -1e-6) << "curve " << c;
  }
}

TEST(VelocitySlope, QuadraticFlow) {
  const auto psi = DissipationFunction::power(2.0);
  const auto traj = run_flow(quadratic(), psi, scalar(1.0), TimeGrid::uniform(1.0, 100));
  const auto vs = velocity_slope_check(traj, psi);
  EXPECT_EQ(vs.violations, 0u);
  EXPECT_EQ(vs.checked, 100u);
  for (std::size_t k = 0; k < 100; ++k) EXPECT_NEAR(traj.chosen_F[k + 1], traj.speeds[k], 1e-9);
}

TEST(VelocitySlope, StickingPhasePasses) {
  const auto sys = quadratic();
  const auto psi = DissipationFunction::linear(1.0);
  const auto traj = instrument(sys, psi, TimeGrid::uniform(1.0, 5), std::vector<Vector>(6, scalar(0.7)));
  EXPECT_EQ(velocity_slope_check(traj, psi).violations, 0u);
}

TEST(VelocitySlope, AdversarialViolation) {
  const auto sys = quadratic();
  const auto psi = DissipationFunction::power(2.0);
  Trajectory traj = instrument(sys, psi, TimeGrid::uniform(1.0, 1), {scalar(0.0), scalar(1.0)});
  ASSERT_DOUBLE_EQ(traj.speeds[0], 1.0);
  traj.chosen_F[1] = 0.0;
  const auto vs = velocity_slope_check(traj, psi);
  EXPECT_EQ(vs.violations, 1u);
  EXPECT_DOUBLE_EQ(vs.max_gap, 1.0);
}

TEST(ChainRule, Examples) {
  const auto sys = quadratic();
  std::vector<double> times{0.0, 0.5, 1.0};
  std::vector<Vector> constant(3, scalar(0.4));
  std::vector<double> F(3, sys.slope(0.0, scalar(0.4)));
  EXPECT_NEAR(chain_rule_check(sys, times, constant, F), 0.0, 1e-15);

  const std::size_t n = 1000;
  std::vector<double> ts(n);
  std::vector<Vector> seg(n);
  std::vector<double> slope(n), above(n);
  for (std::size_t k = 0; k < n; ++k) {
    ts[k] = static_cast<double>(k) / (n - 1);
    seg[k] = scalar(-1.0 + 3.0 * ts[k]);
    slope[k] = sys.slope(ts[k], seg[k]);
    above[k] = slope[k] + 1.0;
  }
  const double m0 = chain_rule_check(sys, ts, seg, slope);
  EXPECT_GE(m0, -1e-6);
  EXPECT_GT(chain_rule_check(sys, ts, seg, above), m0);

  std::vector<double> below(n, 0.0);
  EXPECT_THROW(chain_rule_check(sys, ts, seg, below), ConstraintError);
}

TEST(Audit, DiscreteDissipationBound) {
  ExampleParams p;
  p.load = {{0.0, 2.0}};
  const auto dw = make_example("double_well_1d", p);
  const auto psi = DissipationFunction::power(1.5);
  const auto traj = run_flow(dw, psi, scalar(-1.0), TimeGrid::uniform(1.0, 1000));
  double dissipated = 0.0, work = 0.0;
  for (std::size_t k = 0; k < traj.grid.steps(); ++k) {
    const double tau = traj.grid.step(k);
    dissipated += tau * (psi.eval(traj.speeds[k]) + psi.conjugate(traj.chosen_F[k + 1]));
    work += tau * traj.powers[k + 1];
  }
  const auto audit = ed_residual(traj, psi);
  EXPECT_LE(dissipated, traj.energies.front() - traj.energies.back() + work + 1e-2);
  EXPECT_LE(audit.max_abs_residual, 1e-2);
  EXPECT_EQ(audit.quadrature, "trapezoid");
}
