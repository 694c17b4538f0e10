#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bvflow/audit.hpp"
#include "bvflow/bv.hpp"
#include "bvflow/flow.hpp"

using namespace bvflow;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

struct Sampled {
  std::vector<double> times;
  std::vector<Vector> states;
};

template <class Fn>
Sampled sample(Fn u, int n = 101) {
  Sampled s;
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    s.times.push_back(t);
    s.states.push_back(scalar(u(t)));
  }
  return s;
}

BVCurve curve(const Sampled& s) {
  return make_bv_curve(s.times, s.states, MetricStructure::euclidean());
}

EvolutionSystem quadratic() { return make_example("quadratic"); }

}  // namespace

TEST(TotalVariation, Examples) {
  const auto e = MetricStructure::euclidean();
  const auto ramp = sample([](double t) { return t; });
  EXPECT_NEAR(total_variation(ramp.states, e), 1.0, 1e-14);
  const auto flat = sample([](double) { return 0.3; });
  EXPECT_EQ(total_variation(flat.states, e), 0.0);
  const auto step = sample([](double t) { return t < 0.5 ? 0.0 : 1.0; }, 1001);
  EXPECT_EQ(total_variation(step.states, e), 1.0);
}

TEST(DetectJumps, SmoothCurveHasNone) {
  const auto s = sample([](double t) { return std::sin(3 * t); }, 1001);
  EXPECT_TRUE(detect_jumps(s.times, s.states, MetricStructure::euclidean()).empty());
}

TEST(DetectJumps, ExplicitStep) {
  const auto s = sample([](double t) { return t < 0.5 ? 0.0 : 1.0; });
  const auto jumps = detect_jumps(s.times, s.states, MetricStructure::euclidean());
  ASSERT_EQ(jumps.size(), 1u);
  EXPECT_EQ(jumps[0].minus[0], 0.0);
  EXPECT_EQ(jumps[0].plus[0], 1.0);
  EXPECT_NEAR(jumps[0].t, 0.5, 0.011);
}

TEST(DetectJumps, MergesConsecutiveSteps) {
  const auto s = sample([](double t) { return t < 0.5 ? 0.0 : (t < 0.505 ? 0.4 : 1.0); }, 201);
  const auto jumps = detect_jumps(s.times, s.states, MetricStructure::euclidean());
  ASSERT_EQ(jumps.size(), 1u);
  EXPECT_EQ(jumps[0].last_step, jumps[0].first_step + 1);
  EXPECT_EQ(jumps[0].plus[0], 1.0);
  EXPECT_EQ(jumps[0].at[0], 0.4);
}

TEST(Decompose, Examples) {
  const auto step = curve(sample([](double t) { return t < 0.5 ? 0.0 : 1.0; }));
  EXPECT_EQ(step.parts.ac, 0.0);
  EXPECT_EQ(step.parts.cantor, 0.0);
  EXPECT_EQ(step.parts.jump, 1.0);

  const auto ramp = curve(sample([](double t) { return t; }));
  EXPECT_NEAR(ramp.parts.ac, 1.0, 1e-14);
  EXPECT_EQ(ramp.parts.cantor, 0.0);
  EXPECT_EQ(ramp.parts.jump, 0.0);

  // the jump step also carries one ramp increment
  const int n = 1001;
  const auto both = curve(sample([](double t) { return t + (t < 0.5 ? 0.0 : 2.0); }, n));
  EXPECT_NEAR(both.parts.ac, 1.0, 1.0 / (n - 1) + 1e-12);
  EXPECT_NEAR(both.parts.jump, 2.0, 1.0 / (n - 1) + 1e-12);
  EXPECT_NEAR(both.parts.cantor, 0.0, 1e-12);
}

TEST(Decompose, RandomCurvesAddUp) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int c = 0; c < 50; ++c) {
    const double slope = unif(rng);
    std::vector<std::pair<double, double>> steps;
    for (int i = 0; i < 1 + c % 4; ++i) steps.push_back({0.5 * (unif(rng) + 1.0), 3.0 * unif(rng)});
    const auto s = sample(
        [&](double t) {
          double u = slope * t;
          for (auto [at, h] : steps) u += t >= at ? h : 0.0;
          return u;
        },
        501);
    const auto bv = curve(s);
    const auto& p = bv.parts;
    EXPECT_GE(p.ac, 0.0);
    EXPECT_GE(p.cantor, 0.0);
    EXPECT_GE(p.jump, 0.0);
    EXPECT_NEAR(p.ac + p.cantor + p.jump, bv.variation_total, 1e-9) << c;
  }
}

TEST(Stability, Examples) {
  const auto sys = quadratic();
  const auto stuck = curve(sample([](double) { return 2.0; }));
  const auto report = local_stability_check(sys, stuck, 1.0, 0.05);
  EXPECT_EQ(report.violating_times.size(), stuck.times.size());
  EXPECT_NEAR(report.max_excess, 1.0, 1e-15);

  const auto inside = curve(sample([](double t) { return 0.5 * t; }));
  EXPECT_TRUE(local_stability_check(sys, inside, 1.0, 0.05).passed());
}

TEST(Stability, JumpWindowIsExempt) {
  const auto sys = quadratic();
  // the pre-jump sample sits at slope 3 but is part of the jump window
  const auto s = sample([](double t) { return t < 0.5 ? 0.0 : (t < 0.51 ? 3.0 : 0.0); });
  const auto bv = curve(s);
  ASSERT_EQ(bv.jumps.size(), 1u);
  EXPECT_TRUE(local_stability_check(sys, bv, 1.0, 0.05).passed());
}

TEST(EnergyBalance, ConstantCurveAtMinimizer) {
  const auto sys = quadratic();
  const auto bv = curve(sample([](double) { return 0.0; }));
  for (const auto& psi : {DissipationFunction::linear(1.0), DissipationFunction::power(2.0)}) {
    const auto eb = energy_balance_check(sys, bv, psi, {}, 0.0, 1.0);
    EXPECT_EQ(eb.residual, 0.0);
    const auto v = validate_bv(sys, bv, psi);
    EXPECT_TRUE(v.passed());
    EXPECT_EQ(v.max_abs_residual, 0.0);
  }
}

TEST(EnergyBalance, ReducesToAuditWithoutJumps) {
  const auto sys = quadratic();
  const auto psi = DissipationFunction::power(2.0);
  const auto grid = TimeGrid::uniform(1.0, 200);
  const auto traj = run_flow(sys, psi, scalar(1.0), grid);
  const auto audit_traj = instrument(sys, psi, grid, traj.states);
  const auto audit = ed_residual(audit_traj, psi);
  const auto bv = make_bv_curve(grid.nodes(), traj.states, sys.metric());
  ASSERT_TRUE(bv.jumps.empty());
  const auto eb = energy_balance_check(sys, bv, psi, {}, 0.0, 1.0);
  EXPECT_NEAR(eb.residual, audit.residual.back(), 1e-12);
}

TEST(EnergyBalance, AdditiveOverIntervals) {
  ExampleParams p;
  p.load = {{0.0, 2.0}};
  const auto dw = make_example("double_well_1d", p);
  // a stylized rate-independent path: stuck, then a jump across the barrier, then tracking
  const auto s = sample(
      [](double t) {
        if (t < 0.6) return -1.0 + 0.2 * t;
        return 1.2 + 0.3 * (t - 0.6);
      },
      401);
  const auto bv = curve(s);
  ASSERT_EQ(bv.jumps.size(), 1u);
  const auto psi = DissipationFunction::linear(1.0);
  const auto whole = energy_balance_check(dw, bv, psi, {}, 0.0, 1.0);
  for (double mid : {0.25, 0.8}) {
    const auto left = energy_balance_check(dw, bv, psi, {}, 0.0, mid);
    const auto right = energy_balance_check(dw, bv, psi, {}, mid, 1.0);
    EXPECT_NEAR(left.residual + right.residual, whole.residual, 1e-9);
  }
  EXPECT_GT(whole.jumps, 0.0);
}

TEST(EnergyBalance, SnapsOutOfJumpInterior) {
  const auto s = sample([](double t) { return t < 0.5 ? 0.0 : (t < 0.505 ? 0.4 : 1.0); }, 201);
  const auto bv = curve(s);
  ASSERT_EQ(bv.jumps.size(), 1u);
  const auto& j = bv.jumps[0];
  const double inside = bv.times[j.first_node() + 1];
  EXPECT_EQ(snap_node(bv, inside, false), j.first_node());
  EXPECT_EQ(snap_node(bv, inside, true), j.last_node());
}

TEST(EnergyBalance, RejectsInfeasibleForce) {
  const auto sys = quadratic();
  const auto bv = curve(sample([](double t) { return 1.0 + t; }, 11));
  std::vector<double> low(11, 0.0);
  EXPECT_THROW(energy_balance_check(sys, bv, DissipationFunction::power(2.0), low, 0.0, 1.0), ConstraintError);
}
