#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bvflow/transition.hpp"
#include "oracles.hpp"

using namespace bvflow;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

EvolutionSystem double_well(double load_slope) {
  ExampleParams p;
  p.load = {{0.0, load_slope}};
  return make_example("double_well_1d", p);
}

EvolutionSystem quadratic(int n) {
  ExampleParams p;
  p.dimension = n;
  return make_example("quadratic", p);
}

// int max(|W'(x) - l|, L) dx over [a, b] for the quartic double well.
double double_well_oracle(double l, double L, double a, double b) {
  if (a > b) std::swap(a, b);
  return oracle::gauss_legendre([&](double x) { return std::max(std::abs(x * x * x - x - l), L); }, a, b, 4000);
}

}  // namespace

TEST(ConformalLength, Examples) {
  const auto sys = quadratic(1);
  // slope |u| <= 2 on [0, 1.5]: constant factor L = 2 along 0 -> 1.5
  TransitionPath flat{0.0, {scalar(0.0), scalar(0.5), scalar(1.5)}};
  EXPECT_NEAR(conformal_length(sys, 0.0, flat, 2.0), 3.0, 1e-15);
  TransitionPath degenerate{0.0, {scalar(0.3), scalar(0.3)}};
  EXPECT_EQ(conformal_length(sys, 0.0, degenerate, 1.0), 0.0);

  const auto dw = make_example("double_well_1d");
  TransitionPath path{0.0, {}};
  const int M = 1000;
  for (int j = 0; j <= M; ++j) path.nodes.push_back(scalar(-1.0 + 2.0 * j / M));
  EXPECT_NEAR(conformal_length(dw, 0.0, path, 1.0), 2.0, 1e-4);
  EXPECT_NEAR(double_well_oracle(0.0, 1.0, -1.0, 1.0), 2.0, 1e-12);
}

TEST(Bicost, ZeroAndConstantFactor) {
  const auto sys = quadratic(2);
  Vector a(2), b(2);
  a << 0.1, -0.2;
  b << -0.3, 0.4;
  EXPECT_EQ(bicost(sys, 0.0, a, a, 1.0).value, 0.0);
  // slope <= 0.5 on the segment, L = 1: factor is constant
  EXPECT_NEAR(bicost(sys, 0.0, a, b, 1.0).value, (b - a).norm(), 1e-6);
  EXPECT_THROW(bicost(sys, 0.0, a, b, 0.0), DomainError);
}

TEST(Bicost, DoubleWellMatchesQuadrature) {
  const auto dw = make_example("double_well_1d");
  EXPECT_NEAR(bicost(dw, 0.0, scalar(-1.0), scalar(1.0), 1.0).value, 2.0, 1e-9);

  // load at the fold: l* = 2 / (3 sqrt 3), the left well edge at -1/sqrt 3 vanishes
  const double fold = 2.0 / (3.0 * std::sqrt(3.0));
  const auto at_fold = double_well(fold);
  const double u0 = -1.0 / std::sqrt(3.0);
  const double u1 = 1.1547005383792517;  // other root of W' = l*
  for (double L : {0.1, 0.5, 1.0}) {
    const double expected = double_well_oracle(fold, L, u0, u1);
    EXPECT_NEAR(bicost(at_fold, 1.0, scalar(u0), scalar(u1), L).value, expected, 1e-8);
  }
}

TEST(Bicost, PathOptimizerAgreesWithSegmentQuadrature) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-1.5, 1.5);
  std::uniform_real_distribution<double> cap(0.05, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const double l = 0.3 * unif(rng);
    const auto sys = double_well(l);
    const double a = unif(rng), b = unif(rng), L = cap(rng);
    const auto opt = optimize_path(sys, 1.0, scalar(a), scalar(b), L);
    EXPECT_NEAR(opt.value, double_well_oracle(l, L, a, b), 1e-6) << trial;
  }
}

TEST(Bicost, LowerBoundAndTriangleInequality) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(-1.5, 1.5);
  const auto dw = double_well(0.4);
  for (int trial = 0; trial < 30; ++trial) {
    const Vector a = scalar(unif(rng)), b = scalar(unif(rng)), c = scalar(unif(rng));
    const double L = 0.5;
    const double ab = bicost(dw, 1.0, a, b, L).value;
    const double bc = bicost(dw, 1.0, b, c, L).value;
    const double ac = bicost(dw, 1.0, a, c, L).value;
    EXPECT_GE(ab, L * dw.metric().distance(a, b) - 1e-12);
    EXPECT_LE(ac, ab + bc + 1e-9);
    EXPECT_NEAR(ab, bicost(dw, 1.0, b, a, L).value, 1e-9);
  }
}

TEST(Bicost, TwoDimensionalOptimizerFindsStraightSegment) {
  const auto sys = quadratic(2);
  Vector a(2), b(2);
  a << 2.0, 0.0;
  b << 0.0, 2.0;
  // the factor is max(|u|, L); the straight chord is not the unique candidate here
  BicostOptions opts;
  opts.nodes = 32;
  const auto r = bicost(sys, 0.0, a, b, 0.5, opts);
  TransitionPath chord{0.0, {a, b}};
  const double straight = polygon_cost(sys, 0.0, chord, 0.5);
  EXPECT_LE(r.value, straight + 1e-9);
  EXPECT_GE(r.value, 0.5 * (b - a).norm());
  EXPECT_GT(r.path.nodes.size(), 2u);
}

TEST(Tricost, Examples) {
  const auto sys = quadratic(2);
  Vector a(2), m(2), b(2);
  a << 0.0, 0.0;
  m << 0.1, 0.1;
  b << 0.2, 0.2;
  EXPECT_EQ(tricost(sys, 0.0, a, a, a, 1.0).value, 0.0);
  EXPECT_NEAR(tricost(sys, 0.0, a, m, b, 1.0).value, (b - a).norm(), 1e-6);
  Vector off(2);
  off << 0.2, -0.1;
  EXPECT_GT(tricost(sys, 0.0, a, off, b, 1.0).value, bicost(sys, 0.0, a, b, 1.0).value + 1e-3);
}

TEST(JumpTotal, NoJumpsIsZero) {
  const auto dw = make_example("double_well_1d");
  std::vector<JumpRecord> none;
  EXPECT_EQ(jump_total(dw, none, 1.0, 0, 10), 0.0);
  JumpRecord j;
  j.t = 0.5;
  j.first_step = 4;
  j.last_step = 5;
  j.minus = scalar(-1.0);
  j.at = scalar(-1.0);
  j.plus = scalar(1.0);
  std::vector<JumpRecord> one{j};
  EXPECT_NEAR(jump_total(dw, one, 1.0, 0, 10), 2.0, 1e-9);
  EXPECT_EQ(jump_total(dw, one, 1.0, 5, 10), 0.0);
}
