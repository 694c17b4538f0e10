#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bvflow/audit.hpp"
#include "bvflow/metric.hpp"
#include "bvflow/system.hpp"
#include "oracles.hpp"

using namespace bvflow;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

MetricStructure constant_tensor(double g) {
  return MetricStructure::riemannian([g](const Vector& u) { return Matrix(Matrix::Constant(u.size(), u.size(), g)); });
}

ExampleParams with_load(int n, Polynomial load) {
  ExampleParams p;
  p.dimension = n;
  p.load = std::move(load);
  return p;
}

std::vector<std::pair<std::string, ExampleParams>> example_systems() {
  ExampleParams ac = with_load(6, {{0.0, 1.0}});
  ac.potential = Polynomial::double_well();
  return {{"double_well_1d", with_load(1, {{0.0, 1.5}})},
          {"allen_cahn_fd", ac},
          {"quadratic", with_load(3, {{0.5, 1.0}})},
          {"marginal_demo", ExampleParams{}}};
}

}  // namespace

TEST(Metric, NormExamples) {
  EXPECT_DOUBLE_EQ(MetricStructure::euclidean().norm(vec({0, 0}), vec({3, 4})), 5.0);
  EXPECT_DOUBLE_EQ(MetricStructure::diagonal(vec({4})).norm(vec({0}), vec({2})), 4.0);
  EXPECT_DOUBLE_EQ(constant_tensor(4.0).norm(vec({7.0}), vec({1})), 2.0);
}

TEST(Metric, DualNormExamples) {
  EXPECT_DOUBLE_EQ(MetricStructure::euclidean().dual_norm(vec({1, 1}), vec({0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(constant_tensor(4.0).dual_norm(vec({0}), vec({2})), 1.0);
}

TEST(Metric, DualNormMatchesSupOracle) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix A(3, 3);
    for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = normal(rng);
    const Matrix G = A * A.transpose() + 0.5 * Matrix::Identity(3, 3);
    Vector xi(3);
    for (int i = 0; i < 3; ++i) xi[i] = normal(rng);
    const auto metric = MetricStructure::riemannian([G](const Vector&) { return G; });
    const double exact = metric.dual_norm(Vector::Zero(3), xi);
    const double sampled = oracle::sampled_dual_norm(G, xi, 10000, rng);
    EXPECT_LE(sampled, exact * (1 + 1e-12));
    EXPECT_NEAR(sampled, exact, 1e-3 * exact);
  }
}

TEST(Metric, DistanceExamples) {
  EXPECT_DOUBLE_EQ(MetricStructure::euclidean().distance(vec({0, 0}), vec({3, 4})), 5.0);
  for (const auto& m : {MetricStructure::euclidean(), MetricStructure::diagonal(vec({2.0})), constant_tensor(3.0)}) {
    EXPECT_EQ(m.distance(vec({0.3}), vec({0.3})), 0.0);
  }
  const auto riem = MetricStructure::riemannian([](const Vector& u) {
    const double g = (1 + u[0] * u[0]) * (1 + u[0] * u[0]);
    return Matrix(Matrix::Constant(1, 1, g));
  });
  const double ref = oracle::gauss_legendre([](double s) { return 1 + s * s; }, 0.0, 1.0, 50);
  EXPECT_NEAR(ref, 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(riem.distance(vec({0}), vec({1})), ref, 1e-10);
}

TEST(Metric, Errors) {
  EXPECT_THROW(MetricStructure::diagonal(vec({1.0, -1.0})), MetricError);
  const auto bad = MetricStructure::riemannian([](const Vector&) { return Matrix(Matrix::Constant(1, 1, -1.0)); });
  EXPECT_THROW(bad.norm(vec({0}), vec({1})), MetricError);
  EXPECT_THROW(bad.dual_norm(vec({0}), vec({1})), MetricError);
  EXPECT_THROW(MetricStructure::euclidean().norm(vec({0, 0}), vec({1})), DomainError);
}

TEST(System, SlopeExamples) {
  const auto quad = make_example("quadratic", with_load(2, {{0.0}}));
  EXPECT_DOUBLE_EQ(quad.slope(0.0, vec({3, 4})), 5.0);
  const auto dw = make_example("double_well_1d");
  EXPECT_DOUBLE_EQ(dw.slope(0.0, vec({1.0})), 0.0);
  const auto marg = make_example("marginal_demo");
  EXPECT_DOUBLE_EQ(marg.slope(1.0, vec({0.5})), 1.0);
}

TEST(System, PowerExamples) {
  const auto quad = make_example("quadratic", with_load(1, {{0.0, 1.0}}));
  for (double u : {-2.0, 0.3, 5.0}) {
    const double t = 0.7;
    const double F = quad.slope(t, vec({u}));
    // E = (u - t)^2 / 2 = u^2/2 - t u + t^2/2, so dE/dt = -u + t
    EXPECT_NEAR(quad.power(t, vec({u}), F + 1.0), -u + t, 1e-14);
  }
  const auto marg = make_example("marginal_demo");
  EXPECT_EQ(marg.active_branches(0.0, vec({0.5})).size(), 2u);
  EXPECT_DOUBLE_EQ(marg.power(0.0, vec({0.5}), 1.0), 1.0);
  EXPECT_THROW(marg.power(0.0, vec({2.0}), 1.0), ConstraintError);
  EXPECT_THROW(quad.power(0.0, vec({2.0}), 0.5), ConstraintError);
}

TEST(System, MakeExampleRejectsBadInput) {
  EXPECT_THROW(make_example("no_such_system"), DomainError);
  ExampleParams p;
  p.dimension = 2;
  EXPECT_THROW(make_example("double_well_1d", p), DomainError);
  p.dimension = 3;
  p.load_profile = {1.0, 2.0};
  EXPECT_THROW(make_example("quadratic", p), DomainError);
  EXPECT_THROW(make_example("double_well_1d").energy(0.0, vec({1, 2})), DomainError);
}

TEST(System, GradientAndTimeDerivativeMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1.5, 1.5);
  for (const auto& [name, params] : example_systems()) {
    if (name == "marginal_demo") continue;
    const auto sys = make_example(name, params);
    const int n = sys.dimension();
    for (int trial = 0; trial < 10; ++trial) {
      Vector u(n);
      for (int i = 0; i < n; ++i) u[i] = unif(rng);
      const double t = 0.5 * (unif(rng) + 1.5);
      const Vector g = sys.gradient(t, u);
      const double h = 1e-6;
      for (int i = 0; i < n; ++i) {
        Vector up = u, um = u;
        up[i] += h;
        um[i] -= h;
        const double fd = (sys.energy(t, up) - sys.energy(t, um)) / (2 * h);
        EXPECT_NEAR(g[i], fd, 1e-6 * (1 + std::abs(fd))) << name;
      }
      const double fdt = (sys.energy(t + h, u) - sys.energy(t - h, u)) / (2 * h);
      EXPECT_NEAR(sys.time_derivative(t, u), fdt, 1e-6 * (1 + std::abs(fdt))) << name;
    }
  }
}

TEST(System, AllenCahnUsesMassWeightedMetric) {
  ExampleParams p;
  p.dimension = 4;
  p.length = 2.0;
  const auto sys = make_example("allen_cahn_fd", p);
  EXPECT_EQ(sys.metric().kind(), MetricStructure::Kind::DiagonalWeights);
  EXPECT_DOUBLE_EQ(sys.metric().norm(Vector::Zero(4), Vector::Ones(4)), std::sqrt(4 * 0.5));
  // constant states have no Dirichlet term
  const Vector ones = Vector::Ones(4);
  EXPECT_NEAR(sys.energy(0.0, ones), 0.0, 1e-15);
  EXPECT_NEAR(sys.slope(0.0, ones), 0.0, 1e-15);
}

TEST(System, ChainRuleOnRandomCurves) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (const auto& [name, params] : example_systems()) {
    const auto sys = make_example(name, params);
    const int n = sys.dimension();
    for (int curve = 0; curve < 25; ++curve) {
      Vector a(n), b(n), c(n);
      for (int i = 0; i < n; ++i) {
        a[i] = unif(rng);
        b[i] = unif(rng);
        c[i] = unif(rng);
      }
      const double omega = 1.0 + 3.0 * (unif(rng) + 1.0);
      const int samples = 2001;
      std::vector<double> times(samples);
      std::vector<Vector> states(samples);
      std::vector<double> F(samples);
      for (int k = 0; k < samples; ++k) {
        const double t = sys.horizon() * k / (samples - 1);
        times[k] = t;
        states[k] = a + b * t + c * std::sin(omega * t);
        F[k] = sys.slope(t, states[k]);
      }
      const double margin = chain_rule_check(sys, times, states, F);
      // where branches switch the node power jumps, and the trapezoid weights that node by tau/2
      double slack = 1e-5;
      if (sys.power_mode() == EvolutionSystem::PowerMode::Marginal) {
        double pmax = 0.0;
        for (int k = 0; k < samples; ++k) pmax = std::max(pmax, std::abs(sys.time_derivative(times[k], states[k])));
        slack += pmax * sys.horizon() / (samples - 1);
      }
      EXPECT_GE(margin, -slack) << name << " curve " << curve;
    }
  }
}
