#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ltsim/finite_system.hpp"

using namespace ltsim;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

SystemConfig config(InteractionNetwork net, std::vector<double> xi, TimeGrid grid) {
  SystemConfig c(std::move(net), std::move(xi), grid);
  c.record_positions = true;
  c.record_reflections = true;
  return c;
}

}  // namespace

TEST(LeastFixedPoint, TwoByTwoClosedForm) {
  const auto net = InteractionNetwork::dense(mat2(0, 0.5, 0.5, 0), CovarianceSpec::identity(2));
  const std::vector<double> y{-0.1, -0.1};
  const auto dl = least_fixed_point(net, y, 1e-14, 1000);
  ASSERT_TRUE(dl.has_value());
  EXPECT_NEAR((*dl)[0], 0.2, 1e-12);
  EXPECT_NEAR((*dl)[1], 0.2, 1e-12);
}

TEST(LeastFixedPoint, DivergesWhenCritical) {
  const auto net = InteractionNetwork::dense(mat2(0, 1, 1, 0), CovarianceSpec::identity(2));
  const std::vector<double> y{-0.1, -0.1};
  EXPECT_FALSE(least_fixed_point(net, y, 1e-12, 120).has_value());
}

TEST(LeastFixedPoint, UniformMatchesDense) {
  std::mt19937_64 eng(5);
  std::normal_distribution<double> n01;
  const auto uni = InteractionNetwork::uniform(0.8, 7);
  const auto den = InteractionNetwork::dense(uni.weights(), CovarianceSpec::identity(7));
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> y(7);
    for (auto& v : y) v = n01(eng);
    const auto a = least_fixed_point(uni, y, 1e-14, 1000);
    const auto b = least_fixed_point(den, y, 1e-14, 1000);
    ASSERT_TRUE(a && b);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR((*a)[i], (*b)[i], 1e-11);
    // Fixed-point residual.
    for (std::size_t i = 0; i < 7; ++i) {
      double s = y[i];
      for (std::size_t j = 0; j < 7; ++j) s -= 0.8 / 7.0 * (*a)[j];
      EXPECT_NEAR((*a)[i], std::max(-s, 0.0), 1e-11);
    }
  }
}

TEST(LeastFixedPoint, IteratesAreMonotone) {
  std::mt19937_64 eng(6);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd q(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) q(i, j) = u(eng);
  const auto net = InteractionNetwork::dense(q, CovarianceSpec::identity(6));
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> y(6);
    for (auto& v : y) v = n01(eng);
    StepDiagnostics d;
    ASSERT_TRUE(least_fixed_point(net, y, 1e-14, 1000, &d).has_value());
    EXPECT_EQ(d.monotonicity_defect, 0.0);
  }
}

TEST(Step, DecoupledSystemMatchesSkorokhodIncrement) {
  const auto g = TimeGrid::until(1.0, 0.01);
  auto cfg = config(InteractionNetwork::dense(Eigen::MatrixXd::Zero(3, 3), CovarianceSpec::identity(3)),
                    {0.0, 0.05, 1.0}, g);
  const auto noise = sample_noise(g, CovarianceSpec::identity(3), 8);
  SystemState s = initial_state(cfg);
  for (std::size_t k = 0; k < g.n_steps(); ++k) {
    const auto row = noise.row(k);
    std::vector<double> expect(3);
    for (std::size_t i = 0; i < 3; ++i) {
      const double dz[1] = {row[i]};
      expect[i] = skorokhod_increment(s.X[i], dz).x_t;
    }
    auto r = step(s, row, cfg);
    ASSERT_TRUE(std::holds_alternative<SystemState>(r));
    s = std::get<SystemState>(r);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s.X[i], expect[i]);
  }
}

TEST(Simulate, DecoupledTrajectoryMatchesSkorokhodMap) {
  const auto g = TimeGrid::until(2.0, 0.01);
  const auto cfg = config(InteractionNetwork::dense(Eigen::MatrixXd::Zero(2, 2), CovarianceSpec::identity(2)),
                          {0.5, 0.0}, g);
  const auto noise = sample_noise(g, CovarianceSpec::identity(2), 12);
  const auto tr = simulate(cfg, noise);
  EXPECT_FALSE(tr.breakdown.occurred);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto w = noise.path(i);
    std::vector<double> z(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) z[k] = cfg.initial[i] + w[k];
    const auto ref = skorokhod_map(z);
    for (std::size_t k = 0; k < z.size(); ++k) {
      EXPECT_NEAR(tr.X[k * 2 + i], ref.x[k], 1e-12);
      EXPECT_NEAR(tr.L[k * 2 + i], ref.l[k], 1e-12);
    }
  }
}

TEST(Simulate, AnticorrelatedPairConservesSum) {
  const auto g = TimeGrid::until(20.0, 1e-3);
  const auto cfg = config(InteractionNetwork::dense(mat2(0, 1, 1, 0), CovarianceSpec::dense(mat2(1, -1, -1, 1))),
                          {1.0, 1.0}, g);
  const auto noise = sample_noise(g, CovarianceSpec::dense(mat2(1, -1, -1, 1)), 2);
  const auto tr = simulate(cfg, noise);
  EXPECT_FALSE(tr.breakdown.occurred);
  for (std::size_t k = 0; k < tr.steps_recorded(); ++k) EXPECT_NEAR(tr.X[2 * k] + tr.X[2 * k + 1], 2.0, 1e-8);
}

TEST(Simulate, NoiselessLoopHasNoReflection) {
  const auto g = TimeGrid::until(1.0, 0.01);
  const auto a = CovarianceSpec::dense(Eigen::MatrixXd::Zero(2, 2));
  const auto cfg = config(InteractionNetwork::dense(mat2(0, 1, 1, 0), a), {0.0, 0.0}, g);
  const auto noise = sample_noise(g, a, 1);
  const auto tr = simulate(cfg, noise);
  EXPECT_FALSE(tr.breakdown.occurred);
  for (double l : tr.L) EXPECT_EQ(l, 0.0);
}

TEST(Simulate, CriticalSymmetricSumIsConserved) {
  const std::size_t n = 20;
  const auto g = TimeGrid::until(5.0, 1e-3);
  const auto net = InteractionNetwork::dense(Eigen::MatrixXd::Constant(n, n, 1.0 / n), CovarianceSpec::identity(n));
  const auto cfg = config(net, std::vector<double>(n, 1.0), g);
  const auto noise = sample_noise(g, CovarianceSpec::identity(n), 31);
  const auto tr = simulate(cfg, noise);
  std::vector<double> wsum(g.n_steps() + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = noise.path(i);
    for (std::size_t k = 0; k < w.size(); ++k) wsum[k] += w[k];
  }
  for (std::size_t k = 0; k < tr.steps_recorded(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += tr.X[k * n + i];
    EXPECT_NEAR(s, static_cast<double>(n) + wsum[k], 1e-6);
  }
}

TEST(Simulate, SupercriticalTriggersAtHalfZeroCount) {
  const std::size_t n = 100;
  const auto g = TimeGrid::until(5.0, 1e-3);
  std::mt19937_64 eng(4);
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> xi(n);
  for (auto& v : xi) v = ex(eng);
  const auto uni = config(InteractionNetwork::uniform(2.0, n), xi, g);
  const auto den = config(InteractionNetwork::dense(Eigen::MatrixXd::Constant(n, n, 2.0 / n), CovarianceSpec::identity(n)),
                          xi, g);
  const auto noise = sample_noise(g, CovarianceSpec::identity(n), 17);
  const auto a = simulate(uni, noise);
  const auto b = simulate(den, noise);
  ASSERT_TRUE(a.breakdown.occurred);
  ASSERT_TRUE(b.breakdown.occurred);
  EXPECT_EQ(a.breakdown.tau, b.breakdown.tau);
  EXPECT_GE(a.breakdown.zero_set_at_tau.size(), 50u);
  EXPECT_EQ(a.breakdown.zero_set_at_tau, b.breakdown.zero_set_at_tau);
  EXPECT_EQ(a.breakdown.trigger, BreakdownTrigger::ZeroCount);
  EXPECT_EQ(b.breakdown.trigger, BreakdownTrigger::SpectralRadius);
  // Before tau the zero count stays below N/alpha.
  for (std::size_t k = 0; k + 1 < a.steps_recorded(); ++k) EXPECT_LT(a.zero_count[k], 50u);
}

TEST(Simulate, SpectralTriggerRecomputesIndependently) {
  const std::size_t n = 12;
  const auto g = TimeGrid::until(5.0, 1e-3);
  std::mt19937_64 eng(8);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  Eigen::MatrixXd q(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = u(eng);
  const auto net = InteractionNetwork::dense(q, CovarianceSpec::identity(n));
  const auto cfg = config(net, std::vector<double>(n, 0.5), g);
  const auto noise = sample_noise(g, CovarianceSpec::identity(n), 3);
  const auto tr = simulate(cfg, noise);
  if (tr.breakdown.occurred && tr.breakdown.trigger == BreakdownTrigger::SpectralRadius) {
    const auto act = active_nodes(tr.breakdown.zero_set_at_tau, net);
    EXPECT_GE(spectral_radius(net, act).rho, 1.0 - 1e-9);
  }
  for (double x : tr.X) EXPECT_GE(x, -1e-10);
}

TEST(Simulate, InitialBreakdownAtTimeZero) {
  const auto g = TimeGrid::until(1.0, 0.01);
  const auto cfg = config(InteractionNetwork::uniform(2.0, 4), {0.0, 0.0, 1.0, 1.0}, g);
  const auto noise = sample_noise(g, CovarianceSpec::identity(4), 1);
  const auto tr = simulate(cfg, noise);
  ASSERT_TRUE(tr.breakdown.occurred);
  EXPECT_EQ(tr.breakdown.tau, 0.0);
}

TEST(Simulate, IdentityQBreaksAtFirstBoundaryHit) {
  const auto g = TimeGrid::until(10.0, 1e-3);
  const auto a = CovarianceSpec::identity(2);
  const auto cfg = config(InteractionNetwork::dense(Eigen::MatrixXd::Identity(2, 2), a), {0.5, 0.5}, g);
  const auto noise = sample_noise(g, a, 10);
  const auto tr = simulate(cfg, noise);
  ASSERT_TRUE(tr.breakdown.occurred);
  // Oracle: X^i = xi_i + W^i, breakdown at the first grid time where some X^i <= eps0.
  const double eps0 = std::sqrt(g.dt());
  double first = 1e300;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto w = noise.path(i);
    for (std::size_t k = 0; k < w.size(); ++k)
      if (0.5 + w[k] <= eps0) {
        first = std::min(first, g.time(k));
        break;
      }
  }
  EXPECT_NEAR(tr.breakdown.tau, first, 2 * g.dt());
}

TEST(Simulate, DimensionMismatch) {
  const auto g = TimeGrid::until(1.0, 0.01);
  const auto cfg = config(InteractionNetwork::uniform(0.5, 3), {1.0, 1.0, 1.0}, g);
  const auto noise = sample_noise(g, CovarianceSpec::identity(2), 1);
  EXPECT_THROW(simulate(cfg, noise), Error);
}

TEST(Compare, IdenticalConfigsHaveNoViolation) {
  const auto g = TimeGrid::until(2.0, 1e-3);
  const auto cfg = config(InteractionNetwork::uniform(0.7, 5), {0.1, 0.2, 0.3, 0.4, 0.5}, g);
  NoiseStream noise(g, CovarianceSpec::identity(5), 4);
  const auto rep = coupled_compare(cfg, cfg, noise);
  EXPECT_EQ(rep.max_position_violation, 0.0);
  EXPECT_EQ(rep.max_increment_violation, 0.0);
}

TEST(Compare, OrderedInitialConditions) {
  const auto g = TimeGrid::until(2.0, 1e-3);
  const auto c1 = config(InteractionNetwork::uniform(0.7, 4), {0.0, 0.2, 0.4, 0.1}, g);
  const auto c2 = config(InteractionNetwork::uniform(0.7, 4), {1.0, 1.2, 1.4, 1.1}, g);
  NoiseStream noise(g, CovarianceSpec::identity(4), 5);
  const auto rep = coupled_compare(c1, c2, noise);
  EXPECT_LE(rep.max_position_violation, 1e-11);
}

TEST(Compare, LargerWeightsReflectMore) {
  const auto g = TimeGrid::until(2.0, 1e-3);
  Eigen::MatrixXd q2 = Eigen::MatrixXd::Constant(3, 3, 0.1);
  Eigen::MatrixXd q1 = q2.array() + 0.1;
  const auto c1 = config(InteractionNetwork::dense(q1, CovarianceSpec::identity(3)), {0.2, 0.2, 0.2}, g);
  const auto c2 = config(InteractionNetwork::dense(q2, CovarianceSpec::identity(3)), {0.2, 0.2, 0.2}, g);
  NoiseStream noise(g, CovarianceSpec::identity(3), 6);
  const auto rep = coupled_compare(c1, c2, noise);
  EXPECT_LE(rep.max_position_violation, 1e-11);
  EXPECT_LE(rep.max_increment_violation, 1e-11);
}

TEST(Compare, RejectsUnorderedInputs) {
  const auto g = TimeGrid::until(1.0, 0.01);
  const auto c1 = config(InteractionNetwork::uniform(0.5, 2), {1.0, 0.0}, g);
  const auto c2 = config(InteractionNetwork::uniform(0.5, 2), {0.0, 1.0}, g);
  NoiseStream noise(g, CovarianceSpec::identity(2), 1);
  try {
    coupled_compare(c1, c2, noise);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PreconditionViolated);
  }
}

TEST(Bridge, DecoupledReflectionIsExactInLaw) {
  // E L_1 of reflected Brownian motion from 0 is E max_s (-W_s) = sqrt(2/pi), even at a coarse step.
  const std::size_t n = 40000;
  const auto g = TimeGrid::until(1.0, 0.25);
  SystemConfig cfg(InteractionNetwork::uniform(0.0, n), std::vector<double>(n, 0.0), g);
  cfg.monitoring = BoundaryMonitoring::Bridge;
  cfg.bridge_seed = 5;
  cfg.zero_threshold = 0.0;
  NoiseStream noise(g, CovarianceSpec::identity(n), 5);
  const auto tr = simulate(cfg, noise);
  const double expect = std::sqrt(2.0 / std::numbers::pi);
  // sd of L_1 is sqrt(1 - 2/pi).
  EXPECT_NEAR(tr.mean_L.back(), expect, 4.0 * std::sqrt(1.0 - 2.0 / std::numbers::pi) / std::sqrt(double(n)));
  SystemConfig grid_cfg = cfg;
  grid_cfg.monitoring = BoundaryMonitoring::Grid;
  NoiseStream noise2(g, CovarianceSpec::identity(n), 5);
  EXPECT_LT(simulate(grid_cfg, noise2).mean_L.back(), expect - 0.1);
}

TEST(Bridge, StepMatchesFormulaWhenDecoupled) {
  const auto g = TimeGrid::until(0.5, 0.05);
  auto cfg = config(InteractionNetwork::dense(Eigen::MatrixXd::Zero(3, 3), CovarianceSpec::identity(3)),
                    {0.0, 0.1, 2.0}, g);
  cfg.monitoring = BoundaryMonitoring::Bridge;
  cfg.bridge_seed = 77;
  const auto noise = sample_noise(g, CovarianceSpec::identity(3), 7);
  SystemState s = initial_state(cfg);
  for (std::size_t k = 0; k < g.n_steps(); ++k) {
    std::vector<double> e(3);
    bridge_variates(77, k, e);
    std::vector<double> expect(3);
    for (std::size_t i = 0; i < 3; ++i) {
      const double y = s.X[i] + noise.row(k)[i];
      const double lo = bridge_minimum(s.X[i], y, g.dt(), e[i]);
      expect[i] = y + std::max(-lo, 0.0);
    }
    auto r = step(s, noise.row(k), cfg);
    ASSERT_TRUE(std::holds_alternative<SystemState>(r));
    s = std::get<SystemState>(r);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.X[i], expect[i], 1e-15);
  }
}

TEST(Bridge, UniformMatchesDense) {
  const std::size_t n = 30;
  const auto g = TimeGrid::until(1.0, 1e-2);
  std::vector<double> xi(n);
  for (std::size_t i = 0; i < n; ++i) xi[i] = 0.05 * static_cast<double>(i % 7);
  auto a = config(InteractionNetwork::uniform(0.8, n), xi, g);
  auto b = config(InteractionNetwork::dense(Eigen::MatrixXd::Constant(n, n, 0.8 / n), CovarianceSpec::identity(n)), xi, g);
  a.monitoring = b.monitoring = BoundaryMonitoring::Bridge;
  a.bridge_seed = b.bridge_seed = 3;
  a.fp_tolerance = b.fp_tolerance = 1e-14;
  const auto noise = sample_noise(g, CovarianceSpec::identity(n), 3);
  const auto ta = simulate(a, noise);
  const auto tb = simulate(b, noise);
  ASSERT_EQ(ta.X.size(), tb.X.size());
  for (std::size_t k = 0; k < ta.X.size(); ++k) EXPECT_NEAR(ta.X[k], tb.X[k], 1e-9);
}

TEST(Bridge, ComparisonStillHolds) {
  const auto g = TimeGrid::until(2.0, 1e-2);
  auto c1 = config(InteractionNetwork::uniform(0.9, 6), {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}, g);
  auto c2 = config(InteractionNetwork::uniform(0.5, 6), {0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, g);
  c1.monitoring = c2.monitoring = BoundaryMonitoring::Bridge;
  NoiseStream noise(g, CovarianceSpec::identity(6), 2);
  const auto rep = coupled_compare(c1, c2, noise);
  EXPECT_LE(rep.max_position_violation, 1e-11);
}

TEST(Bridge, RejectsCorrelatedNoise) {
  const auto g = TimeGrid::until(1.0, 0.01);
  auto cfg = config(InteractionNetwork::dense(mat2(0, 1, 1, 0), CovarianceSpec::dense(mat2(1, -1, -1, 1))), {1.0, 1.0}, g);
  cfg.monitoring = BoundaryMonitoring::Bridge;
  try {
    initial_state(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
  }
}
