#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ltsim/profiles.hpp"

using namespace ltsim;

namespace {

// Composite Simpson rule on [0, b] with n (even) panels.
template <class F>
double simpson(F f, double b, int n) {
  const double h = b / n;
  double s = f(0.0) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

}  // namespace

TEST(Erfcx, MatchesDirectFormulaAndAsymptote) {
  for (double x : {-2.0, -0.5, 0.0, 0.3, 1.0, 3.0, 4.9}) EXPECT_NEAR(erfcx(x), std::exp(x * x) * std::erfc(x), 1e-13 * erfcx(x));
  for (double x : {5.0, 8.0, 20.0, 100.0}) {
    // Asymptotic series 1/(x sqrt pi) (1 - 1/(2x^2) + 3/(4x^4) - 15/(8x^6)).
    const double x2 = x * x;
    const double series = (1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2)) / (x * std::sqrt(std::numbers::pi));
    EXPECT_NEAR(erfcx(x), series, 3e-5 * series);
  }
  // Continuity across the branch switch.
  EXPECT_NEAR(erfcx(5.0 - 1e-12), erfcx(5.0), 1e-12);
}

TEST(CAlpha, AlphaZero) {
  EXPECT_NEAR(solve_c_alpha(0.0), std::sqrt(2.0 / std::numbers::pi), 1e-10);
}

TEST(CAlpha, QuadratureOracle) {
  for (double a : {0.1, 0.5, 0.9}) {
    const double c = solve_c_alpha(a);
    const double mass = simpson([&](double x) { return c * std::exp(-c * a * x - x * x / 2.0); }, 40.0, 400000);
    EXPECT_NEAR(mass, 1.0, 1e-9) << a;
  }
}

TEST(CAlpha, GammaLimitsAndBound) {
  EXPECT_NEAR(gamma_alpha(0.001), 2.0 / std::numbers::pi, 0.02);
  EXPECT_GE(gamma_alpha(0.999), 0.97);
  EXPECT_LE(gamma_alpha(0.999), 1.0);
  for (int i = 1; i <= 99; ++i) EXPECT_LE(gamma_alpha(i / 100.0), 1.0);
  EXPECT_THROW(solve_c_alpha(1.0), Error);
  EXPECT_THROW(solve_c_alpha(-0.1), Error);
}

TEST(Profiles, ExponentialMedian) {
  ExponentialProfile e(2.0);
  EXPECT_NEAR(e.quantile(0.5), std::log(2.0) / 2.0, 1e-15);
  EXPECT_NEAR(e.cdf(e.quantile(0.3)), 0.3, 1e-15);
  EXPECT_THROW(e.quantile(1.5), Error);
  EXPECT_THROW(e.density(-1.0), Error);
}

TEST(Profiles, SelfSimilarAlphaZeroIsFoldedNormal) {
  SelfSimilarProfile p(0.0);
  const double c0 = std::sqrt(2.0 / std::numbers::pi);
  for (double x : {0.0, 0.5, 1.0, 3.0}) {
    EXPECT_NEAR(p.density(x), c0 * std::exp(-x * x / 2.0), 1e-14);
    EXPECT_NEAR(p.cdf(x), std::erf(x / std::sqrt(2.0)), 1e-13);
  }
  EXPECT_NEAR(p.mean(), c0, 1e-12);
}

TEST(Profiles, SelfSimilarCdfAndMeanByQuadrature) {
  for (double a : {0.25, 0.5, 0.8}) {
    SelfSimilarProfile p(a);
    const double mean = simpson([&](double x) { return x * p.density(x); }, 40.0, 400000);
    EXPECT_NEAR(mean, p.c_alpha() * (1.0 - a), 1e-8);
    for (double x : {0.3, 1.0, 2.5}) {
      const double f = simpson([&](double y) { return p.density(y); }, x, 20000);
      EXPECT_NEAR(p.cdf(x), f, 1e-9);
    }
    EXPECT_NEAR(p.cdf(p.quantile(0.77)), 0.77, 1e-12);
  }
}

TEST(Profiles, UnitMeanRescaling) {
  for (double a : {0.2, 0.5, 0.9}) {
    SelfSimilarProfile p(a);
    const double m = p.mean();
    const double g = p.gamma_alpha();
    for (int i = 0; i <= 100; ++i) {
      const double x = i * 0.1;
      const double pushed = m * p.density(m * x);
      EXPECT_NEAR(pushed, g * std::exp(-g * a * x - g * (1.0 - a) * x * x / 2.0), 1e-9);
    }
  }
}

TEST(Profiles, SelfSimilarSampleMean) {
  SelfSimilarProfile p(0.5);
  const auto s = p.sample(1000000, 5);
  double sum = 0.0, sum2 = 0.0;
  for (double v : s) {
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(s.size());
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - p.c_alpha() * 0.5), 3.0 * se);
}

TEST(Profiles, GridDensity) {
  GridDensity g(0.5, {1.0, 0.5, 0.5});
  EXPECT_NEAR(g.cdf(1.5), 1.0, 1e-15);
  EXPECT_NEAR(g.cdf(0.25), 0.25, 1e-15);
  EXPECT_NEAR(g.quantile(0.75), 1.0, 1e-15);
  EXPECT_NEAR(g.mean(), 0.5 * 0.25 + 0.25 * 0.75 + 0.25 * 1.25, 1e-15);
}

TEST(Wasserstein, IdenticalAndDirac) {
  EmpiricalLaw a({0.3, 1.0, 2.0});
  EXPECT_EQ(wasserstein1(a, a), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein1(EmpiricalLaw({2.0}), EmpiricalLaw({5.5})), 3.5);
  EXPECT_THROW(EmpiricalLaw({}), Error);
}

TEST(Wasserstein, ExponentialPairAnalytic) {
  EXPECT_NEAR(wasserstein1(ExponentialProfile(1.0), ExponentialProfile(2.0)), 0.5, 1e-9);
}

TEST(Wasserstein, UnequalSizesUseCdfIntegral) {
  // F_a jumps at 0 and 1, F_b at 0.5: integral of |F_a - F_b| is 0.25 + 0.25.
  EXPECT_NEAR(wasserstein1(EmpiricalLaw({0.0, 1.0}), EmpiricalLaw({0.5})), 0.5, 1e-15);
}

TEST(Wasserstein, MetricAxiomsOnRandomTriples) {
  std::mt19937_64 eng(3);
  std::exponential_distribution<double> ex(1.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(50), y(50), z(50);
    for (std::size_t i = 0; i < 50; ++i) {
      x[i] = ex(eng);
      y[i] = 2.0 * ex(eng);
      z[i] = 0.5 * ex(eng);
    }
    EmpiricalLaw a(x), b(y), c(z);
    EXPECT_EQ(wasserstein1(a, b), wasserstein1(b, a));
    EXPECT_LE(wasserstein1(a, c), wasserstein1(a, b) + wasserstein1(b, c) + 1e-12 * 10.0);
  }
}

TEST(Wasserstein, EmpiricalAgainstAnalyticConverges) {
  ExponentialProfile e(1.0);
  const auto s = e.sample(100000, 9);
  const double w = wasserstein1(EmpiricalLaw(s), e);
  EXPECT_LE(w, 5.0 * wasserstein1_standard_error(e, s.size()) + 0.01);
  EXPECT_EQ(w, wasserstein1(e, EmpiricalLaw(s)));
}

TEST(Convergence, StationaryStartStaysClose) {
  MeanFieldConfig cfg;
  cfg.alpha = 1.0;
  cfg.initial = InitialLaw::exponential(1.0);
  cfg.grid = TimeGrid::until(2.0, 1e-2);
  cfg.M = 5000;
  cfg.seed = 1;
  const auto s = convergence_experiment(cfg, ExponentialProfile(1.0), {0.5, 1.0, 2.0});
  ASSERT_EQ(s.w1.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(s.w1[i], 2.0 * (4.0 * s.standard_error[i] + 0.02));
}

TEST(Convergence, RejectsMismatchedTarget) {
  MeanFieldConfig cfg;
  cfg.alpha = 0.5;
  EXPECT_THROW(convergence_experiment(cfg, ExponentialProfile(1.0), {1.0}), Error);
  EXPECT_THROW(convergence_experiment(cfg, SelfSimilarProfile(0.25), {1.0}), Error);
}
