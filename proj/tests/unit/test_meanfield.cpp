#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ltsim/meanfield.hpp"
#include "ltsim/profiles.hpp"

using namespace ltsim;

namespace {

MeanFieldConfig small_config(double alpha, InitialLaw law, std::size_t m, double horizon = 1.0, double dt = 1e-2) {
  MeanFieldConfig c;
  c.alpha = alpha;
  c.initial = std::move(law);
  c.grid = TimeGrid::until(horizon, dt);
  c.M = m;
  c.seed = 2024;
  return c;
}

}  // namespace

TEST(InitialLaw, Basics) {
  EXPECT_EQ(InitialLaw::dirac(0.0).atom_at_zero(), 1.0);
  EXPECT_EQ(InitialLaw::dirac(1.0).atom_at_zero(), 0.0);
  EXPECT_DOUBLE_EQ(InitialLaw::exponential(2.0).mean(), 0.5);
  EXPECT_NEAR(InitialLaw::exponential(2.0).quantile(0.5), std::log(2.0) / 2.0, 1e-15);
  const auto e = InitialLaw::empirical({3.0, 1.0, 2.0, 0.0});
  EXPECT_DOUBLE_EQ(e.mean(), 1.5);
  EXPECT_DOUBLE_EQ(e.atom_at_zero(), 0.25);
  EXPECT_EQ(e.draw(4, 1), (std::vector<double>{3.0, 1.0, 2.0, 0.0}));
  const auto d = e.draw(100, 1);
  for (double v : d) EXPECT_TRUE(v == 0.0 || v == 1.0 || v == 2.0 || v == 3.0);
  EXPECT_THROW(InitialLaw::exponential(-1.0), Error);
  EXPECT_THROW(InitialLaw::dirac(-1.0), Error);
  EXPECT_THROW(InitialLaw::empirical({1.0, -2.0}), Error);
}

TEST(InitialLaw, DrawsAreReproducible) {
  const auto law = InitialLaw::exponential(1.0);
  EXPECT_EQ(law.draw(50, 7), law.draw(50, 7));
  EXPECT_NE(law.draw(50, 7), law.draw(50, 8));
}

TEST(Picard, AlphaZeroIsExpectedRunningMinimum) {
  auto cfg = small_config(0.0, InitialLaw::exponential(2.0), 200);
  const auto noise = sample_noise(cfg.grid, CovarianceSpec::identity(cfg.M), cfg.seed);
  const auto sol = solve_picard(cfg, noise);
  const auto xi = draw_initial(cfg);
  // Oracle: average over samples of the running maximum of (xi + W)_-.
  std::vector<double> ell(cfg.grid.n_steps() + 1, 0.0);
  for (std::size_t m = 0; m < cfg.M; ++m) {
    const auto w = noise.path(m);
    double lo = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      lo = std::min(lo, xi[m] + w[k]);
      ell[k] += -lo;
    }
  }
  for (std::size_t k = 0; k < ell.size(); ++k) EXPECT_NEAR(sol.path.ell[k], ell[k] / cfg.M, 1e-13);
  EXPECT_LE(sol.iterations, 2u);
}

TEST(Picard, AlphaZeroMatchesParticleBitwise) {
  auto cfg = small_config(0.0, InitialLaw::exponential(1.0), 300);
  const auto noise = sample_noise(cfg.grid, CovarianceSpec::identity(cfg.M), cfg.seed);
  const auto pic = solve_picard(cfg, noise);
  auto src = noise.replay();
  const auto par = solve_particle(cfg, *src);
  ASSERT_EQ(pic.path.ell.size(), par.path.ell.size());
  for (std::size_t k = 0; k < pic.path.ell.size(); ++k) EXPECT_EQ(pic.path.ell[k], par.path.ell[k]);
}

TEST(Picard, AgreesWithParticleSubcritical) {
  auto cfg = small_config(0.5, InitialLaw::exponential(1.0), 400);
  const auto noise = sample_noise(cfg.grid, CovarianceSpec::identity(cfg.M), cfg.seed);
  cfg.picard_tol = 1e-13;
  const auto pic = solve_picard(cfg, noise);
  auto src = noise.replay();
  const auto par = solve_particle(cfg, *src);
  for (std::size_t k = 0; k < pic.path.ell.size(); ++k) EXPECT_NEAR(pic.path.ell[k], par.path.ell[k], 1e-10);
}

TEST(Picard, GapsContractGeometrically) {
  auto cfg = small_config(0.5, InitialLaw::dirac(0.0), 2000);
  cfg.picard_tol = 1e-13;
  const auto sol = solve_picard(cfg);
  ASSERT_GE(sol.gaps.size(), 3u);
  for (std::size_t i = 1; i < sol.gaps.size(); ++i) {
    if (sol.gaps[i - 1] < 1e-12) break;
    EXPECT_LE(sol.gaps[i], (0.5 + 0.05) * sol.gaps[i - 1]);
  }
}

TEST(Picard, GridMonitoringUndershootsSelfSimilarGrowth) {
  // Reflection seen only at grid points misses excursions inside steps.
  auto cfg = small_config(0.5, InitialLaw::dirac(0.0), 20000, 0.2, 1e-3);
  const auto sol = solve_picard(cfg);
  const double c = solve_c_alpha(0.5);
  EXPECT_LT(sol.path.at(0.1), (1.0 - 0.05) * c * std::sqrt(0.1));
}

TEST(Picard, BridgeAlphaZeroMatchesParticleBitwise) {
  auto cfg = small_config(0.0, InitialLaw::exponential(1.0), 300);
  cfg.monitoring = BoundaryMonitoring::Bridge;
  const auto noise = sample_noise(cfg.grid, CovarianceSpec::identity(cfg.M), cfg.seed);
  const auto pic = solve_picard(cfg, noise);
  auto src = noise.replay();
  const auto par = solve_particle(cfg, *src);
  for (std::size_t k = 0; k < pic.path.ell.size(); ++k) EXPECT_EQ(pic.path.ell[k], par.path.ell[k]);
}

TEST(Picard, BridgeAgreesWithParticleSubcritical) {
  auto cfg = small_config(0.5, InitialLaw::exponential(1.0), 400);
  cfg.monitoring = BoundaryMonitoring::Bridge;
  cfg.picard_tol = 1e-13;
  const auto noise = sample_noise(cfg.grid, CovarianceSpec::identity(cfg.M), cfg.seed);
  const auto pic = solve_picard(cfg, noise);
  auto src = noise.replay();
  const auto par = solve_particle(cfg, *src);
  for (std::size_t k = 0; k < pic.path.ell.size(); ++k) EXPECT_NEAR(pic.path.ell[k], par.path.ell[k], 1e-10);
}

TEST(Picard, StreamedMatchesStored) {
  auto cfg = small_config(0.5, InitialLaw::exponential(1.0), 100);
  const auto noise = sample_noise(cfg.grid, CovarianceSpec::identity(cfg.M), cfg.seed);
  const auto a = solve_picard(cfg, noise);
  const auto b = solve_picard(cfg);
  EXPECT_EQ(a.path.ell, b.path.ell);
}

TEST(Picard, SelfSimilarGrowthFromOrigin) {
  auto cfg = small_config(0.5, InitialLaw::dirac(0.0), 20000, 1.0, 1e-3);
  cfg.monitoring = BoundaryMonitoring::Bridge;
  const auto sol = solve_picard(cfg);
  const double c = solve_c_alpha(0.5);
  for (std::size_t k = 0; k < sol.path.times.size(); ++k) {
    const double t = sol.path.times[k];
    if (t < 0.1) continue;
    EXPECT_LE(std::abs(sol.path.ell[k] - c * std::sqrt(t)) / (c * std::sqrt(t)), 0.03) << t;
  }
}

TEST(Picard, RejectsSupercritical) {
  auto cfg = small_config(1.5, InitialLaw::dirac(1.0), 10);
  try {
    solve_picard(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
  }
}

TEST(Picard, CriticalWarns) {
  auto cfg = small_config(1.0, InitialLaw::exponential(1.0), 200);
  const auto sol = solve_picard(cfg);
  EXPECT_FALSE(sol.warnings.empty());
  auto zero = small_config(1.0, InitialLaw::dirac(0.0), 10);
  EXPECT_THROW(solve_picard(zero), Error);
}

TEST(Picard, NoConvergenceReported) {
  auto cfg = small_config(0.9, InitialLaw::dirac(0.0), 200);
  cfg.picard_max_iters = 2;
  cfg.picard_tol = 1e-15;
  try {
    solve_picard(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
  }
}

TEST(Particle, SupercriticalBreaksDown) {
  auto cfg = small_config(2.0, InitialLaw::exponential(1.0), 1000, 2.0, 1e-3);
  const auto sol = solve_particle(cfg);
  EXPECT_TRUE(std::isfinite(sol.path.T_breakdown));
  EXPECT_TRUE(sol.trajectory.breakdown.occurred);
  EXPECT_GE(sol.trajectory.breakdown.zero_set_at_tau.size(), 500u);
}

TEST(Particle, EllIsNondecreasing) {
  auto cfg = small_config(0.75, InitialLaw::exponential(1.0), 500);
  const auto sol = solve_particle(cfg);
  EXPECT_EQ(sol.path.ell.front(), 0.0);
  for (std::size_t k = 1; k < sol.path.ell.size(); ++k) EXPECT_GE(sol.path.ell[k], sol.path.ell[k - 1]);
  EXPECT_FALSE(std::isfinite(sol.path.T_breakdown));
}

TEST(Jump, OnePointLaw) {
  const std::vector<double> s(10, 0.5);
  const auto r = jump_size(s, 2.0);
  ASSERT_EQ(r.status, JumpStatus::Jump);
  EXPECT_NEAR(r.delta, 0.5, 1e-10);
}

TEST(Jump, TwoAtomLaw) {
  std::vector<double> s(10, 1.0);
  s[0] = s[1] = 0.0;
  const auto r = jump_size(s, 2.0);
  ASSERT_EQ(r.status, JumpStatus::Jump);
  EXPECT_NEAR(r.delta, 0.8, 1e-10);
  EXPECT_LE(r.J_residual, 1e-10);
  // Brute-force check: J changes sign of J - 1 exactly once, next to 0.8.
  double last = -1.0;
  int crossings = 0;
  for (int i = 1; i <= 4000; ++i) {
    const double d = i * 1e-3;
    const double v = jump_function(s, 2.0, d) - 1.0;
    if (i > 1 && (v > 0) != (last > 0)) {
      ++crossings;
      EXPECT_NEAR(d, 0.8, 1.5e-3);
    }
    last = v;
  }
  EXPECT_EQ(crossings, 1);
}

TEST(Jump, SubcriticalAndAtom) {
  std::mt19937_64 eng(1);
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> s(1000);
  for (auto& v : s) v = ex(eng);
  EXPECT_EQ(jump_size(s, 0.9).status, JumpStatus::NoJump);
  std::vector<double> atom{0.0, 0.0, 1.0, 2.0};
  EXPECT_EQ(jump_size(atom, 2.0).status, JumpStatus::AtomTooLarge);
}

TEST(BreakdownTime, Rules) {
  EllPath p;
  p.times = {0.0, 0.1, 0.2, 0.3};
  p.ell = {0, 0, 0, 0};
  p.atom_mass = {0.1, 0.3, 0.6, 0.9};
  EXPECT_EQ(breakdown_time(p, 2.0), 0.2);
  EXPECT_EQ(breakdown_time(p, 0.5), kNoBreakdown);
  p.atom_mass = {1.0, 1.0, 1.0, 1.0};
  EXPECT_EQ(breakdown_time(p, 1.0), 0.0);
}

TEST(BreakdownTime, CriticalFromOrigin) {
  auto cfg = small_config(1.0, InitialLaw::dirac(0.0), 100);
  const auto sol = solve_particle(cfg);
  EXPECT_EQ(sol.path.T_breakdown, 0.0);
}

TEST(BreakdownTime, IncreasesWithStartingPoint) {
  double last = 0.0;
  for (double x0 : {0.2, 0.6, 1.2}) {
    auto cfg = small_config(2.0, InitialLaw::dirac(x0), 2000, 3.0, 1e-3);
    const auto sol = solve_particle(cfg);
    ASSERT_TRUE(std::isfinite(sol.path.T_breakdown));
    EXPECT_GT(sol.path.T_breakdown, last);
    last = sol.path.T_breakdown;
  }
}

TEST(Holder, LinearAndSquareRoot) {
  EllPath lin, sq;
  for (int k = 0; k <= 1024; ++k) {
    const double t = k / 1024.0;
    lin.times.push_back(t);
    lin.ell.push_back(t / 2.0);
    sq.times.push_back(t);
    sq.ell.push_back(0.7 * std::sqrt(t));
  }
  lin.atom_mass = sq.atom_mass = std::vector<double>(lin.times.size(), 0.0);
  EXPECT_NEAR(holder_diagnostic(lin, 0.0, 1.0), 0.5, 1e-12);
  EXPECT_NEAR(holder_diagnostic(sq, 0.0, 1.0), 0.7, 1e-12);
}
