#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ltsim/timegrid_noise.hpp"

using namespace ltsim;

namespace {

// Running-minimum oracle written independently of skorokhod_map.
std::vector<double> reflection_oracle(const std::vector<double>& z) {
  std::vector<double> l(z.size());
  double lowest = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    lowest = std::min(lowest, z[k]);
    l[k] = -lowest;
  }
  return l;
}

}  // namespace

TEST(TimeGrid, UntilRoundsStepCount) {
  const auto g = TimeGrid::until(1.0, 1e-3);
  EXPECT_EQ(g.n_steps(), 1000u);
  EXPECT_DOUBLE_EQ(g.horizon(), 1.0);
  EXPECT_EQ(g.index_of(0.5), 500u);
  EXPECT_EQ(g.index_of(7.0), 1000u);
  EXPECT_EQ(g.index_of(-1.0), 0u);
}

TEST(TimeGrid, RejectsBadStep) {
  EXPECT_THROW(TimeGrid(0.0, 0.0, 10), Error);
  EXPECT_THROW(TimeGrid(0.0, -1.0, 10), Error);
}

TEST(Covariance, IdentityFactorIsIdentity) {
  const auto f = factor_covariance(CovarianceSpec::dense(Eigen::MatrixXd::Identity(2, 2)));
  EXPECT_TRUE(f.matrix().isApprox(Eigen::MatrixXd::Identity(2, 2), 0.0));
  EXPECT_EQ(f.rank(), 2u);
}

TEST(Covariance, AnticorrelatedPairHasRankOne) {
  Eigen::MatrixXd a(2, 2);
  a << 1, -1, -1, 1;
  const auto f = factor_covariance(CovarianceSpec::dense(a));
  const Eigen::MatrixXd ff = f.matrix() * f.matrix().transpose();
  EXPECT_LE((ff - a).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(f.rank(), 1u);
}

TEST(Covariance, ReconstructsRandomGram) {
  std::mt19937_64 eng(7);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g(i, j) = n01(eng);
  const Eigen::MatrixXd a = g * g.transpose();
  const auto f = factor_covariance(CovarianceSpec::dense(a));
  const Eigen::MatrixXd ff = f.matrix() * f.matrix().transpose();
  EXPECT_LE((ff - a).cwiseAbs().maxCoeff(), 1e-8 * a.cwiseAbs().maxCoeff());
}

TEST(Covariance, RankDeficientGram) {
  Eigen::MatrixXd g(4, 2);
  g << 1, 2, -1, 0.5, 3, 1, 0, -2;
  const Eigen::MatrixXd a = g * g.transpose();
  const auto f = factor_covariance(CovarianceSpec::dense(a));
  EXPECT_EQ(f.rank(), 2u);
  EXPECT_LE((f.matrix() * f.matrix().transpose() - a).cwiseAbs().maxCoeff(), 1e-8 * a.cwiseAbs().maxCoeff());
}

TEST(Covariance, RejectsAsymmetric) {
  Eigen::MatrixXd a(2, 2);
  a << 1, 0.5, 0, 1;
  try {
    factor_covariance(CovarianceSpec::dense(a));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSymmetric);
  }
}

TEST(Covariance, RejectsIndefinite) {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 2, 1;
  try {
    factor_covariance(CovarianceSpec::dense(a));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveSemidefinite);
  }
}

TEST(Covariance, PrincipalMinor) {
  Eigen::MatrixXd a(3, 3);
  a << 1, 0.1, 0.2, 0.1, 2, 0.3, 0.2, 0.3, 3;
  const auto spec = CovarianceSpec::dense(a);
  const std::vector<std::size_t> idx{0, 2};
  const auto m = spec.principal_minor(idx);
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(0, 1), 0.2);
  EXPECT_EQ(m(1, 1), 3.0);
  EXPECT_EQ(CovarianceSpec::identity(5, 2.0).entry(3, 3), 2.0);
  EXPECT_EQ(CovarianceSpec::identity(5, 2.0).entry(3, 1), 0.0);
}

TEST(Noise, DeterministicForSeed) {
  const auto g = TimeGrid::until(1.0, 0.01);
  const auto a = CovarianceSpec::identity(3);
  const auto e1 = sample_noise(g, a, 42);
  const auto e2 = sample_noise(g, a, 42);
  const auto e3 = sample_noise(g, a, 43);
  ASSERT_EQ(e1.data().size(), 300u);
  EXPECT_TRUE(std::equal(e1.data().begin(), e1.data().end(), e2.data().begin()));
  EXPECT_FALSE(std::equal(e1.data().begin(), e1.data().end(), e3.data().begin()));
}

TEST(Noise, StreamMatchesEnsembleAndReplay) {
  const auto g = TimeGrid::until(0.5, 0.01);
  const auto a = CovarianceSpec::identity(4);
  const auto ens = sample_noise(g, a, 9);
  NoiseStream stream(g, a, 9);
  auto replay = ens.replay();
  std::vector<double> r1(4), r2(4);
  for (std::size_t k = 0; k < g.n_steps(); ++k) {
    stream.next(r1);
    replay->next(r2);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(r1[i], ens.increment(k, i));
      EXPECT_EQ(r2[i], ens.increment(k, i));
    }
  }
}

TEST(Noise, AnticorrelatedIncrementsCancelExactly) {
  Eigen::MatrixXd a(2, 2);
  a << 1, -1, -1, 1;
  const auto g = TimeGrid::until(10.0, 1e-3);
  const auto ens = sample_noise(g, CovarianceSpec::dense(a), 5);
  for (std::size_t k = 0; k < g.n_steps(); ++k) ASSERT_EQ(ens.increment(k, 0) + ens.increment(k, 1), 0.0);
}

TEST(Noise, IncrementVarianceChiSquareBand) {
  const auto g = TimeGrid(0.0, 0.01, 100000);
  const auto ens = sample_noise(g, CovarianceSpec::identity(2), 1234);
  for (std::size_t i = 0; i < 2; ++i) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < g.n_steps(); ++k) {
      const double v = ens.increment(k, i) / std::sqrt(g.dt());
      s += v;
      s2 += v * v;
    }
    const double n = static_cast<double>(g.n_steps());
    const double var = (s2 - s * s / n) / (n - 1.0);
    EXPECT_GE(var, 0.97);
    EXPECT_LE(var, 1.03);
  }
}

TEST(Noise, CorrelatedCovarianceRecovered) {
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 0.6, 0.6, 1.0;
  const auto g = TimeGrid(0.0, 1.0, 200000);
  const auto ens = sample_noise(g, CovarianceSpec::dense(a), 77);
  double c00 = 0, c01 = 0, c11 = 0;
  for (std::size_t k = 0; k < g.n_steps(); ++k) {
    const double x = ens.increment(k, 0), y = ens.increment(k, 1);
    c00 += x * x;
    c01 += x * y;
    c11 += y * y;
  }
  const double n = static_cast<double>(g.n_steps());
  EXPECT_NEAR(c00 / n, 2.0, 0.03);
  EXPECT_NEAR(c01 / n, 0.6, 0.02);
  EXPECT_NEAR(c11 / n, 1.0, 0.015);
}

TEST(Noise, PathIsCumulativeSum) {
  const auto g = TimeGrid::until(0.1, 0.01);
  const auto ens = sample_noise(g, CovarianceSpec::identity(2), 3);
  const auto p = ens.path(1);
  ASSERT_EQ(p.size(), g.n_steps() + 1);
  EXPECT_EQ(p[0], 0.0);
  double s = 0.0;
  for (std::size_t k = 0; k < g.n_steps(); ++k) {
    s += ens.increment(k, 1);
    EXPECT_EQ(p[k + 1], s);
  }
}

TEST(Skorokhod, MonotoneDescent) {
  const std::vector<double> z{0, -1, -2};
  const auto r = skorokhod_map(z);
  EXPECT_EQ(r.l, (std::vector<double>{0, 1, 2}));
  EXPECT_EQ(r.x, (std::vector<double>{0, 0, 0}));
}

TEST(Skorokhod, NeverNegative) {
  const std::vector<double> z{1, 0.5, 2};
  const auto r = skorokhod_map(z);
  EXPECT_EQ(r.l, (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(r.x, z);
}

TEST(Skorokhod, PrefixMinimumOracle) {
  const std::vector<double> z{1, -1, 0, -2};
  const auto r = skorokhod_map(z);
  EXPECT_EQ(r.l, (std::vector<double>{0, 1, 1, 2}));
  EXPECT_EQ(r.x, (std::vector<double>{1, 0, 1, 0}));
}

TEST(Skorokhod, NegativeStartRejected) {
  const std::vector<double> z{-0.1, 1.0};
  try {
    skorokhod_map(z);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NegativeStart);
  }
  const std::vector<double> dz{1.0};
  EXPECT_THROW(skorokhod_increment(-1.0, dz), Error);
}

TEST(Skorokhod, IncrementExamples) {
  const std::vector<double> interior{-1, -1};
  const auto a = skorokhod_increment(5.0, interior);
  EXPECT_EQ(a.dl, 0.0);
  EXPECT_EQ(a.x_t, 3.0);
  for (double c : {1e-9, 0.3, 7.0}) {
    const std::vector<double> push{-c};
    const auto b = skorokhod_increment(0.0, push);
    EXPECT_EQ(b.dl, c);
    EXPECT_EQ(b.x_t, 0.0);
  }
}

TEST(Skorokhod, MapMatchesOracleOnRandomPaths) {
  std::mt19937_64 eng(11);
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> z{std::abs(n01(eng))};
    for (int k = 0; k < 500; ++k) z.push_back(z.back() + 0.1 * n01(eng));
    const auto r = skorokhod_map(z);
    const auto l = reflection_oracle(z);
    for (std::size_t k = 0; k < z.size(); ++k) {
      EXPECT_EQ(r.l[k], l[k]);
      EXPECT_GE(r.x[k], 0.0);
    }
  }
}

TEST(Skorokhod, CompositionOverPartitionsOnRandomPaths) {
  std::mt19937_64 eng(21);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> cut(1, 40);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> dz(400);
    for (auto& d : dz) d = 0.05 * n01(eng);
    std::vector<double> z{0.2};
    for (double d : dz) z.push_back(z.back() + d);
    const auto ref = skorokhod_map(z);
    double x = z[0], l = 0.0;
    std::size_t pos = 0;
    while (pos < dz.size()) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cut(eng)), dz.size() - pos);
      const auto inc = skorokhod_increment(x, std::span<const double>(dz).subspan(pos, len));
      pos += len;
      x = inc.x_t;
      l += inc.dl;
      EXPECT_NEAR(x, ref.x[pos], 1e-12);
      EXPECT_NEAR(l, ref.l[pos], 1e-12);
    }
  }
}
