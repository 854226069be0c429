#include "ltsim/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <fmt/format.h>

#include "ltsim/seeding.hpp"

namespace ltsim {

double erfcx(double x) {
  if (x < 5.0) return std::exp(x * x) * boost::math::erfc(x);
  // Laplace continued fraction, evaluated backwards.
  double t = x;
  for (int k = 80; k >= 1; --k) t = x + 0.5 * k / t;
  return 1.0 / (std::sqrt(std::numbers::pi) * t);
}

namespace {

double integrate_half_line(const std::function<double(double)>& f) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  return gauss_kronrod<double, 61>::integrate(f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-12, &err);
}

}  // namespace

// ---------------------------------------------------------------------------
// Analytic laws
// ---------------------------------------------------------------------------

double AnalyticLaw::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) fail(ErrorCode::DomainError, fmt::format("quantile level {} outside (0, 1)", u));
  double lo = 0.0;
  double hi = 1.0;
  while (cdf(hi) < u) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) fail(ErrorCode::DomainError, "quantile bracket diverged");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < u)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> AnalyticLaw::sample(std::size_t n, std::uint64_t seed) const {
  auto eng = make_engine(seed, StreamTag::Sampler);
  std::vector<double> out(n);
  for (double& v : out) {
    const double u = (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
    v = quantile(u);
  }
  return out;
}

ExponentialProfile::ExponentialProfile(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorCode::DomainError, "exponential rate must be > 0");
}

double ExponentialProfile::density(double x) const {
  if (!(x >= 0.0)) fail(ErrorCode::DomainError, "density argument must be >= 0");
  return lambda_ * std::exp(-lambda_ * x);
}

double ExponentialProfile::cdf(double x) const {
  if (!(x >= 0.0)) fail(ErrorCode::DomainError, "cdf argument must be >= 0");
  return -std::expm1(-lambda_ * x);
}

double ExponentialProfile::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) fail(ErrorCode::DomainError, fmt::format("quantile level {} outside (0, 1)", u));
  return -std::log1p(-u) / lambda_;
}

std::string ExponentialProfile::name() const { return fmt::format("exponential(lambda={})", lambda_); }

double solve_c_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) fail(ErrorCode::OutOfRange, fmt::format("alpha = {} outside [0, 1)", alpha));
  const double k = std::sqrt(std::numbers::pi / 2.0);
  auto g = [&](double c) { return c * k * erfcx(c * alpha / std::numbers::sqrt2) - 1.0; };
  double lo = 1e-6;
  // c_alpha grows like (1 - alpha)^{-1/2} as alpha -> 1.
  double hi = std::max(10.0, 2.0 / std::sqrt(1.0 - alpha));
  if (g(lo) > 0.0 || g(hi) < 0.0) fail(ErrorCode::NoConvergence, "normalization bracket does not enclose the root");
  for (int i = 0; i < 400 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::abs(g(lo)) < std::abs(g(hi)) ? lo : hi;
}

double gamma_alpha(double alpha) {
  const double c = solve_c_alpha(alpha);
  return c * c * (1.0 - alpha);
}

SelfSimilarProfile::SelfSimilarProfile(double alpha) : alpha_(alpha), c_(solve_c_alpha(alpha)) {}

double SelfSimilarProfile::density(double x) const {
  if (!(x >= 0.0)) fail(ErrorCode::DomainError, "density argument must be >= 0");
  return c_ * std::exp(-c_ * alpha_ * x - 0.5 * x * x);
}

double SelfSimilarProfile::cdf(double x) const {
  if (!(x >= 0.0)) fail(ErrorCode::DomainError, "cdf argument must be >= 0");
  const double a = c_ * alpha_;
  const double tail = c_ * std::sqrt(std::numbers::pi / 2.0) * erfcx((x + a) / std::numbers::sqrt2) *
                      std::exp(-a * x - 0.5 * x * x);
  return std::clamp(1.0 - tail, 0.0, 1.0);
}

std::string SelfSimilarProfile::name() const { return fmt::format("self_similar(alpha={})", alpha_); }

GridDensity::GridDensity(double h, std::vector<double> cell_values) : h_(h), mu_(std::move(cell_values)) {
  if (!(h > 0.0) || mu_.empty()) fail(ErrorCode::InvalidArgument, "grid density needs h > 0 and cells");
  double mass = 0.0;
  for (double v : mu_) {
    if (!(v >= 0.0)) fail(ErrorCode::InvalidArgument, "grid density must be nonnegative");
    mass += v * h_;
  }
  if (!(mass > 0.0)) fail(ErrorCode::InvalidArgument, "grid density has zero mass");
  for (double& v : mu_) v /= mass;
  cum_.resize(mu_.size() + 1, 0.0);
  for (std::size_t j = 0; j < mu_.size(); ++j) cum_[j + 1] = cum_[j] + mu_[j] * h_;
}

double GridDensity::density(double x) const {
  if (!(x >= 0.0)) fail(ErrorCode::DomainError, "density argument must be >= 0");
  const auto j = static_cast<std::size_t>(x / h_);
  return j < mu_.size() ? mu_[j] : 0.0;
}

double GridDensity::cdf(double x) const {
  if (!(x >= 0.0)) fail(ErrorCode::DomainError, "cdf argument must be >= 0");
  const auto j = static_cast<std::size_t>(x / h_);
  if (j >= mu_.size()) return 1.0;
  return std::min(1.0, cum_[j] + mu_[j] * (x - static_cast<double>(j) * h_));
}

double GridDensity::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) fail(ErrorCode::DomainError, fmt::format("quantile level {} outside (0, 1)", u));
  auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
  if (it == cum_.end()) return h_ * static_cast<double>(mu_.size());
  const std::size_t j = static_cast<std::size_t>(it - cum_.begin()) - 1;
  if (mu_[j] == 0.0) return h_ * static_cast<double>(j);
  return h_ * static_cast<double>(j) + (u - cum_[j]) / mu_[j];
}

double GridDensity::mean() const {
  double m = 0.0;
  for (std::size_t j = 0; j < mu_.size(); ++j) m += mu_[j] * h_ * (static_cast<double>(j) + 0.5) * h_;
  return m;
}

// ---------------------------------------------------------------------------
// Wasserstein-1
// ---------------------------------------------------------------------------

EmpiricalLaw::EmpiricalLaw(std::vector<double> values) : v_(std::move(values)) {
  if (v_.empty()) fail(ErrorCode::EmptySample, "empirical law needs at least one value");
  for (double x : v_)
    if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorCode::DomainError, "empirical values must be finite and >= 0");
  std::sort(v_.begin(), v_.end());
}

double EmpiricalLaw::mean() const { return std::accumulate(v_.begin(), v_.end(), 0.0) / static_cast<double>(v_.size()); }

EmpiricalLaw EmpiricalLaw::scaled(double s) const {
  if (!(s > 0.0)) fail(ErrorCode::InvalidArgument, "scale must be > 0");
  std::vector<double> w(v_);
  for (double& x : w) x /= s;
  return EmpiricalLaw(std::move(w));
}

double wasserstein1(const EmpiricalLaw& a, const EmpiricalLaw& b) {
  const auto& x = a.sorted();
  const auto& y = b.sorted();
  if (x.size() == y.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
    return s / static_cast<double>(x.size());
  }
  // Integrate |F_a - F_b| between consecutive support points.
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(x.front(), y.front());
  double total = 0.0;
  while (i < x.size() || j < y.size()) {
    const double next = (j >= y.size() || (i < x.size() && x[i] <= y[j])) ? x[i] : y[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    while (i < x.size() && x[i] == next) ++i;
    while (j < y.size() && y[j] == next) ++j;
    prev = next;
  }
  return total;
}

double wasserstein1(const EmpiricalLaw& a, const AnalyticLaw& b) {
  const auto& x = a.sorted();
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - b.quantile((static_cast<double>(i) + 0.5) / n));
  return s / n;
}

double wasserstein1(const AnalyticLaw& a, const EmpiricalLaw& b) { return wasserstein1(b, a); }

double wasserstein1(const AnalyticLaw& a, const AnalyticLaw& b) {
  return integrate_half_line([&](double x) { return std::abs(a.cdf(x) - b.cdf(x)); });
}

double wasserstein1_standard_error(const AnalyticLaw& law, std::size_t n) {
  if (n == 0) fail(ErrorCode::EmptySample, "sample size must be >= 1");
  const double spread = integrate_half_line([&](double x) {
    const double f = law.cdf(x);
    return std::sqrt(std::max(0.0, f * (1.0 - f)));
  });
  return std::sqrt(1.0 - 2.0 / std::numbers::pi) * spread / std::sqrt(static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Convergence experiment
// ---------------------------------------------------------------------------

ConvergenceSeries convergence_experiment(const MeanFieldConfig& cfg, const ProfileTarget& target,
                                         const std::vector<double>& checkpoints) {
  const auto* ss = std::get_if<SelfSimilarProfile>(&target);
  const AnalyticLaw& law = ss ? static_cast<const AnalyticLaw&>(*ss)
                              : static_cast<const AnalyticLaw&>(std::get<ExponentialProfile>(target));
  if (ss) {
    if (std::abs(ss->alpha() - cfg.alpha) > 1e-15)
      fail(ErrorCode::PreconditionViolated, "self-similar target must use the configuration's alpha");
  } else if (cfg.alpha != 1.0) {
    fail(ErrorCode::PreconditionViolated, "exponential target requires alpha = 1");
  }

  MeanFieldConfig run = cfg;
  run.snapshot_times = checkpoints;
  ParticleSolution sol = solve_particle(run);

  ConvergenceSeries out;
  out.path = sol.path;
  out.breakdown = sol.trajectory.breakdown.occurred;
  const double xi_mean = std::accumulate(sol.initial_values.begin(), sol.initial_values.end(), 0.0) /
                         static_cast<double>(sol.initial_values.size());
  const double se = wasserstein1_standard_error(law, cfg.M);
  for (double t : checkpoints) {
    auto it = sol.trajectory.snapshots.find(t);
    if (it == sol.trajectory.snapshots.end()) continue;
    EmpiricalLaw emp(it->second);
    if (ss) emp = emp.scaled(std::sqrt(t));
    out.times.push_back(t);
    out.w1.push_back(wasserstein1(emp, law));
    out.standard_error.push_back(se);
    if (ss) out.drift.push_back(std::abs(xi_mean / (1.0 - cfg.alpha) + sol.path.at(t) - ss->c_alpha() * std::sqrt(t)));
  }
  return out;
}

}  // namespace ltsim
