#pragma once

// Stationary and self-similar laws, their constants, samplers and
// Wasserstein-1 distances.

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ltsim/meanfield.hpp"

namespace ltsim {

/// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

/// Law on [0, inf) with density, CDF and quantile.
class AnalyticLaw {
 public:
  virtual ~AnalyticLaw() = default;
  virtual double density(double x) const = 0;
  virtual double cdf(double x) const = 0;
  /// Inverse CDF for u in (0, 1).
  virtual double quantile(double u) const;
  virtual double mean() const = 0;
  virtual std::string name() const = 0;
  /// Quantiles of i.i.d. uniforms from the sampler stream of `seed`.
  std::vector<double> sample(std::size_t n, std::uint64_t seed) const;
};

class ExponentialProfile final : public AnalyticLaw {
 public:
  explicit ExponentialProfile(double lambda);
  double lambda() const noexcept { return lambda_; }
  double density(double x) const override;
  double cdf(double x) const override;
  double quantile(double u) const override;
  double mean() const override { return 1.0 / lambda_; }
  std::string name() const override;

 private:
  double lambda_;
};

/// Density c exp(-c alpha x - x^2/2) on [0, inf), 0 <= alpha < 1.
class SelfSimilarProfile final : public AnalyticLaw {
 public:
  explicit SelfSimilarProfile(double alpha);
  double alpha() const noexcept { return alpha_; }
  double c_alpha() const noexcept { return c_; }
  double gamma_alpha() const noexcept { return c_ * c_ * (1.0 - alpha_); }
  double density(double x) const override;
  double cdf(double x) const override;
  double mean() const override { return c_ * (1.0 - alpha_); }
  std::string name() const override;

 private:
  double alpha_;
  double c_;
};

/// Piecewise-constant density on cells [jh, (j+1)h), e.g. a PDE snapshot.
class GridDensity final : public AnalyticLaw {
 public:
  GridDensity(double h, std::vector<double> cell_values);
  double density(double x) const override;
  double cdf(double x) const override;
  double quantile(double u) const override;
  double mean() const override;
  std::string name() const override { return "grid_density"; }
  double cell_width() const noexcept { return h_; }
  const std::vector<double>& values() const noexcept { return mu_; }

 private:
  double h_;
  std::vector<double> mu_;
  std::vector<double> cum_;  // cum_[j] = mass of cells < j
};

/// Unique c > 0 with c exp((c alpha)^2/2) sqrt(pi/2) erfc(c alpha/sqrt 2) = 1.
double solve_c_alpha(double alpha);
/// c_alpha^2 (1 - alpha).
double gamma_alpha(double alpha);

class EmpiricalLaw {
 public:
  explicit EmpiricalLaw(std::vector<double> values);
  const std::vector<double>& sorted() const noexcept { return v_; }
  std::size_t size() const noexcept { return v_.size(); }
  double mean() const;
  /// Returns the law of x / s.
  EmpiricalLaw scaled(double s) const;

 private:
  std::vector<double> v_;
};

double wasserstein1(const EmpiricalLaw& a, const EmpiricalLaw& b);
double wasserstein1(const EmpiricalLaw& a, const AnalyticLaw& b);
double wasserstein1(const AnalyticLaw& a, const EmpiricalLaw& b);
double wasserstein1(const AnalyticLaw& a, const AnalyticLaw& b);

/// Approximate standard error of the empirical-vs-analytic W1 estimator at
/// sample size n: sqrt(1 - 2/pi) * int sqrt(F (1 - F)) dx / sqrt(n).
double wasserstein1_standard_error(const AnalyticLaw& law, std::size_t n);

using ProfileTarget = std::variant<ExponentialProfile, SelfSimilarProfile>;

struct ConvergenceSeries {
  std::vector<double> times;
  std::vector<double> w1;
  /// |(1 - alpha)^{-1} E xi + ell_t - c_alpha sqrt t| (self-similar target only).
  std::vector<double> drift;
  std::vector<double> standard_error;
  EllPath path;
  bool breakdown = false;
};

/// Runs the particle system and measures the distance to the target at each
/// checkpoint; samples are divided by sqrt(t) for the self-similar target.
ConvergenceSeries convergence_experiment(const MeanFieldConfig& cfg, const ProfileTarget& target,
                                         const std::vector<double>& checkpoints);

}  // namespace ltsim
