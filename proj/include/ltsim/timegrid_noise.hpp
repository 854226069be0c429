#pragma once

// Time grids, correlated Brownian increments and the one-dimensional
// Skorokhod map.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ltsim/error.hpp"

namespace ltsim {

/// Uniform time grid t_k = t0 + k*dt, k = 0..n_steps.
class TimeGrid {
 public:
  TimeGrid(double t0, double dt, std::size_t n_steps);

  /// Grid on [0, horizon] with the step count rounded to the nearest integer.
  static TimeGrid until(double horizon, double dt);

  double t0() const noexcept { return t0_; }
  double dt() const noexcept { return dt_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  double time(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) * dt_; }
  double horizon() const noexcept { return time(n_steps_); }

  /// Index of the grid point closest to t (clamped to the grid).
  std::size_t index_of(double t) const noexcept;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double t0_;
  double dt_;
  std::size_t n_steps_;
};

/// Per-unit-time covariance of an N-dimensional Brownian motion. Large
/// systems almost always use a multiple of the identity, which is stored
/// without materializing an N x N matrix.
class CovarianceSpec {
 public:
  static CovarianceSpec identity(std::size_t n, double variance = 1.0);
  /// Validates symmetry (||A - A^T||_max <= 1e-12 ||A||_max) and a_ii >= 0.
  static CovarianceSpec dense(Eigen::MatrixXd a);

  std::size_t dimension() const noexcept { return n_; }
  bool is_scaled_identity() const noexcept { return !dense_.has_value(); }
  /// Variance of the scaled-identity form (only meaningful if is_scaled_identity()).
  double identity_variance() const noexcept { return variance_; }
  double entry(std::size_t i, std::size_t j) const;
  double diagonal(std::size_t i) const { return entry(i, i); }
  /// Materializes A; throws TooLarge beyond 4096 dimensions.
  Eigen::MatrixXd matrix() const;
  /// A[I] for a sorted index list.
  Eigen::MatrixXd principal_minor(std::span<const std::size_t> idx) const;

 private:
  CovarianceSpec() = default;
  std::size_t n_ = 0;
  double variance_ = 1.0;
  std::optional<Eigen::MatrixXd> dense_;
};

/// F with F F^T = A. Scaled identities keep the diagonal form.
class CorrelationFactor {
 public:
  static CorrelationFactor scaled_identity(std::size_t n, double scale);
  static CorrelationFactor dense(Eigen::MatrixXd f);

  std::size_t dimension() const noexcept { return n_; }
  bool is_diagonal() const noexcept { return !dense_.has_value(); }
  double scale() const noexcept { return scale_; }
  Eigen::MatrixXd matrix() const;
  /// Numerical rank (count of columns with nonzero norm).
  std::size_t rank() const;

  /// out = scale_factor * F * z.
  void apply(std::span<const double> z, double scale_factor, std::span<double> out) const;

 private:
  CorrelationFactor() = default;
  std::size_t n_ = 0;
  double scale_ = 1.0;
  std::optional<Eigen::MatrixXd> dense_;
};

/// Factor A through a symmetric eigenvalue check and a pivoted LDL^T
/// decomposition. Eigenvalues in [-1e-10 ||A||, 0] and the matching pivots
/// are clamped to zero, so singular covariances keep their rank.
CorrelationFactor factor_covariance(const CovarianceSpec& a);

/// Produces rows of increments sequentially. Implementations must be
/// deterministic: the k-th call to next() always yields the same row.
class IncrementSource {
 public:
  virtual ~IncrementSource() = default;
  virtual const TimeGrid& grid() const noexcept = 0;
  virtual std::size_t dimension() const noexcept = 0;
  /// Fills `out` (length dimension()) with the next row.
  virtual void next(std::span<double> out) = 0;
};

/// On-the-fly generator: row k = sqrt(dt) * F * z_k with z_k i.i.d. N(0, I).
class NoiseStream final : public IncrementSource {
 public:
  NoiseStream(const TimeGrid& grid, CorrelationFactor factor, std::uint64_t seed);
  NoiseStream(const TimeGrid& grid, const CovarianceSpec& a, std::uint64_t seed);

  const TimeGrid& grid() const noexcept override { return grid_; }
  std::size_t dimension() const noexcept override { return factor_.dimension(); }
  void next(std::span<double> out) override;

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t rows_emitted() const noexcept { return emitted_; }

 private:
  TimeGrid grid_;
  CorrelationFactor factor_;
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::vector<double> z_;
  std::size_t emitted_ = 0;
};

/// Materialized increments, row-major [n_steps x N]. Identical to the rows
/// a NoiseStream with the same (grid, A, seed) emits.
class NoiseEnsemble {
 public:
  NoiseEnsemble(TimeGrid grid, CorrelationFactor factor, std::uint64_t seed,
                std::vector<double> increments);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t dimension() const noexcept { return factor_.dimension(); }
  std::uint64_t seed() const noexcept { return seed_; }
  const CorrelationFactor& factor() const noexcept { return factor_; }

  std::span<const double> row(std::size_t k) const;
  double increment(std::size_t k, std::size_t i) const { return row(k)[i]; }
  std::span<const double> data() const noexcept { return increments_; }

  /// Cumulative path W^i at grid index k (W_0 = 0).
  std::vector<double> path(std::size_t i) const;

  /// A source replaying the stored rows from the start.
  std::unique_ptr<IncrementSource> replay() const;

 private:
  TimeGrid grid_;
  CorrelationFactor factor_;
  std::uint64_t seed_;
  std::vector<double> increments_;
};

NoiseEnsemble sample_noise(const TimeGrid& grid, const CovarianceSpec& a, std::uint64_t seed);

struct ReflectedPath {
  std::vector<double> z;  ///< driving path
  std::vector<double> x;  ///< reflected path, x = z + l >= 0
  std::vector<double> l;  ///< cumulative reflection, nondecreasing, l_0 = 0
};

/// l_k = max_{j<=k} (z_j)_-, x_k = z_k + l_k. Throws NegativeStart if z_0 < 0.
ReflectedPath skorokhod_map(std::span<const double> z);

struct SkorokhodIncrement {
  double dl;   ///< reflection accrued over the window
  double x_t;  ///< reflected value at the window end
};

/// dl = max over window prefixes u of (x_s + sum_{k<=u} dz_k)_-,
/// x_t = x_s + sum dz + dl. Throws NegativeStart if x_s < 0.
SkorokhodIncrement skorokhod_increment(double x_s, std::span<const double> dz);

/// Where reflection is enforced within a step: only at grid points, or along
/// the Brownian bridge joining the step's endpoints (exact per-step minimum).
enum class BoundaryMonitoring { Grid, Bridge };

std::string_view to_string(BoundaryMonitoring m) noexcept;

/// Minimum of a Brownian bridge from x to y with variance var_dt over the
/// step, given e = -log U for a uniform U: (x + y - sqrt((x - y)^2 + 2 var_dt e)) / 2.
inline double bridge_minimum(double x, double y, double var_dt, double e) noexcept {
  const double u = x - y;
  return 0.5 * (x + y - std::sqrt(u * u + 2.0 * var_dt * e));
}

/// Exp(1) variates driving the bridge minima of step k.
void bridge_variates(std::uint64_t seed, std::size_t k, std::span<double> out);

}  // namespace ltsim
