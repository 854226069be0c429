#pragma once

// Mean-field limit: Picard iteration on a frozen Monte Carlo ensemble, the
// symmetric particle approximation, jump sizes and regularity diagnostics.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ltsim/finite_system.hpp"
#include "ltsim/timegrid_noise.hpp"

namespace ltsim {

/// Law of the initial condition on [0, inf).
class InitialLaw {
 public:
  enum class Kind { Dirac, Exponential, Empirical };

  static InitialLaw dirac(double x0);
  static InitialLaw exponential(double lambda);
  /// Resampled with replacement, except that a request for exactly
  /// samples.size() draws returns the values in file order.
  static InitialLaw empirical(std::vector<double> samples);

  Kind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return param_; }
  const std::vector<double>& samples() const noexcept { return samples_; }

  double mean() const;
  /// Mass at the origin.
  double atom_at_zero() const;
  double quantile(double u) const;
  std::vector<double> draw(std::size_t count, std::uint64_t seed) const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::Dirac;
  double param_ = 0.0;
  std::vector<double> samples_;
};

struct MeanFieldConfig {
  double alpha = 0.0;
  InitialLaw initial = InitialLaw::dirac(0.0);
  TimeGrid grid = TimeGrid(0.0, 1e-3, 1000);
  std::size_t M = 1000;
  double picard_tol = 1e-10;
  std::size_t picard_max_iters = 500;
  /// epsilon_0; sqrt(dt) when unset.
  std::optional<double> zero_threshold;
  std::uint64_t seed = 0;
  std::vector<double> snapshot_times;
  BoundaryMonitoring monitoring = BoundaryMonitoring::Grid;

  double epsilon0() const;
};

inline constexpr double kNoBreakdown = std::numeric_limits<double>::infinity();

struct EllPath {
  std::vector<double> times;
  std::vector<double> ell;
  /// Estimated P(X_t <= epsilon_0).
  std::vector<double> atom_mass;
  double T_breakdown = kNoBreakdown;
  double alpha = 0.0;
  std::size_t M = 0;
  double dt = 0.0;
  double epsilon0 = 0.0;

  double at(double t) const;
};

struct PicardSolution {
  EllPath path;
  /// sup_t |ell^{k+1} - ell^k| per sweep.
  std::vector<double> gaps;
  std::size_t iterations = 0;
  std::vector<std::string> warnings;
  /// Final positions of the M samples (grid end).
  std::vector<double> final_positions;
  std::vector<double> initial_values;
};

using SourceFactory = std::function<std::unique_ptr<IncrementSource>()>;

/// Fixed point of ell -> E sup_s (xi + W_s - alpha ell_s)_- on the empirical
/// measure of M frozen samples. The factory must replay identical noise on
/// every call.
PicardSolution solve_picard(const MeanFieldConfig& cfg, const SourceFactory& noise);
PicardSolution solve_picard(const MeanFieldConfig& cfg, const NoiseEnsemble& noise);
/// Streams the noise from cfg.seed instead of storing it.
PicardSolution solve_picard(const MeanFieldConfig& cfg);

struct ParticleSolution {
  EllPath path;
  SystemTrajectory trajectory;
  std::vector<double> initial_values;
};

/// Symmetric system q_ij = alpha/N with N = cfg.M and independent noise.
ParticleSolution solve_particle(const MeanFieldConfig& cfg);
/// Same, with caller-provided noise (dimension M).
ParticleSolution solve_particle(const MeanFieldConfig& cfg, IncrementSource& noise);

/// Initial values used by both solvers for a configuration.
std::vector<double> draw_initial(const MeanFieldConfig& cfg);

enum class JumpStatus { Jump, NoJump, AtomTooLarge, BracketFailure };
std::string_view to_string(JumpStatus s) noexcept;

struct JumpSolverResult {
  JumpStatus status = JumpStatus::NoJump;
  double delta = 0.0;
  double J_residual = 0.0;
};

/// J(delta) = mean (alpha - x/delta)_+ over the sample.
double jump_function(std::span<const double> sample, double alpha, double delta);
JumpSolverResult jump_size(std::span<const double> sample, double alpha);

/// First grid time with atom mass >= 1/alpha, or kNoBreakdown.
double breakdown_time(const EllPath& ell, double alpha);

/// max (ell_t - ell_s)/sqrt(t - s) over dyadic subwindows of [t_begin, t_end].
double holder_diagnostic(const EllPath& ell, double t_begin, double t_end);

}  // namespace ltsim
