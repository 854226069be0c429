#pragma once

// Discrete-time solver for the reflected particle system
// X = xi + W + (I - Q) L with per-step least fixed points.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "ltsim/network.hpp"
#include "ltsim/timegrid_noise.hpp"

namespace ltsim {

struct SystemConfig {
  SystemConfig(InteractionNetwork net_, std::vector<double> initial_, TimeGrid grid_)
      : net(std::move(net_)), initial(std::move(initial_)), grid(grid_) {}

  InteractionNetwork net;
  std::vector<double> initial;  ///< xi, nonnegative
  TimeGrid grid;
  /// epsilon_0; defaults to sqrt(dt) when unset.
  std::optional<double> zero_threshold;
  /// Relative fixed-point tolerance; tau_fp = fp_tolerance * max(1, ||X||_inf).
  double fp_tolerance = 1e-12;
  /// Defaults to 10 N + 100 when 0.
  std::size_t fp_max_iters = 0;
  double breakdown_rho_margin = 1e-9;
  /// Bridge monitoring needs a diagonal covariance.
  BoundaryMonitoring monitoring = BoundaryMonitoring::Grid;
  /// Seed of the per-step bridge variates.
  std::uint64_t bridge_seed = 0;
  bool record_positions = false;
  bool record_reflections = false;
  /// Times at which a copy of X is kept (snapped to the nearest grid point).
  std::vector<double> snapshot_times;

  double epsilon0() const;
  std::size_t max_iters() const;
};

struct SystemState {
  std::size_t k = 0;
  std::vector<double> X;
  std::vector<double> L;
  NodeSet zero_set;
  NodeSet active_set;
  double rho_active = kRhoEmpty;
};

enum class BreakdownTrigger { SpectralRadius, IterationDivergence, ZeroCount };
std::string_view to_string(BreakdownTrigger t) noexcept;

struct BreakdownEvent {
  bool occurred = false;
  double tau = 0.0;
  BreakdownTrigger trigger = BreakdownTrigger::SpectralRadius;
  NodeSet zero_set_at_tau;
  double rho_at_tau = kRhoEmpty;
};

struct StepDiagnostics {
  std::size_t iterations = 0;
  bool used_exact_solver = false;
  /// Largest decrease between consecutive fixed-point iterates (0 if monotone).
  double monotonicity_defect = 0.0;
};

/// State after t = t0 (zero and active sets evaluated).
SystemState initial_state(const SystemConfig& cfg);

/// Advance one grid step with the increment vector dW.
std::variant<SystemState, BreakdownEvent> step(const SystemState& state, std::span<const double> dW,
                                               const SystemConfig& cfg, StepDiagnostics* diag = nullptr);

/// Least nonnegative solution of dl_i = (y_i - sum_j q_ij dl_j)_-. Returns
/// nullopt when no finite solution exists (divergent iteration).
std::optional<std::vector<double>> least_fixed_point(const InteractionNetwork& net, std::span<const double> y,
                                                     double tolerance, std::size_t max_iters,
                                                     StepDiagnostics* diag = nullptr);

struct SystemTrajectory {
  std::vector<double> times;
  std::size_t n = 0;
  /// Row-major [times.size() x n] when recorded.
  std::vector<double> X;
  std::vector<double> L;
  std::vector<std::size_t> zero_count;
  std::vector<double> rho_active;
  /// Average reflection (1/N) sum_i L_i, summed in index order.
  std::vector<double> mean_L;
  /// Fraction of particles with X <= epsilon_0.
  std::vector<double> zero_fraction;
  std::map<double, std::vector<double>> snapshots;
  BreakdownEvent breakdown;
  std::uint64_t seed = 0;
  StepDiagnostics totals;

  std::size_t steps_recorded() const noexcept { return times.size(); }
};

SystemTrajectory simulate(const SystemConfig& cfg, IncrementSource& source);
SystemTrajectory simulate(const SystemConfig& cfg, const NoiseEnsemble& noise);

struct ComparisonReport {
  double max_position_violation = 0.0;    ///< max (X1 - X2)_+
  double max_increment_violation = 0.0;   ///< max (dL2 - dL1)_+
  double max_abs_position = 0.0;          ///< sup |X| over both systems
  std::size_t steps_compared = 0;
  bool breakdown_1 = false;
  bool breakdown_2 = false;
};

/// Runs both systems on the same increments until either breaks down.
ComparisonReport coupled_compare(const SystemConfig& cfg1, const SystemConfig& cfg2, IncrementSource& noise);

}  // namespace ltsim
