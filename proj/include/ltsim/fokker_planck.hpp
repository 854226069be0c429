#pragma once

// Explicit finite-volume solver for the nonlinear Fokker-Planck equation
//   d_t mu = 1/2 d_xx mu + (alpha mu(0)/2) d_x mu  on [0, x_max],
// zero flux at both ends, with ell_t = 1/2 int_0^t mu_s(0) ds.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ltsim/meanfield.hpp"
#include "ltsim/profiles.hpp"

namespace ltsim {

struct Grid1D {
  double x_max = 10.0;
  std::size_t n_cells = 10000;

  Grid1D(double x_max_, std::size_t n_cells_);
  /// Cells of width h covering [0, x_max] (x_max rounded up to a multiple of h).
  static Grid1D with_width(double x_max, double h);

  double h() const noexcept { return x_max / static_cast<double>(n_cells); }
  double center(std::size_t j) const noexcept { return (static_cast<double>(j) + 0.5) * h(); }
};

enum class Extrapolation { Linear, Quadratic };

/// One-sided estimate of mu(0) from cell averages.
double boundary_value(const std::vector<double>& mu, Extrapolation order);

struct DensityField {
  std::vector<double> mu;  ///< cell averages
  double t = 0.0;
  double mu0 = 0.0;        ///< boundary estimate at time t

  double mass(double h) const;
};

struct FluxRecord {
  std::vector<double> times;
  std::vector<double> ell;
  std::vector<double> mu0;
};

struct RenormalizationEntry {
  double t;
  double clipped_mass;
};

struct FpStepLog {
  std::vector<RenormalizationEntry> entries;
  double cumulative = 0.0;
};

/// Largest stable step: 0.45 * min(h^2, h / (alpha mu0 / 2 + 1e-30)).
double cfl_step(double h, double alpha, double mu0);

/// One explicit conservative step. Throws CFLViolation if dt exceeds the
/// CFL bound and MassLoss once cumulative renormalization passes 1e-6.
DensityField fp_step(const DensityField& field, double alpha, double dt, double h,
                     Extrapolation order = Extrapolation::Quadratic, FpStepLog* log = nullptr);

struct FpOptions {
  Extrapolation extrapolation = Extrapolation::Quadratic;
  std::vector<double> snapshot_times;
  /// Spacing of flux-record samples (0: every step).
  double record_interval = 0.0;
  double tail_tolerance = 1e-8;
};

struct FpBreakdown {
  double t;
  double mu0;
};

struct FpResult {
  Grid1D grid;
  std::map<double, DensityField> snapshots;
  FluxRecord flux;
  DensityField final_field;
  std::optional<FpBreakdown> breakdown;
  FpStepLog renormalization;
  /// Largest mass found within one unit of x_max over the run.
  double tail_mass_max = 0.0;
  bool tail_check_passed = true;
  double initial_mass_error = 0.0;
  /// max |mass - 1| over the run.
  double mass_error_max = 0.0;
  std::size_t steps = 0;
};

/// Default cutoff max(10, 6 sqrt(horizon) + q_{1 - 1e-9}(initial)).
double default_x_max(const InitialLaw& initial, double horizon);

/// Cell averages of the initial law (Dirac mass goes to the cell holding it).
std::vector<double> project_initial(const InitialLaw& initial, const Grid1D& grid);

FpResult fp_solve(const InitialLaw& initial, double alpha, double horizon, const Grid1D& grid,
                  const FpOptions& options = {});
FpResult fp_solve(std::vector<double> initial_cells, double alpha, double horizon, const Grid1D& grid,
                  const FpOptions& options = {});

}  // namespace ltsim
