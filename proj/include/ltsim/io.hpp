#pragma once

// CSV and JSON exchange formats. CSV: comma separated, '.' decimal, one
// header row, LF line endings, doubles printed with 17 significant digits.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltsim/finite_system.hpp"
#include "ltsim/fokker_planck.hpp"
#include "ltsim/meanfield.hpp"
#include "ltsim/network.hpp"
#include "ltsim/profiles.hpp"

namespace ltsim::io {

using nlohmann::json;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const;
  std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
};

std::string format_double(double v);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::span<const double>>& columns);
CsvTable read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const json& value);
json read_json(const std::filesystem::path& path);

/// Columns t, ell, atom_mass.
void write_ell_path(const std::filesystem::path& path, const EllPath& ell);
/// {T, alpha, M, dt, epsilon0}; T is null when no breakdown occurred.
json ell_breakdown_json(const EllPath& ell);

/// Columns t, [X_1..X_N], [L_1..L_N], zero_count, rho_active.
void write_trajectory(const std::filesystem::path& path, const SystemTrajectory& tr);
/// {occurred, tau, trigger, zero_set, rho}; zero_set holds 0-based indices.
json breakdown_json(const BreakdownEvent& ev);

json regime_report_json(const RegimeReport& rep);

/// Square matrix as rows of comma-separated values after a "n=<N>" header.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// Columns x, density, cdf on n_points equally spaced points of [0, x_max].
void write_profile_table(const std::filesystem::path& path, const AnalyticLaw& law, double x_max,
                         std::size_t n_points);

/// Columns x, mu at cell centers.
void write_density(const std::filesystem::path& path, const Grid1D& grid, const DensityField& field);
/// Columns t, mu0, ell.
void write_flux_record(const std::filesystem::path& path, const FluxRecord& rec);

/// One column `x` of values.
void write_sample(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_sample(const std::filesystem::path& path);

}  // namespace ltsim::io
