#pragma once

// Experiment configuration: a TOML file layered over per-experiment and
// global defaults, with command-line overrides on top.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltsim/fokker_planck.hpp"
#include "ltsim/meanfield.hpp"
#include "ltsim/network.hpp"

namespace ltsim::cli {

enum class ValueKind { String, Int, Float, Bool, FloatList, IntList };

/// One documented configuration key. `default_toml` is a TOML literal; an
/// empty literal means the key is unset unless given.
struct KeySpec {
  std::string_view path;
  ValueKind kind;
  std::string_view default_toml;
  std::string_view doc;
};

const std::vector<KeySpec>& key_schema();
const KeySpec* find_key(std::string_view path);
std::string_view to_string(ValueKind k) noexcept;

using Value = std::variant<std::string, std::int64_t, double, bool, std::vector<double>, std::vector<std::int64_t>>;

struct Setting {
  Value value;
  /// "default", "experiment default", "<file>:<line>" or "--set".
  std::string origin;
};

/// Resolved key/value store with provenance.
class Settings {
 public:
  bool has(std::string_view key) const;
  const Setting& at(std::string_view key) const;
  void put(std::string key, Setting s) { map_[std::move(key)] = std::move(s); }

  std::string str(std::string_view key) const;
  std::int64_t integer(std::string_view key) const;
  double real(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::vector<double> reals(std::string_view key) const;
  std::vector<std::int64_t> integers(std::string_view key) const;
  std::optional<double> optional_real(std::string_view key) const;
  std::string origin(std::string_view key) const;

  nlohmann::json to_json() const;
  const std::map<std::string, Setting, std::less<>>& entries() const noexcept { return map_; }

 private:
  std::map<std::string, Setting, std::less<>> map_;
};

/// Command-line overrides.
struct Overrides {
  std::vector<std::string> set;  ///< "section.key=value", value in TOML syntax
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::int64_t> replicas;
  std::optional<std::int64_t> threads;
};

/// Parses `path` and layers it over the defaults. Throws ConfigError with
/// file and line for syntax errors, unknown keys and type mismatches.
Settings load_settings(const std::filesystem::path& path, const Overrides& overrides = {});
Settings load_settings_from_string(std::string_view text, std::string_view source_name,
                                   const Overrides& overrides = {},
                                   const std::filesystem::path& base_dir = {});

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t base_seed = 1;
  std::size_t replicas = 1;
  std::size_t threads = 0;
  std::filesystem::path output_dir;

  double alpha = 0.5;
  std::vector<double> alphas;
  std::size_t N = 1000;
  double dt = 1e-3;
  double horizon = 1.0;
  InitialLaw initial = InitialLaw::exponential(1.0);
  std::optional<double> epsilon0;
  BoundaryMonitoring monitoring = BoundaryMonitoring::Grid;
  std::vector<double> checkpoints;
  bool record_positions = false;
  double fp_tolerance = 1e-12;

  std::optional<Eigen::MatrixXd> matrix;
  std::optional<Eigen::MatrixXd> covariance;
  NodeSet zero_support;

  std::size_t picard_M = 10000;
  double picard_tol = 1e-10;
  std::size_t picard_max_iters = 500;

  double pde_h = 1e-3;
  double pde_x_max = 0.0;
  Extrapolation pde_extrapolation = Extrapolation::Quadratic;
  double pde_record_interval = 0.0;

  std::vector<std::size_t> poc_sizes;
  std::size_t poc_reference_M = 200000;

  Settings settings;

  TimeGrid grid() const { return TimeGrid::until(horizon, dt); }
  MeanFieldConfig mean_field(double a, std::size_t m, std::uint64_t seed) const;
  /// Dense network from the matrix file, or the uniform one alpha/N.
  InteractionNetwork network() const;
};

/// Builds and validates the typed configuration (ConfigError / TooLarge /
/// Unsupported on failure, with the offending key's origin in the message).
ExperimentConfig resolve(const Settings& settings);

/// Default output directory for `experiment`: $LTSIM_OUTPUT_ROOT/<name>, or
/// ./ltsim_out/<name> when the variable is unset.
std::filesystem::path default_output_dir(std::string_view experiment);

}  // namespace ltsim::cli
