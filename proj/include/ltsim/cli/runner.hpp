#pragma once

// Experiment execution: replica worker pool, serialized artifact writer,
// run manifest and exit codes.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltsim/cli/config.hpp"

namespace ltsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Owns the output directory. Every file goes through here so writes are
/// serialized and the manifest lists exactly what was produced.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::span<const double>>& columns);
  void json(const std::string& name, const nlohmann::json& value);
  /// Runs `write(path)` under the writer lock and records `name`.
  void file(const std::string& name, const std::function<void(const std::filesystem::path&)>& write);

  void record_seed(const std::string& label, std::uint64_t seed);

  /// Sorted relative names.
  std::vector<std::string> files() const;
  /// Seeds sorted by label.
  nlohmann::json seeds() const;

 private:
  void claim(const std::string& name);

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::vector<std::string> files_;
  std::vector<std::pair<std::string, std::uint64_t>> seeds_;
};

/// Runs body(i) for i in [0, count) on `threads` workers (0: hardware
/// concurrency). The first exception stops the pool and is rethrown.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

struct RunResult {
  int exit_code = kExitOk;
  std::filesystem::path output_dir;
  nlohmann::json summary;
  std::string message;
};

/// Parses and validates without running; returns diagnostics (empty when valid).
std::vector<std::string> validate(const std::filesystem::path& config, const Overrides& overrides = {});

RunResult run(const std::filesystem::path& config, const Overrides& overrides, std::ostream& log);
RunResult run(const ExperimentConfig& cfg, std::ostream& log);

std::string code_version();

}  // namespace ltsim::cli
