#pragma once

#include <iosfwd>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace ltsim::cli {

struct ExperimentConfig;
class ArtifactWriter;

struct RunContext {
  const ExperimentConfig& cfg;
  ArtifactWriter& out;
  std::ostream& log;
};

struct ExperimentInfo {
  std::string_view name;
  std::string_view description;
  /// Key overrides applied between the global defaults and the config file.
  std::vector<std::pair<std::string_view, std::string_view>> defaults;
  /// Experiment-specific validation; throws ltsim::Error.
  void (*check)(const ExperimentConfig&);
  /// Writes artifacts and returns summary statistics.
  nlohmann::json (*run)(RunContext&);
};

const std::vector<ExperimentInfo>& experiments();
const ExperimentInfo* find_experiment(std::string_view name);

}  // namespace ltsim::cli
