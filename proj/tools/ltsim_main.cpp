#include <fmt/format.h>

#include <iostream>

#include <CLI11.hpp>

#include "ltsim/cli/config.hpp"
#include "ltsim/cli/experiments.hpp"
#include "ltsim/cli/runner.hpp"

namespace {

void add_overrides(CLI::App* cmd, std::string& config, ltsim::cli::Overrides& ov) {
  cmd->add_option("config", config, "experiment config (TOML)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", ov.set, "override a key: section.key=value (TOML value syntax)");
  cmd->add_option("--seed", ov.seed, "base seed");
  cmd->add_option("--output-dir", ov.output_dir, "artifact directory");
  cmd->add_option("--replicas", ov.replicas, "number of replicas");
  cmd->add_option("--threads", ov.threads, "worker threads (0: all cores)");
}

void print_keys() {
  for (const auto& k : ltsim::cli::key_schema())
    std::cout << fmt::format("  {:<24} = {:<52} {} ({})\n", k.path, k.default_toml.empty() ? "(unset)" : k.default_toml,
                             k.doc, ltsim::cli::to_string(k.kind));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reflected particle systems with local-time interaction: experiment runner"};
  app.require_subcommand(1);

  std::string config;
  ltsim::cli::Overrides ov;
  auto* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  add_overrides(run, config, ov);
  auto* validate = app.add_subcommand("validate", "parse and validate a config without running it");
  add_overrides(validate, config, ov);
  bool keys = false;
  auto* list = app.add_subcommand("list-experiments", "list registered experiments");
  list->add_flag("--keys", keys, "also print every configuration key with its default");

  CLI11_PARSE(app, argc, argv);

  if (*list) {
    for (const auto& e : ltsim::cli::experiments()) std::cout << fmt::format("{:<20} {}\n", e.name, e.description);
    if (keys) {
      std::cout << "\nconfiguration keys:\n";
      print_keys();
    }
    return 0;
  }
  if (*validate) {
    const auto report = ltsim::cli::validate(config, ov);
    for (const auto& line : report) std::cerr << line << '\n';
    return report.empty() ? ltsim::cli::kExitOk : ltsim::cli::kExitValidation;
  }
  const auto res = ltsim::cli::run(config, ov, std::cerr);
  if (res.exit_code != ltsim::cli::kExitOk) std::cerr << res.message << '\n';
  if (!res.output_dir.empty()) std::cerr << "artifacts: " << res.output_dir.string() << '\n';
  return res.exit_code;
}
