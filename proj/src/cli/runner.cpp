#include "ltsim/cli/runner.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <ostream>
#include <thread>

#include "ltsim/cli/experiments.hpp"
#include "ltsim/error.hpp"
#include "ltsim/io.hpp"
#include "ltsim/seeding.hpp"

#ifndef LTSIM_VERSION
#define LTSIM_VERSION "unknown"
#endif
#ifndef LTSIM_GIT_REV
#define LTSIM_GIT_REV "unknown"
#endif

namespace ltsim::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kFailure = "failure.json";

// Removes the artifacts of a previous run; refuses to touch foreign files.
void prepare_output_dir(const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path manifest = dir / kManifest;
  if (fs::exists(manifest)) {
    const auto old = io::read_json(manifest);
    if (old.contains("files"))
      for (const auto& f : old["files"]) fs::remove(dir / f.get<std::string>());
    fs::remove(manifest);
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_directory()) continue;
    fail(ErrorCode::ConfigError,
         fmt::format("output directory {} holds files not produced by a previous run (e.g. {})", dir.string(),
                     fs::relative(entry.path(), dir).string()));
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ArtifactWriter::ArtifactWriter(fs::path root) : root_(std::move(root)) {}

void ArtifactWriter::claim(const std::string& name) {
  if (name.empty() || fs::path(name).is_absolute() || name.find("..") != std::string::npos)
    fail(ErrorCode::InvalidArgument, fmt::format("invalid artifact name '{}'", name));
  if (name == kManifest || std::find(files_.begin(), files_.end(), name) != files_.end())
    fail(ErrorCode::InvalidArgument, fmt::format("artifact '{}' written twice", name));
  files_.push_back(name);
}

void ArtifactWriter::file(const std::string& name, const std::function<void(const fs::path&)>& write) {
  std::lock_guard lock(mu_);
  claim(name);
  const fs::path p = root_ / name;
  fs::create_directories(p.parent_path());
  write(p);
}

void ArtifactWriter::csv(const std::string& name, const std::vector<std::string>& header,
                         const std::vector<std::span<const double>>& columns) {
  file(name, [&](const fs::path& p) { io::write_csv(p, header, columns); });
}

void ArtifactWriter::json(const std::string& name, const nlohmann::json& value) {
  file(name, [&](const fs::path& p) { io::write_json(p, value); });
}

void ArtifactWriter::record_seed(const std::string& label, std::uint64_t seed) {
  std::lock_guard lock(mu_);
  seeds_.emplace_back(label, seed);
}

std::vector<std::string> ArtifactWriter::files() const {
  std::lock_guard lock(mu_);
  auto out = files_;
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json ArtifactWriter::seeds() const {
  std::lock_guard lock(mu_);
  auto s = seeds_;
  std::sort(s.begin(), s.end());
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [label, seed] : s) j.push_back({{"label", label}, {"seed", seed}});
  return j;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first;
  std::mutex err_mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        while (!stop.load()) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count) break;
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!first) first = std::current_exception();
            stop = true;
          }
        }
      });
  }
  if (first) std::rethrow_exception(first);
}

std::string code_version() { return fmt::format("{}+{}", LTSIM_VERSION, LTSIM_GIT_REV); }

std::vector<std::string> validate(const fs::path& config, const Overrides& overrides) {
  try {
    resolve(load_settings(config, overrides));
  } catch (const Error& e) {
    return {std::string(e.what())};
  }
  return {};
}

RunResult run(const fs::path& config, const Overrides& overrides, std::ostream& log) {
  std::optional<ExperimentConfig> cfg;
  try {
    cfg = resolve(load_settings(config, overrides));
  } catch (const Error& e) {
    return {kExitValidation, {}, nullptr, std::string(e.what())};
  }
  return run(*cfg, log);
}

RunResult run(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  res.output_dir = cfg.output_dir;
  try {
    prepare_output_dir(cfg.output_dir);
  } catch (const Error& e) {
    res.exit_code = kExitValidation;
    res.message = std::string(e.what());
    return res;
  } catch (const fs::filesystem_error& e) {
    res.exit_code = kExitValidation;
    res.message = e.what();
    return res;
  }

  const ExperimentInfo* info = find_experiment(cfg.experiment);
  ArtifactWriter out(cfg.output_dir);
  RunContext ctx{cfg, out, log};
  log << fmt::format("{}: {} replica(s), seed {}, output {}\n", cfg.experiment, cfg.replicas, cfg.base_seed,
                     cfg.output_dir.string());
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_timestamp();
  nlohmann::json failure;
  try {
    res.summary = info->run(ctx);
  } catch (const Error& e) {
    failure = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
  } catch (const std::exception& e) {
    failure = {{"error", "Exception"}, {"message", e.what()}};
  }
  if (!failure.is_null()) {
    failure["experiment"] = cfg.experiment;
    try {
      out.json(kFailure, failure);
    } catch (const std::exception&) {
    }
    res.exit_code = kExitNumerical;
    res.message = failure["message"].get<std::string>();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::json manifest{
      {"experiment", cfg.experiment},
      {"status", failure.is_null() ? "ok" : "failed"},
      {"code_version", code_version()},
      {"config", cfg.settings.to_json()},
      {"seeding",
       {{"base_seed", cfg.base_seed},
        {"rule", "replica i uses splitmix64(base_seed + i); noise, initial values and bridge variates are "
                 "separate streams keyed by that seed"}}},
      {"seeds", out.seeds()},
      {"started_utc", started},
      {"wall_clock_seconds", wall},
      {"threads", cfg.threads},
      {"files", out.files()},
      {"summary", res.summary},
  };
  io::write_json(cfg.output_dir / kManifest, manifest);
  return res;
}

}  // namespace ltsim::cli
