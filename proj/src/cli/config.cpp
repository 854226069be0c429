#include "ltsim/cli/config.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "ltsim/cli/experiments.hpp"
#include "ltsim/error.hpp"
#include "ltsim/io.hpp"

namespace ltsim::cli {

namespace {

using K = ValueKind;

const std::vector<KeySpec> kSchema = {
    {"experiment", K::String, "", "registered experiment name (see list-experiments)"},
    {"seed", K::Int, "1", "base seed; replica i uses splitmix64(seed + i)"},
    {"replicas", K::Int, "1", "independent replicas"},
    {"threads", K::Int, "0", "worker threads for replicas (0: hardware concurrency)"},
    {"output_dir", K::String, "\"\"", "artifact directory; relative paths resolve against $LTSIM_OUTPUT_ROOT"},

    {"model.alpha", K::Float, "0.5", "interaction strength, q_ij = alpha/N"},
    {"model.alphas", K::FloatList, "[0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]",
     "interaction strengths swept by fig1_trajectories"},
    {"model.N", K::Int, "1000", "number of particles"},
    {"model.dt", K::Float, "1e-3", "time step"},
    {"model.horizon", K::Float, "1.0", "final time"},
    {"model.initial", K::String, "\"exponential\"", "initial law: exponential, dirac or file"},
    {"model.initial_param", K::Float, "1.0", "rate of the exponential law or location of the Dirac mass"},
    {"model.initial_file", K::String, "\"\"", "one-column CSV of initial values (model.initial = \"file\")"},
    {"model.epsilon0", K::Float, "", "zero-set threshold (default sqrt(dt))"},
    {"model.monitoring", K::String, "\"grid\"",
     "boundary monitoring: grid (reflect at grid points) or bridge (exact Brownian-bridge minimum per step)"},
    {"model.checkpoints", K::FloatList, "[1.0, 3.0, 10.0]", "times for distance and snapshot output"},
    {"model.record_positions", K::Bool, "false", "write every particle position in trajectory CSVs"},
    {"model.fp_tolerance", K::Float, "1e-12", "relative tolerance of the per-step fixed point"},

    {"network.matrix_file", K::String, "\"\"", "interaction matrix CSV (header n=<N>); empty: uniform alpha/N"},
    {"network.covariance_file", K::String, "\"\"", "noise covariance CSV (header n=<N>); empty: identity"},
    {"network.zero_support", K::IntList, "[]", "initial zero set for regime_classify (0-based)"},

    {"picard.M", K::Int, "10000", "samples of the mean-field Picard solver"},
    {"picard.tol", K::Float, "1e-10", "sup-norm stopping tolerance"},
    {"picard.max_iters", K::Int, "500", "iteration cap"},

    {"pde.h", K::Float, "1e-3", "cell width"},
    {"pde.x_max", K::Float, "0.0", "domain cutoff (0: automatic)"},
    {"pde.extrapolation", K::String, "\"quadratic\"", "boundary extrapolation: linear or quadratic"},
    {"pde.record_interval", K::Float, "1e-3", "spacing of the flux record (0: every step)"},

    {"poc.sizes", K::IntList, "[100, 1000, 10000]", "particle counts"},
    {"poc.reference_M", K::Int, "200000", "Picard samples of the reference solution"},
};

Value from_node(const toml::node& node, const KeySpec& spec, const std::string& where) {
  auto bad = [&]() -> Value {
    fail(ErrorCode::ConfigError, fmt::format("{}: key '{}' expects {}", where, spec.path, to_string(spec.kind)));
  };
  switch (spec.kind) {
    case K::String:
      if (auto v = node.value_exact<std::string>()) return *v;
      return bad();
    case K::Int:
      if (auto v = node.value_exact<std::int64_t>()) return *v;
      return bad();
    case K::Float:
      if (node.is_integer() || node.is_floating_point()) return *node.value<double>();
      return bad();
    case K::Bool:
      if (auto v = node.value_exact<bool>()) return *v;
      return bad();
    case K::FloatList: {
      const auto* arr = node.as_array();
      if (!arr) return bad();
      std::vector<double> out;
      for (const auto& e : *arr) {
        if (!(e.is_integer() || e.is_floating_point())) return bad();
        out.push_back(*e.value<double>());
      }
      return out;
    }
    case K::IntList: {
      const auto* arr = node.as_array();
      if (!arr) return bad();
      std::vector<std::int64_t> out;
      for (const auto& e : *arr) {
        auto v = e.value_exact<std::int64_t>();
        if (!v) return bad();
        out.push_back(*v);
      }
      return out;
    }
  }
  return bad();
}

std::string line_of(std::string_view source, const toml::source_region& r) {
  return fmt::format("{}:{}", source, r.begin.line);
}

// Flattens a parsed document into dotted keys, rejecting anything outside the schema.
void flatten(const toml::table& tbl, const std::string& prefix, std::string_view source, Settings& out,
             const std::string& origin_override = {}) {
  for (const auto& [key, node] : tbl) {
    const std::string path = prefix.empty() ? std::string(key.str()) : prefix + "." + std::string(key.str());
    const std::string where = origin_override.empty() ? line_of(source, node.source()) : origin_override;
    if (const auto* sub = node.as_table()) {
      bool is_section = false;
      for (const auto& s : key_schema())
        if (s.path.starts_with(path + ".")) is_section = true;
      if (!is_section) fail(ErrorCode::ConfigError, fmt::format("{}: unknown section '{}'", where, path));
      flatten(*sub, path, source, out, origin_override);
      continue;
    }
    const KeySpec* spec = find_key(path);
    if (!spec) fail(ErrorCode::ConfigError, fmt::format("{}: unknown key '{}'", where, path));
    out.put(path, Setting{from_node(node, *spec, where), where});
  }
}

toml::table parse_text(std::string_view text, std::string_view source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    fail(ErrorCode::ConfigError, fmt::format("{}:{}:{}: {}", source, e.source().begin.line, e.source().begin.column,
                                             e.description()));
  }
}

void layer_literal(Settings& s, std::string_view path, std::string_view literal, const std::string& origin) {
  const std::string doc = fmt::format("v = {}", literal);
  const auto tbl = parse_text(doc, origin);
  const KeySpec* spec = find_key(path);
  s.put(std::string(path), Setting{from_node(*tbl.get("v"), *spec, origin), origin});
}

void resolve_file_keys(Settings& s, const std::filesystem::path& base_dir) {
  if (base_dir.empty()) return;
  for (const auto& [key, setting] : s.entries()) {
    if (!key.ends_with("_file")) continue;
    const auto* v = std::get_if<std::string>(&setting.value);
    if (!v || v->empty() || std::filesystem::path(*v).is_absolute()) continue;
    Setting copy = setting;
    copy.value = (base_dir / *v).lexically_normal().string();
    s.put(key, std::move(copy));
  }
}

[[noreturn]] void invalid(const Settings& s, std::string_view key, const std::string& msg) {
  fail(ErrorCode::ConfigError, fmt::format("{}: {}", s.origin(key), msg));
}

std::size_t positive_count(const Settings& s, std::string_view key) {
  const auto v = s.integer(key);
  if (v < 1) invalid(s, key, fmt::format("{} must be at least 1", key));
  return static_cast<std::size_t>(v);
}

double positive_real(const Settings& s, std::string_view key) {
  const double v = s.real(key);
  if (!(v > 0.0) || !std::isfinite(v)) invalid(s, key, fmt::format("{} must be positive", key));
  return v;
}

}  // namespace

const std::vector<KeySpec>& key_schema() { return kSchema; }

const KeySpec* find_key(std::string_view path) {
  for (const auto& s : kSchema)
    if (s.path == path) return &s;
  return nullptr;
}

std::string_view to_string(ValueKind k) noexcept {
  switch (k) {
    case K::String: return "a string";
    case K::Int: return "an integer";
    case K::Float: return "a number";
    case K::Bool: return "a boolean";
    case K::FloatList: return "an array of numbers";
    case K::IntList: return "an array of integers";
  }
  return "?";
}

bool Settings::has(std::string_view key) const { return map_.find(key) != map_.end(); }

const Setting& Settings::at(std::string_view key) const {
  auto it = map_.find(key);
  if (it == map_.end()) fail(ErrorCode::ConfigError, fmt::format("missing required key '{}'", key));
  return it->second;
}

std::string Settings::str(std::string_view key) const { return std::get<std::string>(at(key).value); }
std::int64_t Settings::integer(std::string_view key) const { return std::get<std::int64_t>(at(key).value); }
double Settings::real(std::string_view key) const { return std::get<double>(at(key).value); }
bool Settings::flag(std::string_view key) const { return std::get<bool>(at(key).value); }
std::vector<double> Settings::reals(std::string_view key) const { return std::get<std::vector<double>>(at(key).value); }
std::vector<std::int64_t> Settings::integers(std::string_view key) const {
  return std::get<std::vector<std::int64_t>>(at(key).value);
}
std::optional<double> Settings::optional_real(std::string_view key) const {
  if (!has(key)) return std::nullopt;
  return real(key);
}
std::string Settings::origin(std::string_view key) const {
  auto it = map_.find(key);
  return it == map_.end() ? std::string("default") : it->second.origin;
}

nlohmann::json Settings::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, s] : map_) std::visit([&](const auto& v) { j[key] = v; }, s.value);
  return j;
}

Settings load_settings_from_string(std::string_view text, std::string_view source_name, const Overrides& overrides,
                                   const std::filesystem::path& base_dir) {
  Settings file;
  flatten(parse_text(text, source_name), "", source_name, file);
  Settings flags;
  for (const auto& assignment : overrides.set) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      fail(ErrorCode::ConfigError, fmt::format("--set {}: expected section.key=value", assignment));
    const std::string key = assignment.substr(0, eq);
    const std::string literal = assignment.substr(eq + 1);
    const KeySpec* spec = find_key(key);
    if (!spec) fail(ErrorCode::ConfigError, fmt::format("--set {}: unknown key '{}'", assignment, key));
    // Bare words are taken as strings so that --set model.monitoring=bridge works.
    const bool bare = spec->kind == K::String && (literal.empty() || (literal.front() != '"' && literal.front() != '\''));
    if (bare) flags.put(key, Setting{literal, "--set " + key});
    else layer_literal(flags, key, literal, "--set " + key);
  }
  if (overrides.seed) flags.put("seed", Setting{static_cast<std::int64_t>(*overrides.seed), "--seed"});
  if (overrides.output_dir) flags.put("output_dir", Setting{*overrides.output_dir, "--output-dir"});
  if (overrides.replicas) flags.put("replicas", Setting{*overrides.replicas, "--replicas"});
  if (overrides.threads) flags.put("threads", Setting{*overrides.threads, "--threads"});

  std::string name;
  if (flags.has("experiment")) name = flags.str("experiment");
  else if (file.has("experiment")) name = file.str("experiment");
  else fail(ErrorCode::ConfigError, fmt::format("{}: missing required key 'experiment'", source_name));
  const ExperimentInfo* info = find_experiment(name);
  if (!info) {
    const std::string where = flags.has("experiment") ? flags.origin("experiment") : file.origin("experiment");
    fail(ErrorCode::ConfigError, fmt::format("{}: unknown experiment '{}'", where, name));
  }

  Settings merged;
  for (const auto& spec : kSchema)
    if (!spec.default_toml.empty()) layer_literal(merged, spec.path, spec.default_toml, "default");
  for (const auto& [key, literal] : info->defaults) layer_literal(merged, key, literal, "experiment default");
  for (const auto& [key, s] : file.entries()) merged.put(key, s);
  resolve_file_keys(merged, base_dir);
  for (const auto& [key, s] : flags.entries()) merged.put(key, s);
  return merged;
}

Settings load_settings(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ConfigError, fmt::format("cannot open config file {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return load_settings_from_string(buf.str(), path.string(), overrides, path.parent_path());
}

MeanFieldConfig ExperimentConfig::mean_field(double a, std::size_t m, std::uint64_t seed) const {
  MeanFieldConfig c;
  c.alpha = a;
  c.initial = initial;
  c.grid = grid();
  c.M = m;
  c.seed = seed;
  c.zero_threshold = epsilon0;
  c.monitoring = monitoring;
  c.picard_tol = picard_tol;
  c.picard_max_iters = picard_max_iters;
  return c;
}

InteractionNetwork ExperimentConfig::network() const {
  const std::size_t n = matrix ? static_cast<std::size_t>(matrix->rows()) : N;
  CovarianceSpec a = covariance ? CovarianceSpec::dense(*covariance) : CovarianceSpec::identity(n);
  if (matrix) return InteractionNetwork::dense(*matrix, std::move(a));
  return InteractionNetwork::uniform(alpha, n, std::move(a));
}

ExperimentConfig resolve(const Settings& s) {
  ExperimentConfig c;
  c.settings = s;
  c.experiment = s.str("experiment");
  const ExperimentInfo* info = find_experiment(c.experiment);
  if (!info) invalid(s, "experiment", fmt::format("unknown experiment '{}'", c.experiment));

  c.base_seed = static_cast<std::uint64_t>(s.integer("seed"));
  c.replicas = positive_count(s, "replicas");
  if (s.integer("threads") < 0) invalid(s, "threads", "threads must be nonnegative");
  c.threads = static_cast<std::size_t>(s.integer("threads"));
  const std::string out = s.str("output_dir");
  c.output_dir = out.empty() ? default_output_dir(c.experiment) : std::filesystem::path(out);
  if (c.output_dir.is_relative() && !out.empty()) {
    if (const char* root = std::getenv("LTSIM_OUTPUT_ROOT"); root && *root) c.output_dir = std::filesystem::path(root) / c.output_dir;
  }

  c.alpha = s.real("model.alpha");
  if (!(c.alpha >= 0.0) || !std::isfinite(c.alpha)) invalid(s, "model.alpha", "alpha must be nonnegative");
  c.alphas = s.reals("model.alphas");
  for (double a : c.alphas)
    if (!(a >= 0.0) || !std::isfinite(a)) invalid(s, "model.alphas", "alpha must be nonnegative");
  c.N = positive_count(s, "model.N");
  c.dt = positive_real(s, "model.dt");
  c.horizon = positive_real(s, "model.horizon");
  if (c.dt > c.horizon) invalid(s, "model.dt", "dt must not exceed the horizon");

  const std::string law = s.str("model.initial");
  const double param = s.real("model.initial_param");
  if (law == "exponential") {
    if (!(param > 0.0)) invalid(s, "model.initial_param", "exponential rate must be positive");
    c.initial = InitialLaw::exponential(param);
  } else if (law == "dirac") {
    if (!(param >= 0.0)) invalid(s, "model.initial_param", "Dirac location must be nonnegative");
    c.initial = InitialLaw::dirac(param);
  } else if (law == "file") {
    const std::string f = s.str("model.initial_file");
    if (f.empty()) invalid(s, "model.initial_file", "model.initial = \"file\" needs model.initial_file");
    try {
      c.initial = InitialLaw::empirical(io::read_sample(f));
    } catch (const Error& e) {
      invalid(s, "model.initial_file", e.what());
    }
  } else {
    invalid(s, "model.initial", fmt::format("unknown initial law '{}' (exponential, dirac, file)", law));
  }

  c.epsilon0 = s.optional_real("model.epsilon0");
  if (c.epsilon0 && !(*c.epsilon0 >= 0.0)) invalid(s, "model.epsilon0", "epsilon0 must be nonnegative");
  const std::string mon = s.str("model.monitoring");
  if (mon == "grid") c.monitoring = BoundaryMonitoring::Grid;
  else if (mon == "bridge") c.monitoring = BoundaryMonitoring::Bridge;
  else invalid(s, "model.monitoring", fmt::format("unknown monitoring '{}' (grid, bridge)", mon));
  c.checkpoints = s.reals("model.checkpoints");
  for (double t : c.checkpoints)
    if (!(t > 0.0)) invalid(s, "model.checkpoints", "checkpoints must be positive");
  c.record_positions = s.flag("model.record_positions");
  c.fp_tolerance = positive_real(s, "model.fp_tolerance");

  if (const auto f = s.str("network.matrix_file"); !f.empty()) {
    try {
      c.matrix = io::read_matrix(f);
    } catch (const Error& e) {
      invalid(s, "network.matrix_file", e.what());
    }
    if ((c.matrix->array() < 0.0).any()) invalid(s, "network.matrix_file", "interaction weights must be nonnegative");
  }
  if (const auto f = s.str("network.covariance_file"); !f.empty()) {
    try {
      c.covariance = io::read_matrix(f);
    } catch (const Error& e) {
      invalid(s, "network.covariance_file", e.what());
    }
    const auto n = c.matrix ? c.matrix->rows() : static_cast<Eigen::Index>(c.N);
    if (c.covariance->rows() != n) invalid(s, "network.covariance_file", "covariance and network sizes differ");
  }
  std::vector<std::size_t> zs;
  const std::size_t n_nodes = c.matrix ? static_cast<std::size_t>(c.matrix->rows()) : c.N;
  for (auto i : s.integers("network.zero_support")) {
    if (i < 0 || static_cast<std::size_t>(i) >= n_nodes) invalid(s, "network.zero_support", "zero support index out of range");
    zs.push_back(static_cast<std::size_t>(i));
  }
  c.zero_support = NodeSet(zs);

  c.picard_M = positive_count(s, "picard.M");
  c.picard_tol = positive_real(s, "picard.tol");
  c.picard_max_iters = positive_count(s, "picard.max_iters");

  c.pde_h = positive_real(s, "pde.h");
  c.pde_x_max = s.real("pde.x_max");
  if (c.pde_x_max < 0.0) invalid(s, "pde.x_max", "x_max must be nonnegative");
  const std::string ex = s.str("pde.extrapolation");
  if (ex == "quadratic") c.pde_extrapolation = Extrapolation::Quadratic;
  else if (ex == "linear") c.pde_extrapolation = Extrapolation::Linear;
  else invalid(s, "pde.extrapolation", fmt::format("unknown extrapolation '{}' (linear, quadratic)", ex));
  c.pde_record_interval = s.real("pde.record_interval");
  if (c.pde_record_interval < 0.0) invalid(s, "pde.record_interval", "record_interval must be nonnegative");

  for (auto v : s.integers("poc.sizes")) {
    if (v < 1) invalid(s, "poc.sizes", "particle counts must be at least 1");
    c.poc_sizes.push_back(static_cast<std::size_t>(v));
  }
  c.poc_reference_M = positive_count(s, "poc.reference_M");

  if (info->check) info->check(c);
  return c;
}

std::filesystem::path default_output_dir(std::string_view experiment) {
  const char* root = std::getenv("LTSIM_OUTPUT_ROOT");
  const std::filesystem::path base = (root && *root) ? std::filesystem::path(root) : std::filesystem::path("ltsim_out");
  return base / std::string(experiment);
}

}  // namespace ltsim::cli
