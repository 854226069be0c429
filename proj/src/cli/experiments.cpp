#include "ltsim/cli/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>

#include <boost/math/distributions/normal.hpp>

#include "ltsim/cli/config.hpp"
#include "ltsim/cli/runner.hpp"
#include "ltsim/error.hpp"
#include "ltsim/io.hpp"
#include "ltsim/profiles.hpp"
#include "ltsim/seeding.hpp"

namespace ltsim::cli {

namespace {

using nlohmann::json;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string suffix(const ExperimentConfig& c, std::size_t r) { return c.replicas > 1 ? fmt::format("_r{}", r) : ""; }

std::string tag(double v) { return fmt::format("{:g}", v); }

[[noreturn]] void reject(const ExperimentConfig& c, std::string_view key, const std::string& msg) {
  fail(ErrorCode::ConfigError, fmt::format("{}: {}", c.settings.origin(key), msg));
}

std::vector<double> checkpoints_within(const ExperimentConfig& c) {
  std::vector<double> out;
  for (double t : c.checkpoints)
    if (t <= c.horizon * (1.0 + 1e-12)) out.push_back(t);
  return out;
}

void write_ell(ArtifactWriter& out, const std::string& name, const EllPath& p) {
  out.file(name, [&](const std::filesystem::path& f) { io::write_ell_path(f, p); });
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- fig1

json run_fig1(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const std::size_t tasks = c.alphas.size() * c.replicas;
  std::vector<json> rows(tasks);
  for (std::size_t r = 0; r < c.replicas; ++r) ctx.out.record_seed(fmt::format("replica={}", r), replica_seed(c.base_seed, r));
  parallel_for(tasks, c.threads, [&](std::size_t i) {
    const double a = c.alphas[i / c.replicas];
    const std::size_t r = i % c.replicas;
    const auto sol = solve_particle(c.mean_field(a, c.N, replica_seed(c.base_seed, r)));
    write_ell(ctx.out, fmt::format("ell_alpha_{}{}.csv", tag(a), suffix(c, r)), sol.path);
    if (a > 1.0) {
      json j = io::ell_breakdown_json(sol.path);
      j["particle_breakdown"] = io::breakdown_json(sol.trajectory.breakdown);
      ctx.out.json(fmt::format("breakdown_alpha_{}{}.json", tag(a), suffix(c, r)), j);
    }
    rows[i] = {{"alpha", a},
               {"replica", r},
               {"T", finite_or_null(sol.path.T_breakdown)},
               {"t_last", sol.path.times.back()},
               {"ell_last", sol.path.ell.back()}};
  });
  return {{"runs", rows}};
}

// ---------------------------------------------------------------- fig2

void check_fig2(const ExperimentConfig& c) {
  if (!(c.alpha < 1.0)) reject(c, "model.alpha", "fig2_profiles needs model.alpha < 1 for the self-similar panel");
  if (c.initial.kind() != InitialLaw::Kind::Exponential)
    reject(c, "model.initial", "fig2_profiles starts the stationary panel from an exponential law");
}

json run_fig2(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const double lambda = c.initial.parameter();
  const ExponentialProfile stationary(lambda);
  const SelfSimilarProfile selfsim(c.alpha);
  ctx.out.file("stationary_profile.csv",
               [&](const auto& f) { io::write_profile_table(f, stationary, 10.0 / lambda, 1001); });
  ctx.out.file("selfsimilar_profile.csv", [&](const auto& f) { io::write_profile_table(f, selfsim, 6.0, 1001); });
  for (std::size_t r = 0; r < c.replicas; ++r) ctx.out.record_seed(fmt::format("replica={}", r), replica_seed(c.base_seed, r));

  std::vector<json> rows(2 * c.replicas);
  parallel_for(2 * c.replicas, c.threads, [&](std::size_t i) {
    const bool is_stationary = i % 2 == 0;
    const std::size_t r = i / 2;
    auto mf = c.mean_field(is_stationary ? 1.0 : c.alpha, c.N, replica_seed(c.base_seed, r));
    if (!is_stationary) mf.initial = InitialLaw::dirac(0.0);
    mf.snapshot_times = {c.horizon};
    const auto sol = solve_particle(mf);
    if (sol.trajectory.snapshots.empty())
      fail(ErrorCode::PreconditionViolated, fmt::format("breakdown at t = {} before the snapshot time", sol.trajectory.breakdown.tau));
    const auto& [t, x] = *sol.trajectory.snapshots.rbegin();
    const std::string panel = is_stationary ? "stationary" : "selfsimilar";
    std::vector<double> sample = x;
    if (!is_stationary)
      for (double& v : sample) v /= std::sqrt(t);
    ctx.out.file(fmt::format("{}_sample{}.csv", panel, suffix(c, r)), [&](const auto& f) { io::write_sample(f, sample); });
    write_ell(ctx.out, fmt::format("{}_ell{}.csv", panel, suffix(c, r)), sol.path);
    const AnalyticLaw& target = is_stationary ? static_cast<const AnalyticLaw&>(stationary) : selfsim;
    rows[i] = {{"panel", panel},
               {"replica", r},
               {"t", t},
               {"w1", wasserstein1(EmpiricalLaw(sample), target)},
               {"w1_standard_error", wasserstein1_standard_error(target, sample.size())}};
  });
  return {{"panels", rows}, {"c_alpha", selfsim.c_alpha()}, {"gamma_alpha", selfsim.gamma_alpha()}};
}

// ---------------------------------------------------------------- regime_classify

void check_regime(const ExperimentConfig& c) {
  if (!c.matrix) reject(c, "network.matrix_file", "regime_classify needs network.matrix_file");
  if (c.matrix->rows() > 16)
    fail(ErrorCode::TooLarge, fmt::format("{}: regime_classify enumerates all subsets and supports N <= 16 (got {})",
                                          c.settings.origin("network.matrix_file"), c.matrix->rows()));
  factor_covariance(c.network().covariance());
}

json run_regime(RunContext& ctx) {
  const auto rep = classify_regime(ctx.cfg.network(), ctx.cfg.zero_support);
  const json j = io::regime_report_json(rep);
  ctx.out.json("regime.json", j);
  return {{"regime", j["regime"]}, {"finite_breakdown", j["finite_breakdown"]}, {"rho_active", j["rho_active"]}};
}

// ---------------------------------------------------------------- particle_system

void check_particle(const ExperimentConfig& c) {
  const auto net = c.network();
  factor_covariance(net.covariance());
  if (c.monitoring == BoundaryMonitoring::Bridge && !net.covariance().is_scaled_identity()) {
    const auto& a = *c.covariance;
    if (!(a - Eigen::MatrixXd(a.diagonal().asDiagonal())).isZero(0.0))
      reject(c, "model.monitoring", "bridge monitoring needs a diagonal covariance");
  }
  if (c.initial.kind() == InitialLaw::Kind::Empirical && c.initial.samples().size() != net.size() && c.matrix)
    reject(c, "model.initial_file", "initial file length must equal the network size");
}

json run_particle(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto net = c.network();
  const auto grid = c.grid();
  const auto snaps = checkpoints_within(c);
  std::vector<json> rows(c.replicas);
  parallel_for(c.replicas, c.threads, [&](std::size_t r) {
    const std::uint64_t seed = replica_seed(c.base_seed, r);
    ctx.out.record_seed(fmt::format("replica={}", r), seed);
    SystemConfig sc(net, c.initial.draw(net.size(), seed), grid);
    sc.zero_threshold = c.epsilon0;
    sc.fp_tolerance = c.fp_tolerance;
    sc.monitoring = c.monitoring;
    sc.bridge_seed = seed;
    sc.record_positions = c.record_positions;
    sc.snapshot_times = snaps;
    NoiseStream noise(grid, net.covariance(), seed);
    const auto tr = simulate(sc, noise);
    const std::string sfx = suffix(c, r);
    ctx.out.file(fmt::format("trajectory{}.csv", sfx), [&](const auto& f) { io::write_trajectory(f, tr); });
    ctx.out.csv(fmt::format("reflection{}.csv", sfx), {"t", "mean_L", "zero_fraction"},
                {tr.times, tr.mean_L, tr.zero_fraction});
    ctx.out.json(fmt::format("breakdown{}.json", sfx), io::breakdown_json(tr.breakdown));
    for (const auto& [t, x] : tr.snapshots)
      ctx.out.file(fmt::format("snapshot_t{}{}.csv", tag(t), sfx), [&](const auto& f) { io::write_sample(f, x); });
    rows[r] = {{"replica", r},
               {"breakdown", tr.breakdown.occurred},
               {"tau", tr.breakdown.occurred ? json(tr.breakdown.tau) : json(nullptr)},
               {"mean_L_last", tr.mean_L.back()}};
  });
  std::size_t broke = 0;
  for (const auto& r : rows) broke += r["breakdown"].get<bool>();
  return {{"replicas", rows}, {"breakdown_fraction", static_cast<double>(broke) / static_cast<double>(c.replicas)}};
}

// ---------------------------------------------------------------- mean_field

void check_picard(const ExperimentConfig& c) {
  if (c.alpha > 1.0)
    reject(c, "model.alpha", "the Picard solver needs alpha <= 1; use particle_system for supercritical runs");
}

json run_mean_field(RunContext& ctx) {
  const auto& c = ctx.cfg;
  std::vector<json> rows(c.replicas);
  parallel_for(c.replicas, c.threads, [&](std::size_t r) {
    const std::uint64_t seed = replica_seed(c.base_seed, r);
    ctx.out.record_seed(fmt::format("replica={}", r), seed);
    const auto sol = solve_picard(c.mean_field(c.alpha, c.picard_M, seed));
    const std::string sfx = suffix(c, r);
    write_ell(ctx.out, fmt::format("ell{}.csv", sfx), sol.path);
    std::vector<double> it(sol.gaps.size());
    for (std::size_t k = 0; k < it.size(); ++k) it[k] = static_cast<double>(k + 1);
    ctx.out.csv(fmt::format("picard_gaps{}.csv", sfx), {"iteration", "gap"}, {it, sol.gaps});
    ctx.out.file(fmt::format("final_sample{}.csv", sfx), [&](const auto& f) { io::write_sample(f, sol.final_positions); });
    rows[r] = {{"replica", r},
               {"iterations", sol.iterations},
               {"warnings", sol.warnings},
               {"ell_last", sol.path.ell.back()},
               {"T", finite_or_null(sol.path.T_breakdown)}};
  });
  return {{"replicas", rows}};
}

// ---------------------------------------------------------------- fokker_planck

json run_fokker_planck(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const double x_max = c.pde_x_max > 0.0 ? c.pde_x_max : default_x_max(c.initial, c.horizon);
  const auto grid = Grid1D::with_width(x_max, c.pde_h);
  FpOptions opt;
  opt.extrapolation = c.pde_extrapolation;
  opt.snapshot_times = checkpoints_within(c);
  opt.record_interval = c.pde_record_interval;
  const auto res = fp_solve(c.initial, c.alpha, c.horizon, grid, opt);
  ctx.out.file("flux.csv", [&](const auto& f) { io::write_flux_record(f, res.flux); });
  for (const auto& [t, field] : res.snapshots)
    ctx.out.file(fmt::format("density_t{}.csv", tag(t)), [&](const auto& f) { io::write_density(f, grid, field); });
  ctx.out.file("density_final.csv", [&](const auto& f) { io::write_density(f, grid, res.final_field); });
  json breakdown = nullptr;
  if (res.breakdown) breakdown = {{"t", res.breakdown->t}, {"mu0", res.breakdown->mu0}};
  return {{"x_max", grid.x_max},
          {"h", grid.h()},
          {"steps", res.steps},
          {"t_final", res.final_field.t},
          {"ell_final", res.flux.ell.empty() ? json(nullptr) : json(res.flux.ell.back())},
          {"mass_error_max", res.mass_error_max},
          {"renormalized_mass", res.renormalization.cumulative},
          {"tail_mass_max", res.tail_mass_max},
          {"tail_check_passed", res.tail_check_passed},
          {"breakdown", breakdown}};
}

// ---------------------------------------------------------------- convergence

ProfileTarget convergence_target(const ExperimentConfig& c) {
  if (c.alpha == 1.0 && c.initial.kind() == InitialLaw::Kind::Exponential) return ExponentialProfile(c.initial.parameter());
  if (c.alpha < 1.0 && c.initial.kind() == InitialLaw::Kind::Dirac && c.initial.parameter() == 0.0)
    return SelfSimilarProfile(c.alpha);
  reject(c, "model.alpha",
         "convergence needs alpha = 1 with an exponential initial law, or alpha < 1 started at the origin");
}

void check_convergence(const ExperimentConfig& c) {
  convergence_target(c);
  if (checkpoints_within(c).empty()) reject(c, "model.checkpoints", "no checkpoint lies within the horizon");
}

json run_convergence(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto target = convergence_target(c);
  const auto cps = checkpoints_within(c);
  std::vector<json> rows(c.replicas);
  parallel_for(c.replicas, c.threads, [&](std::size_t r) {
    const std::uint64_t seed = replica_seed(c.base_seed, r);
    ctx.out.record_seed(fmt::format("replica={}", r), seed);
    const auto s = convergence_experiment(c.mean_field(c.alpha, c.N, seed), target, cps);
    const std::string sfx = suffix(c, r);
    std::vector<std::string> header{"t", "w1", "standard_error"};
    std::vector<std::span<const double>> cols{s.times, s.w1, s.standard_error};
    if (!s.drift.empty()) {
      header.emplace_back("drift");
      cols.emplace_back(s.drift);
    }
    ctx.out.csv(fmt::format("convergence{}.csv", sfx), header, cols);
    write_ell(ctx.out, fmt::format("ell{}.csv", sfx), s.path);
    rows[r] = {{"replica", r}, {"times", s.times}, {"w1", s.w1}, {"breakdown", s.breakdown}};
  });
  return {{"replicas", rows}};
}

// ---------------------------------------------------------------- breakdown_law

void check_breakdown_law(const ExperimentConfig& c) {
  if (c.alpha != 1.0) reject(c, "model.alpha", "breakdown_law studies the critical case alpha = 1");
  if (c.initial.kind() != InitialLaw::Kind::Dirac || c.initial.parameter() <= 0.0)
    reject(c, "model.initial", "breakdown_law starts every particle at the same positive point (initial = \"dirac\")");
}

json run_breakdown_law(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto grid = c.grid();
  const double x0 = c.initial.parameter();
  std::vector<double> tau(c.replicas), index(c.replicas);
  parallel_for(c.replicas, c.threads, [&](std::size_t r) {
    const std::uint64_t seed = replica_seed(c.base_seed, r);
    ctx.out.record_seed(fmt::format("replica={}", r), seed);
    SystemConfig sc(InteractionNetwork::uniform(1.0, c.N), std::vector<double>(c.N, x0), grid);
    sc.zero_threshold = c.epsilon0;
    sc.monitoring = c.monitoring;
    sc.bridge_seed = seed;
    NoiseStream noise(grid, CovarianceSpec::identity(c.N), seed);
    const auto tr = simulate(sc, noise);
    tau[r] = tr.breakdown.occurred ? tr.breakdown.tau : std::numeric_limits<double>::infinity();
    index[r] = static_cast<double>(r);
  });
  ctx.out.csv("breakdown_times.csv", {"replica", "tau"}, {index, tau});
  const double hits = static_cast<double>(std::count_if(tau.begin(), tau.end(), [](double t) { return std::isfinite(t); }));
  const double p = hits / static_cast<double>(c.replicas);
  // The particle sum is N x0 + sqrt(N) B, so P(tau <= T) = 2 (1 - Phi(x0 sqrt(N / T))).
  const boost::math::normal_distribution<double> phi;
  const double predicted = 2.0 * boost::math::cdf(boost::math::complement(phi, x0 * std::sqrt(c.N / c.horizon)));
  return {{"probability", p},
          {"standard_error", std::sqrt(p * (1.0 - p) / static_cast<double>(c.replicas))},
          {"predicted", predicted},
          {"replicas", c.replicas}};
}

// ---------------------------------------------------------------- poc_rate

void check_poc(const ExperimentConfig& c) {
  check_picard(c);
  if (c.poc_sizes.size() < 2) reject(c, "poc.sizes", "poc_rate needs at least two particle counts");
}

json run_poc(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const std::size_t sizes = c.poc_sizes.size();
  const std::uint64_t ref_seed = replica_seed(c.base_seed, sizes * c.replicas);
  ctx.out.record_seed("reference", ref_seed);
  const auto ref = solve_picard(c.mean_field(c.alpha, c.poc_reference_M, ref_seed));
  write_ell(ctx.out, "poc_reference_ell.csv", ref.path);

  std::vector<double> n_col(sizes * c.replicas), r_col(sizes * c.replicas), err(sizes * c.replicas);
  parallel_for(sizes * c.replicas, c.threads, [&](std::size_t i) {
    const std::size_t n = c.poc_sizes[i / c.replicas];
    const std::size_t r = i % c.replicas;
    const std::uint64_t seed = replica_seed(c.base_seed, i);
    ctx.out.record_seed(fmt::format("N={}/replica={}", n, r), seed);
    const auto sol = solve_particle(c.mean_field(c.alpha, n, seed));
    double sup = 0.0;
    for (std::size_t k = 0; k < sol.path.ell.size(); ++k) sup = std::max(sup, std::abs(sol.path.ell[k] - ref.path.ell[k]));
    n_col[i] = static_cast<double>(n);
    r_col[i] = static_cast<double>(r);
    err[i] = sup;
  });
  ctx.out.csv("poc_errors.csv", {"N", "replica", "sup_error"}, {n_col, r_col, err});

  std::vector<double> ns(sizes), med(sizes), lx(sizes), ly(sizes);
  for (std::size_t j = 0; j < sizes; ++j) {
    ns[j] = static_cast<double>(c.poc_sizes[j]);
    med[j] = median({err.begin() + j * c.replicas, err.begin() + (j + 1) * c.replicas});
    lx[j] = std::log(ns[j]);
    ly[j] = std::log(med[j]);
  }
  ctx.out.csv("poc_summary.csv", {"N", "median_sup_error"}, {ns, med});
  double mx = 0, my = 0;
  for (std::size_t j = 0; j < sizes; ++j) {
    mx += lx[j] / sizes;
    my += ly[j] / sizes;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t j = 0; j < sizes; ++j) {
    sxy += (lx[j] - mx) * (ly[j] - my);
    sxx += (lx[j] - mx) * (lx[j] - mx);
  }
  return {{"slope", sxy / sxx}, {"N", ns}, {"median_sup_error", med}, {"reference_iterations", ref.iterations}};
}

const std::vector<ExperimentInfo> kRegistry = {
    {"fig1_trajectories",
     "ell paths of the uniform particle system for each alpha in model.alphas; breakdown JSON for alpha > 1",
     {{"model.N", "100000"}},
     nullptr,
     run_fig1},
    {"fig2_profiles",
     "empirical laws at the horizon against the stationary (alpha = 1) and self-similar profiles",
     {{"model.N", "100000"}, {"model.dt", "1e-2"}, {"model.horizon", "10.0"}, {"model.monitoring", "\"bridge\""}},
     check_fig2,
     run_fig2},
    {"regime_classify", "finite-time breakdown classification of a small interaction matrix", {}, check_regime,
     run_regime},
    {"particle_system", "trajectory of a particle system with uniform or file-given weights", {}, check_particle,
     run_particle},
    {"mean_field", "Picard solution of the mean-field reflection path (alpha <= 1)", {}, check_picard, run_mean_field},
    {"fokker_planck", "finite-volume solution of the nonlinear Fokker-Planck equation", {{"model.initial", "\"exponential\""}},
     nullptr, run_fokker_planck},
    {"convergence", "Wasserstein-1 distance to the stationary or self-similar profile at checkpoints",
     {{"model.N", "10000"}, {"model.dt", "1e-2"}, {"model.horizon", "10.0"}},
     check_convergence,
     run_convergence},
    {"breakdown_law", "empirical breakdown probability of the critical symmetric system against its closed form",
     {{"model.alpha", "1.0"},
      {"model.N", "10"},
      {"model.horizon", "10.0"},
      {"model.initial", "\"dirac\""},
      {"model.initial_param", "1.0"},
      {"replicas", "2000"}},
     check_breakdown_law,
     run_breakdown_law},
    {"poc_rate", "sup-error of the particle ell path against a Picard reference, and its log-log slope in N",
     {{"model.alpha", "0.5"}, {"model.dt", "1e-2"}, {"replicas", "20"}},
     check_poc,
     run_poc},
};

}  // namespace

const std::vector<ExperimentInfo>& experiments() { return kRegistry; }

const ExperimentInfo* find_experiment(std::string_view name) {
  for (const auto& e : kRegistry)
    if (e.name == name) return &e;
  return nullptr;
}

}  // namespace ltsim::cli
