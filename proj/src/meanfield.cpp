#include "ltsim/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <fmt/format.h>

#include "ltsim/seeding.hpp"

namespace ltsim {

// ---------------------------------------------------------------------------
// Initial laws
// ---------------------------------------------------------------------------

InitialLaw InitialLaw::dirac(double x0) {
  if (!(x0 >= 0.0) || !std::isfinite(x0)) fail(ErrorCode::InvalidArgument, "Dirac location must be finite and >= 0");
  InitialLaw l;
  l.kind_ = Kind::Dirac;
  l.param_ = x0;
  return l;
}

InitialLaw InitialLaw::exponential(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorCode::InvalidArgument, "exponential rate must be > 0");
  InitialLaw l;
  l.kind_ = Kind::Exponential;
  l.param_ = lambda;
  return l;
}

InitialLaw InitialLaw::empirical(std::vector<double> samples) {
  if (samples.empty()) fail(ErrorCode::EmptySample, "empirical initial law needs at least one value");
  for (double v : samples)
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidArgument, "empirical values must be finite and >= 0");
  InitialLaw l;
  l.kind_ = Kind::Empirical;
  l.samples_ = std::move(samples);
  return l;
}

double InitialLaw::mean() const {
  switch (kind_) {
    case Kind::Dirac: return param_;
    case Kind::Exponential: return 1.0 / param_;
    case Kind::Empirical:
      return std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
  }
  return 0.0;
}

double InitialLaw::atom_at_zero() const {
  switch (kind_) {
    case Kind::Dirac: return param_ == 0.0 ? 1.0 : 0.0;
    case Kind::Exponential: return 0.0;
    case Kind::Empirical:
      return static_cast<double>(std::count(samples_.begin(), samples_.end(), 0.0)) /
             static_cast<double>(samples_.size());
  }
  return 0.0;
}

double InitialLaw::quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) fail(ErrorCode::DomainError, "quantile level outside [0, 1]");
  switch (kind_) {
    case Kind::Dirac: return param_;
    case Kind::Exponential: return u >= 1.0 ? std::numeric_limits<double>::infinity() : -std::log1p(-u) / param_;
    case Kind::Empirical: {
      std::vector<double> s = samples_;
      std::sort(s.begin(), s.end());
      const auto k = static_cast<std::size_t>(std::ceil(u * static_cast<double>(s.size())));
      return s[std::min(s.size() - 1, k == 0 ? 0 : k - 1)];
    }
  }
  return 0.0;
}

std::vector<double> InitialLaw::draw(std::size_t count, std::uint64_t seed) const {
  std::vector<double> out(count);
  switch (kind_) {
    case Kind::Dirac:
      std::fill(out.begin(), out.end(), param_);
      break;
    case Kind::Exponential: {
      auto eng = make_engine(seed, StreamTag::Initial);
      boost::random::exponential_distribution<double> dist(param_);
      for (double& v : out) v = dist(eng);
      break;
    }
    case Kind::Empirical: {
      if (count == samples_.size()) return samples_;
      auto eng = make_engine(seed, StreamTag::Initial);
      boost::random::uniform_int_distribution<std::size_t> pick(0, samples_.size() - 1);
      for (double& v : out) v = samples_[pick(eng)];
      break;
    }
  }
  return out;
}

std::string InitialLaw::describe() const {
  switch (kind_) {
    case Kind::Dirac: return fmt::format("dirac({})", param_);
    case Kind::Exponential: return fmt::format("exponential({})", param_);
    case Kind::Empirical: return fmt::format("empirical(n={})", samples_.size());
  }
  return "unknown";
}

double MeanFieldConfig::epsilon0() const { return zero_threshold ? *zero_threshold : std::sqrt(grid.dt()); }

double EllPath::at(double t) const {
  if (times.empty()) fail(ErrorCode::EmptySample, "empty ell path");
  if (t <= times.front()) return ell.front();
  if (t >= times.back()) return ell.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin());
  const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return ell[k - 1] + w * (ell[k] - ell[k - 1]);
}

std::vector<double> draw_initial(const MeanFieldConfig& cfg) { return cfg.initial.draw(cfg.M, cfg.seed); }

// ---------------------------------------------------------------------------
// Picard iteration
// ---------------------------------------------------------------------------

namespace {

void validate(const MeanFieldConfig& cfg) {
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) fail(ErrorCode::InvalidArgument, "alpha must be nonnegative");
  if (cfg.M < 1) fail(ErrorCode::InvalidArgument, "M must be >= 1");
  if (!(cfg.picard_tol > 0.0)) fail(ErrorCode::InvalidArgument, "picard_tol must be > 0");
  if (!(cfg.epsilon0() >= 0.0)) fail(ErrorCode::InvalidArgument, "zero threshold must be >= 0");
}

}  // namespace

PicardSolution solve_picard(const MeanFieldConfig& cfg, const SourceFactory& noise) {
  validate(cfg);
  PicardSolution sol;
  if (cfg.alpha > 1.0)
    fail(ErrorCode::Unsupported, fmt::format("Picard iteration needs alpha <= 1 (got {}); use the particle solver", cfg.alpha));

  const std::size_t m = cfg.M;
  const std::size_t steps = cfg.grid.n_steps();
  const double alpha = cfg.alpha;
  const double eps = cfg.epsilon0();
  const std::vector<double> xi = draw_initial(cfg);
  if (alpha == 1.0) {
    const bool all_zero = std::all_of(xi.begin(), xi.end(), [](double v) { return v == 0.0; });
    if (all_zero) fail(ErrorCode::PreconditionViolated, "alpha = 1 with all initial mass at the origin breaks down at t = 0");
    sol.warnings.push_back("alpha = 1: the Picard map is not a global contraction; convergence is monitored only");
  }

  std::vector<double> ell(steps + 1, 0.0), next(steps + 1, 0.0), atom(steps + 1, 0.0);
  std::vector<double> x(m), l(m), dw(m), e;
  const bool bridge = cfg.monitoring == BoundaryMonitoring::Bridge;
  const double dt = cfg.grid.dt();
  if (bridge) e.resize(m);
  const double inv_m = 1.0 / static_cast<double>(m);

  for (std::size_t it = 0;; ++it) {
    auto src = noise();
    if (src->dimension() != m) fail(ErrorCode::DimensionMismatch, "noise dimension differs from M");
    if (!(src->grid() == cfg.grid)) fail(ErrorCode::DimensionMismatch, "noise grid differs from configuration grid");
    x = xi;
    std::fill(l.begin(), l.end(), 0.0);
    std::size_t zeros = 0;
    for (double v : x) zeros += v <= eps ? 1 : 0;
    atom[0] = static_cast<double>(zeros) * inv_m;
    next[0] = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      src->next(dw);
      if (bridge) bridge_variates(cfg.seed, k, e);
      const double a = alpha * (ell[k + 1] - ell[k]);
      zeros = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = (x[i] + dw[i]) - a;
        if (bridge) {
          const double lo = bridge_minimum(x[i], d, dt, e[i]);
          const double push = lo < 0.0 ? -lo : 0.0;
          x[i] = d + push;
          l[i] += push;
        } else {
          x[i] = d > 0.0 ? d : 0.0;
          l[i] += d < 0.0 ? -d : 0.0;
        }
        zeros += x[i] <= eps ? 1 : 0;
      }
      double s = 0.0;
      for (double v : l) s += v;
      next[k + 1] = s / static_cast<double>(m);
      atom[k + 1] = static_cast<double>(zeros) * inv_m;
    }
    double gap = 0.0;
    for (std::size_t k = 0; k <= steps; ++k) gap = std::max(gap, std::abs(next[k] - ell[k]));
    sol.gaps.push_back(gap);
    ell.swap(next);
    sol.iterations = it + 1;
    if (gap < cfg.picard_tol || alpha == 0.0) break;
    if (it + 1 >= cfg.picard_max_iters) {
      const double prev = sol.gaps.size() > 1 ? sol.gaps[sol.gaps.size() - 2] : gap;
      fail(ErrorCode::NoConvergence,
           fmt::format("Picard iteration stopped after {} sweeps: last gaps {:.3e}, {:.3e} (tolerance {:.1e})",
                       it + 1, prev, gap, cfg.picard_tol));
    }
  }

  EllPath& p = sol.path;
  p.times.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) p.times[k] = cfg.grid.time(k);
  p.ell = ell;
  p.atom_mass = atom;
  p.alpha = alpha;
  p.M = m;
  p.dt = cfg.grid.dt();
  p.epsilon0 = eps;
  p.T_breakdown = breakdown_time(p, alpha);
  sol.final_positions = x;
  sol.initial_values = xi;
  return sol;
}

PicardSolution solve_picard(const MeanFieldConfig& cfg, const NoiseEnsemble& noise) {
  return solve_picard(cfg, [&noise]() { return noise.replay(); });
}

PicardSolution solve_picard(const MeanFieldConfig& cfg) {
  const CorrelationFactor f = CorrelationFactor::scaled_identity(cfg.M, 1.0);
  return solve_picard(cfg, [&]() { return std::make_unique<NoiseStream>(cfg.grid, f, cfg.seed); });
}

// ---------------------------------------------------------------------------
// Particle approximation
// ---------------------------------------------------------------------------

ParticleSolution solve_particle(const MeanFieldConfig& cfg, IncrementSource& noise) {
  validate(cfg);
  ParticleSolution out;
  out.initial_values = draw_initial(cfg);
  SystemConfig sc(InteractionNetwork::uniform(cfg.alpha, cfg.M), out.initial_values, cfg.grid);
  sc.zero_threshold = cfg.epsilon0();
  sc.snapshot_times = cfg.snapshot_times;
  sc.monitoring = cfg.monitoring;
  sc.bridge_seed = cfg.seed;
  out.trajectory = simulate(sc, noise);
  out.trajectory.seed = cfg.seed;

  EllPath& p = out.path;
  p.times = out.trajectory.times;
  p.ell = out.trajectory.mean_L;
  p.atom_mass = out.trajectory.zero_fraction;
  p.alpha = cfg.alpha;
  p.M = cfg.M;
  p.dt = cfg.grid.dt();
  p.epsilon0 = sc.epsilon0();
  p.T_breakdown = out.trajectory.breakdown.occurred ? out.trajectory.breakdown.tau : kNoBreakdown;
  return out;
}

ParticleSolution solve_particle(const MeanFieldConfig& cfg) {
  NoiseStream stream(cfg.grid, CorrelationFactor::scaled_identity(cfg.M, 1.0), cfg.seed);
  return solve_particle(cfg, stream);
}

// ---------------------------------------------------------------------------
// Jumps, breakdown and regularity
// ---------------------------------------------------------------------------

std::string_view to_string(JumpStatus s) noexcept {
  switch (s) {
    case JumpStatus::Jump: return "Jump";
    case JumpStatus::NoJump: return "NoJump";
    case JumpStatus::AtomTooLarge: return "AtomTooLarge";
    case JumpStatus::BracketFailure: return "BracketFailure";
  }
  return "Unknown";
}

double jump_function(std::span<const double> sample, double alpha, double delta) {
  double s = 0.0;
  for (double x : sample) s += std::max(alpha - x / delta, 0.0);
  return s / static_cast<double>(sample.size());
}

JumpSolverResult jump_size(std::span<const double> sample, double alpha) {
  if (sample.empty()) fail(ErrorCode::EmptySample, "jump solver needs a nonempty sample");
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "jump solver needs alpha > 0");
  double mean = 0.0;
  std::size_t zeros = 0;
  for (double x : sample) {
    if (!(x >= 0.0)) fail(ErrorCode::InvalidArgument, "sample values must be >= 0");
    mean += x;
    zeros += x == 0.0 ? 1 : 0;
  }
  mean /= static_cast<double>(sample.size());
  JumpSolverResult r;
  if (alpha <= 1.0) {
    r.status = JumpStatus::NoJump;
    return r;
  }
  const double atom = static_cast<double>(zeros) / static_cast<double>(sample.size());
  if (atom * alpha >= 1.0) {
    r.status = JumpStatus::AtomTooLarge;
    return r;
  }
  const double scale = mean + 1.0;
  double lo = 1e-12 * scale;
  double hi = 1e6 * scale;
  if (jump_function(sample, alpha, hi) < 1.0) {
    r.status = JumpStatus::BracketFailure;
    r.delta = hi;
    r.J_residual = std::abs(jump_function(sample, alpha, hi) - 1.0);
    return r;
  }
  if (jump_function(sample, alpha, lo) >= 1.0) hi = lo;
  for (int i = 0; i < 400 && hi - lo > 4e-16 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (jump_function(sample, alpha, mid) < 1.0)
      lo = mid;
    else
      hi = mid;
  }
  const double jl = jump_function(sample, alpha, lo);
  const double jh = jump_function(sample, alpha, hi);
  r.status = JumpStatus::Jump;
  r.delta = std::abs(jl - 1.0) < std::abs(jh - 1.0) ? lo : hi;
  r.J_residual = std::min(std::abs(jl - 1.0), std::abs(jh - 1.0));
  return r;
}

double breakdown_time(const EllPath& ell, double alpha) {
  if (!(alpha > 0.0)) return kNoBreakdown;
  const double threshold = 1.0 / alpha;
  for (std::size_t k = 0; k < ell.atom_mass.size(); ++k)
    if (ell.atom_mass[k] >= threshold) return ell.times[k];
  return kNoBreakdown;
}

double holder_diagnostic(const EllPath& ell, double t_begin, double t_end) {
  if (ell.times.size() < 2) fail(ErrorCode::EmptySample, "ell path needs at least two points");
  if (!(t_end > t_begin)) fail(ErrorCode::InvalidArgument, "empty diagnostic window");
  auto index = [&](double t) {
    const auto it = std::lower_bound(ell.times.begin(), ell.times.end(), t - 1e-12 * std::max(1.0, std::abs(t)));
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - ell.times.begin(),
                                                             static_cast<std::ptrdiff_t>(ell.times.size()) - 1));
  };
  const double dt = ell.times[1] - ell.times[0];
  double best = 0.0;
  for (std::size_t level = 0; level < 60; ++level) {
    const double parts = std::ldexp(1.0, static_cast<int>(level));
    const double w = (t_end - t_begin) / parts;
    if (w < dt * (1.0 - 1e-9)) break;
    for (std::size_t i = 0; i < static_cast<std::size_t>(parts); ++i) {
      const std::size_t a = index(t_begin + static_cast<double>(i) * w);
      const std::size_t b = index(t_begin + static_cast<double>(i + 1) * w);
      if (b <= a) continue;
      const double ratio = (ell.ell[b] - ell.ell[a]) / std::sqrt(ell.times[b] - ell.times[a]);
      best = std::max(best, ratio);
    }
  }
  return best;
}

}  // namespace ltsim
