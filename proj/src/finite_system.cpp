#include "ltsim/finite_system.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace ltsim {

std::string_view to_string(BreakdownTrigger t) noexcept {
  switch (t) {
    case BreakdownTrigger::SpectralRadius: return "SpectralRadius";
    case BreakdownTrigger::IterationDivergence: return "IterationDivergence";
    case BreakdownTrigger::ZeroCount: return "ZeroCount";
  }
  return "Unknown";
}

double SystemConfig::epsilon0() const { return zero_threshold ? *zero_threshold : std::sqrt(grid.dt()); }

std::size_t SystemConfig::max_iters() const { return fp_max_iters ? fp_max_iters : 10 * net.size() + 100; }

namespace {

void validate(const SystemConfig& cfg) {
  const std::size_t n = cfg.net.size();
  if (cfg.initial.size() != n)
    fail(ErrorCode::DimensionMismatch, fmt::format("initial condition has {} entries, network {}", cfg.initial.size(), n));
  for (double x : cfg.initial)
    if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorCode::InvalidArgument, "initial values must be finite and >= 0");
  if (!(cfg.epsilon0() >= 0.0)) fail(ErrorCode::InvalidArgument, "zero threshold must be >= 0");
  if (!(cfg.fp_tolerance > 0.0)) fail(ErrorCode::InvalidArgument, "fixed-point tolerance must be > 0");
  if (cfg.monitoring == BoundaryMonitoring::Bridge && !cfg.net.covariance().is_scaled_identity()) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && cfg.net.covariance().entry(i, j) != 0.0)
          fail(ErrorCode::Unsupported, "bridge monitoring needs a diagonal covariance");
  }
}

double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct Divergence {
  NodeSet support;
  double rho = kRhoEmpty;
};

// Exact least solution for q_ij = alpha/N. With S = {i : y_i < a} and
// a = alpha * m, the mean push m solves m (N - |S| alpha) = -sum_S y.
// Returns the shift a, or the divergent set when |S| alpha >= N.
std::variant<double, Divergence> uniform_shift(std::span<const double> y, double alpha, StepDiagnostics* diag) {
  if (alpha == 0.0) return 0.0;
  const double n = static_cast<double>(y.size());
  double theta = 0.0;
  std::size_t prev_count = 0;
  for (std::size_t round = 0;; ++round) {
    std::size_t count = 0;
    double sum = 0.0;
    for (double v : y)
      if (v < theta) {
        ++count;
        sum += v;
      }
    if (diag) diag->iterations = round + 1;
    if (count == 0) return 0.0;
    if (round > 0 && count == prev_count) return theta;
    const double denom = n - static_cast<double>(count) * alpha;
    if (denom <= 0.0) {
      std::vector<std::size_t> s;
      for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] < theta) s.push_back(i);
      return Divergence{NodeSet(std::move(s)), alpha * static_cast<double>(count) / n};
    }
    const double next = alpha * (-sum / denom);
    if (!(next > theta) && round > 0) return theta;
    theta = next;
    prev_count = count;
  }
}

// Chandrasekaran's method for the Z-matrix complementarity problem
// w = y + (I - Q) z >= 0, z >= 0, z^T w = 0; yields the least solution.
std::variant<std::vector<double>, Divergence> exact_dense(const Eigen::MatrixXd& q, std::span<const double> y) {
  const std::size_t n = y.size();
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < n; ++i)
    if (y[i] < 0.0) s.push_back(i);
  std::vector<double> z(n, 0.0);
  while (!s.empty()) {
    const auto m = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd qs(m, m);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      rhs(r) = -y[s[r]];
      for (Eigen::Index c = 0; c < m; ++c) qs(r, c) = q(static_cast<Eigen::Index>(s[r]), static_cast<Eigen::Index>(s[c]));
    }
    const double rho = perron_analysis(qs, false).rho;
    if (rho >= 1.0) return Divergence{NodeSet(s), rho};
    const Eigen::VectorXd zs = (Eigen::MatrixXd::Identity(m, m) - qs).partialPivLu().solve(rhs);
    std::fill(z.begin(), z.end(), 0.0);
    for (Eigen::Index r = 0; r < m; ++r) z[s[r]] = std::max(0.0, zs(r));
    std::vector<std::size_t> added;
    std::vector<char> in_s(n, 0);
    for (std::size_t i : s) in_s[i] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_s[i]) continue;
      double w = y[i];
      for (std::size_t j : s) w -= q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * z[j];
      if (w < 0.0) added.push_back(i);
    }
    if (added.empty()) break;
    s.insert(s.end(), added.begin(), added.end());
    std::sort(s.begin(), s.end());
  }
  return z;
}

// Monotone Jacobi iteration from zero with the exact method as fallback.
std::variant<std::vector<double>, Divergence> dense_fixed_point(const Eigen::MatrixXd& q, std::span<const double> y,
                                                                double tol, std::size_t max_iters,
                                                                StepDiagnostics* diag) {
  const std::size_t n = y.size();
  std::vector<double> dl(n, 0.0), next(n, 0.0);
  std::vector<std::size_t> support;
  double norm_half = -1.0;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    double change = 0.0;
    double defect = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = -y[i];
      for (std::size_t j : support) r += q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * dl[j];
      next[i] = r > 0.0 ? r : 0.0;
      change = std::max(change, std::abs(next[i] - dl[i]));
      defect = std::max(defect, dl[i] - next[i]);
    }
    dl.swap(next);
    support.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (dl[i] > 0.0) support.push_back(i);
    if (diag) {
      diag->iterations = it;
      diag->monotonicity_defect = std::max(diag->monotonicity_defect, defect);
    }
    if (change < tol) return dl;
    if (it == max_iters / 2) norm_half = sup_norm(dl);
  }
  if (norm_half > 0.0 && sup_norm(dl) >= 2.0 * norm_half) {
    const NodeSet s(support);
    Eigen::MatrixXd qs(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s.size()));
    for (std::size_t r = 0; r < s.size(); ++r)
      for (std::size_t c = 0; c < s.size(); ++c)
        qs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            q(static_cast<Eigen::Index>(s.indices()[r]), static_cast<Eigen::Index>(s.indices()[c]));
    return Divergence{s, perron_analysis(qs, false).rho};
  }
  if (diag) diag->used_exact_solver = true;
  return exact_dense(q, y);
}

// Bridge monitoring, uniform weights: the mean push D solves D = g(D) with
// g(D) = (1/N) sum_i (m_i(alpha D))_-, m_i the bridge minimum after the
// shift. g is convex and increasing, so Newton from 0 climbs monotonically
// to the least root; g' >= 1 below the root means there is none.
// var_dt holds one entry per coordinate, or a single shared entry.
std::variant<double, Divergence> uniform_bridge(std::span<const double> x, std::span<const double> y,
                                                std::span<const double> e, std::span<const double> var_dt,
                                                double alpha, double tol, StepDiagnostics* diag) {
  if (alpha == 0.0) return 0.0;
  const double n = static_cast<double>(y.size());
  double d = 0.0;
  for (std::size_t it = 1; it <= 200; ++it) {
    const double shift = alpha * d;
    double g = 0.0, slope = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double yi = y[i] - shift;
      const double u = x[i] - yi;
      const double r = std::sqrt(u * u + 2.0 * var_dt[var_dt.size() == 1 ? 0 : i] * e[i]);
      const double m = 0.5 * (x[i] + yi - r);
      if (m < 0.0) {
        g -= m;
        slope += r > 0.0 ? 0.5 * (1.0 + u / r) : 1.0;
        ++count;
      }
    }
    g /= n;
    slope *= alpha / n;
    if (diag) diag->iterations = it;
    const double h = g - d;
    if (h <= tol) return d;
    if (slope >= 1.0) {
      std::vector<std::size_t> s;
      for (std::size_t i = 0; i < y.size(); ++i)
        if (bridge_minimum(x[i], y[i] - shift, var_dt[var_dt.size() == 1 ? 0 : i], e[i]) < 0.0) s.push_back(i);
      return Divergence{NodeSet(std::move(s)), alpha * static_cast<double>(count) / n};
    }
    const double next = d + h / (1.0 - slope);
    if (next - d <= tol) return next;
    d = next;
  }
  return Divergence{NodeSet{}, 1.0};
}

// Bridge monitoring, dense weights: monotone Jacobi iteration from zero.
std::variant<std::vector<double>, Divergence> dense_bridge(const Eigen::MatrixXd& q, std::span<const double> x,
                                                           std::span<const double> y, std::span<const double> e,
                                                           std::span<const double> var_dt, double tol,
                                                           std::size_t max_iters, StepDiagnostics* diag) {
  const std::size_t n = y.size();
  std::vector<double> dl(n, 0.0), next(n, 0.0);
  std::vector<std::size_t> support;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    double change = 0.0;
    double defect = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double push = 0.0;
      for (std::size_t j : support) push += q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * dl[j];
      const double m = bridge_minimum(x[i], y[i] - push, var_dt[i], e[i]);
      next[i] = m < 0.0 ? -m : 0.0;
      change = std::max(change, std::abs(next[i] - dl[i]));
      defect = std::max(defect, dl[i] - next[i]);
    }
    dl.swap(next);
    support.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (dl[i] > 0.0) support.push_back(i);
    if (diag) {
      diag->iterations = it;
      diag->monotonicity_defect = std::max(diag->monotonicity_defect, defect);
    }
    if (change < tol) return dl;
  }
  const NodeSet s(support);
  Eigen::MatrixXd qs(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s.size()));
  for (std::size_t r = 0; r < s.size(); ++r)
    for (std::size_t c = 0; c < s.size(); ++c)
      qs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          q(static_cast<Eigen::Index>(s.indices()[r]), static_cast<Eigen::Index>(s.indices()[c]));
  return Divergence{s, perron_analysis(qs, false).rho};
}

// Zero-set and active-set evaluation with a cache of Perron roots.
class Evaluator {
 public:
  explicit Evaluator(const SystemConfig& cfg) : cfg_(cfg), eps_(cfg.epsilon0()) {
    const CovarianceSpec& a = cfg.net.covariance();
    all_noisy_ = a.is_scaled_identity() && a.identity_variance() > 0.0;
  }

  struct Result {
    std::size_t count = 0;
    double rho = kRhoEmpty;
    NodeSet zero;
    NodeSet active;
  };

  Result evaluate(std::span<const double> x, bool want_sets) {
    Result r;
    const InteractionNetwork& net = cfg_.net;
    if (net.is_uniform() && all_noisy_ && !want_sets) {
      for (double v : x) r.count += v <= eps_ ? 1 : 0;
      if (r.count > 0)
        r.rho = net.alpha() * static_cast<double>(r.count) / static_cast<double>(net.size());
      return r;
    }
    std::vector<std::size_t> zero;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] <= eps_) zero.push_back(i);
    r.count = zero.size();
    r.zero = NodeSet(std::move(zero));
    r.active = active_nodes(r.zero, net);
    if (r.active.empty()) return r;
    if (net.is_uniform()) {
      r.rho = spectral_radius(net, r.active).rho;
      return r;
    }
    auto it = cache_.find(r.active.indices());
    if (it != cache_.end()) {
      r.rho = it->second;
    } else {
      r.rho = spectral_radius(net, r.active).rho;
      if (cache_.size() > 200000) cache_.clear();
      cache_.emplace(r.active.indices(), r.rho);
    }
    return r;
  }

  bool breaks(double rho) const { return rho >= 1.0 - cfg_.breakdown_rho_margin; }

  BreakdownTrigger trigger() const {
    return cfg_.net.is_uniform() ? BreakdownTrigger::ZeroCount : BreakdownTrigger::SpectralRadius;
  }

 private:
  const SystemConfig& cfg_;
  double eps_;
  bool all_noisy_ = false;
  std::map<std::vector<std::size_t>, double> cache_;
};

// One step in place. Returns a divergence record when no finite fixed point
// exists; otherwise X and L are advanced and dl holds the increments. A
// nonempty `e` selects bridge monitoring.
std::optional<Divergence> advance(const SystemConfig& cfg, std::vector<double>& x, std::vector<double>& l,
                                  std::span<const double> dw, std::span<const double> e, std::vector<double>& y,
                                  std::vector<double>& dl, StepDiagnostics* diag) {
  const std::size_t n = x.size();
  if (dw.size() != n) fail(ErrorCode::DimensionMismatch, "increment length differs from N");
  const double tol = cfg.fp_tolerance * std::max(1.0, sup_norm(x));
  y.resize(n);
  dl.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(dw[i])) fail(ErrorCode::NonFiniteNoise, fmt::format("non-finite increment at index {}", i));
    y[i] = x[i] + dw[i];
  }
  const bool bridge = !e.empty();
  const InteractionNetwork& net = cfg.net;
  const double dt = cfg.grid.dt();
  if (net.is_uniform()) {
    const CovarianceSpec& a = net.covariance();
    std::vector<double> var_dt;
    if (bridge) {
      if (a.is_scaled_identity()) {
        var_dt.assign(1, a.identity_variance() * dt);
      } else {
        var_dt.resize(n);
        for (std::size_t i = 0; i < n; ++i) var_dt[i] = a.diagonal(i) * dt;
      }
    }
    auto res = bridge ? uniform_bridge(x, y, e, var_dt, net.alpha(), tol, diag)
                      : uniform_shift(y, net.alpha(), diag);
    if (auto* d = std::get_if<Divergence>(&res)) return std::move(*d);
    const double shift = bridge ? net.alpha() * std::get<double>(res) : std::get<double>(res);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = y[i] - shift;
      if (bridge) {
        const double m = bridge_minimum(x[i], d, var_dt[var_dt.size() == 1 ? 0 : i], e[i]);
        dl[i] = m < 0.0 ? -m : 0.0;
        x[i] = d + dl[i];
      } else {
        x[i] = d > 0.0 ? d : 0.0;
        dl[i] = d < 0.0 ? -d : 0.0;
      }
      l[i] += dl[i];
    }
    return std::nullopt;
  }
  const Eigen::MatrixXd& q = net.dense_weights();
  std::variant<std::vector<double>, Divergence> res;
  if (bridge) {
    std::vector<double> var_dt(n);
    for (std::size_t i = 0; i < n; ++i) var_dt[i] = net.covariance().diagonal(i) * dt;
    res = dense_bridge(q, x, y, e, var_dt, tol, cfg.max_iters(), diag);
  } else {
    res = dense_fixed_point(q, y, tol, cfg.max_iters(), diag);
  }
  if (auto* d = std::get_if<Divergence>(&res)) return std::move(*d);
  dl = std::move(std::get<std::vector<double>>(res));
  std::vector<std::size_t> support;
  for (std::size_t j = 0; j < n; ++j)
    if (dl[j] > 0.0) support.push_back(j);
  for (std::size_t i = 0; i < n; ++i) {
    double push = 0.0;
    for (std::size_t j : support) push += q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * dl[j];
    x[i] = y[i] - push + dl[i];
    l[i] += dl[i];
  }
  return std::nullopt;
}

// Bridge variates of step k, or nothing under grid monitoring.
std::span<const double> step_variates(const SystemConfig& cfg, std::size_t k, std::vector<double>& buf) {
  if (cfg.monitoring == BoundaryMonitoring::Grid) return {};
  buf.resize(cfg.net.size());
  bridge_variates(cfg.bridge_seed, k, buf);
  return buf;
}

}  // namespace

std::optional<std::vector<double>> least_fixed_point(const InteractionNetwork& net, std::span<const double> y,
                                                     double tolerance, std::size_t max_iters, StepDiagnostics* diag) {
  if (y.size() != net.size()) fail(ErrorCode::DimensionMismatch, "y length differs from N");
  if (net.is_uniform()) {
    auto res = uniform_shift(y, net.alpha(), diag);
    if (std::holds_alternative<Divergence>(res)) return std::nullopt;
    const double a = std::get<double>(res);
    std::vector<double> dl(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dl[i] = std::max(a - y[i], 0.0);
    return dl;
  }
  auto res = dense_fixed_point(net.dense_weights(), y, tolerance, max_iters, diag);
  if (std::holds_alternative<Divergence>(res)) return std::nullopt;
  return std::get<std::vector<double>>(std::move(res));
}

SystemState initial_state(const SystemConfig& cfg) {
  validate(cfg);
  Evaluator ev(cfg);
  SystemState s;
  s.k = 0;
  s.X = cfg.initial;
  s.L.assign(cfg.initial.size(), 0.0);
  auto r = ev.evaluate(s.X, true);
  s.zero_set = std::move(r.zero);
  s.active_set = std::move(r.active);
  s.rho_active = r.rho;
  return s;
}

std::variant<SystemState, BreakdownEvent> step(const SystemState& state, std::span<const double> dW,
                                               const SystemConfig& cfg, StepDiagnostics* diag) {
  if (state.X.size() != cfg.net.size() || state.L.size() != cfg.net.size())
    fail(ErrorCode::DimensionMismatch, "state size differs from N");
  Evaluator ev(cfg);
  SystemState next = state;
  std::vector<double> y, dl, ebuf;
  const double t_left = cfg.grid.time(state.k);
  const auto e = step_variates(cfg, state.k, ebuf);
  if (auto div = advance(cfg, next.X, next.L, dW, e, y, dl, diag)) {
    return BreakdownEvent{true, t_left, BreakdownTrigger::IterationDivergence, std::move(div->support), div->rho};
  }
  next.k = state.k + 1;
  auto r = ev.evaluate(next.X, true);
  if (ev.breaks(r.rho)) return BreakdownEvent{true, t_left, ev.trigger(), std::move(r.zero), r.rho};
  next.zero_set = std::move(r.zero);
  next.active_set = std::move(r.active);
  next.rho_active = r.rho;
  return next;
}

SystemTrajectory simulate(const SystemConfig& cfg, IncrementSource& source) {
  validate(cfg);
  const std::size_t n = cfg.net.size();
  const TimeGrid& grid = cfg.grid;
  if (!(source.grid() == grid)) fail(ErrorCode::DimensionMismatch, "noise grid differs from configuration grid");
  if (source.dimension() != n) fail(ErrorCode::DimensionMismatch, "noise dimension differs from N");

  SystemTrajectory tr;
  tr.n = n;
  Evaluator ev(cfg);
  std::vector<double> x = cfg.initial;
  std::vector<double> l(n, 0.0);
  std::vector<double> dw(n), y, dl, ebuf;

  std::vector<std::pair<std::size_t, double>> snaps;
  for (double t : cfg.snapshot_times) snaps.emplace_back(grid.index_of(t), t);

  auto record = [&](std::size_t k, const Evaluator::Result& r) {
    tr.times.push_back(grid.time(k));
    if (cfg.record_positions) tr.X.insert(tr.X.end(), x.begin(), x.end());
    if (cfg.record_reflections) tr.L.insert(tr.L.end(), l.begin(), l.end());
    tr.zero_count.push_back(r.count);
    tr.rho_active.push_back(r.rho);
    double s = 0.0;
    for (double v : l) s += v;
    tr.mean_L.push_back(s / static_cast<double>(n));
    tr.zero_fraction.push_back(static_cast<double>(r.count) / static_cast<double>(n));
    for (const auto& [idx, t] : snaps)
      if (idx == k) tr.snapshots[t] = x;
  };

  const bool sets_needed = !cfg.net.is_uniform();
  auto r0 = ev.evaluate(x, sets_needed);
  record(0, r0);
  if (ev.breaks(r0.rho)) {
    if (!sets_needed) r0 = ev.evaluate(x, true);
    tr.breakdown = BreakdownEvent{true, grid.time(0), ev.trigger(), std::move(r0.zero), r0.rho};
    return tr;
  }

  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    source.next(dw);
    StepDiagnostics d;
    const auto e = step_variates(cfg, k, ebuf);
    auto div = advance(cfg, x, l, dw, e, y, dl, &d);
    tr.totals.iterations += d.iterations;
    tr.totals.used_exact_solver = tr.totals.used_exact_solver || d.used_exact_solver;
    tr.totals.monotonicity_defect = std::max(tr.totals.monotonicity_defect, d.monotonicity_defect);
    if (div) {
      tr.breakdown = BreakdownEvent{true, grid.time(k), BreakdownTrigger::IterationDivergence, std::move(div->support),
                                    div->rho};
      return tr;
    }
    auto r = ev.evaluate(x, sets_needed);
    if (ev.breaks(r.rho)) {
      if (!sets_needed) r = ev.evaluate(x, true);
      tr.breakdown = BreakdownEvent{true, grid.time(k), ev.trigger(), std::move(r.zero), r.rho};
      return tr;
    }
    record(k + 1, r);
  }
  return tr;
}

SystemTrajectory simulate(const SystemConfig& cfg, const NoiseEnsemble& noise) {
  auto src = noise.replay();
  SystemTrajectory tr = simulate(cfg, *src);
  tr.seed = noise.seed();
  return tr;
}

ComparisonReport coupled_compare(const SystemConfig& cfg1, const SystemConfig& cfg2, IncrementSource& noise) {
  validate(cfg1);
  validate(cfg2);
  const std::size_t n = cfg1.net.size();
  if (cfg2.net.size() != n) fail(ErrorCode::PreconditionViolated, "systems have different sizes");
  if (!(cfg1.grid == cfg2.grid) || !(noise.grid() == cfg1.grid))
    fail(ErrorCode::PreconditionViolated, "systems and noise must share one grid");
  if (noise.dimension() != n) fail(ErrorCode::PreconditionViolated, "noise dimension differs from N");
  for (std::size_t i = 0; i < n; ++i)
    if (cfg1.initial[i] > cfg2.initial[i])
      fail(ErrorCode::PreconditionViolated, fmt::format("xi1[{}] > xi2[{}]", i, i));
  if (cfg1.net.is_uniform() && cfg2.net.is_uniform()) {
    if (cfg1.net.alpha() < cfg2.net.alpha()) fail(ErrorCode::PreconditionViolated, "alpha1 < alpha2");
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (cfg1.net.q(i, j) < cfg2.net.q(i, j))
          fail(ErrorCode::PreconditionViolated, fmt::format("q1[{}][{}] < q2[{}][{}]", i, j, i, j));
  }

  ComparisonReport rep;
  Evaluator ev1(cfg1), ev2(cfg2);
  std::vector<double> x1 = cfg1.initial, x2 = cfg2.initial, l1(n, 0.0), l2(n, 0.0);
  if (cfg1.monitoring != cfg2.monitoring || cfg1.bridge_seed != cfg2.bridge_seed)
    fail(ErrorCode::PreconditionViolated, "systems must share the boundary monitoring and its seed");
  std::vector<double> dw(n), y, dl1, dl2, ebuf;
  for (std::size_t i = 0; i < n; ++i) rep.max_position_violation = std::max(rep.max_position_violation, x1[i] - x2[i]);
  rep.breakdown_1 = ev1.breaks(ev1.evaluate(x1, false).rho);
  rep.breakdown_2 = ev2.breaks(ev2.evaluate(x2, false).rho);
  for (std::size_t k = 0; k < cfg1.grid.n_steps() && !rep.breakdown_1 && !rep.breakdown_2; ++k) {
    noise.next(dw);
    const auto e = step_variates(cfg1, k, ebuf);
    rep.breakdown_1 = advance(cfg1, x1, l1, dw, e, y, dl1, nullptr).has_value();
    rep.breakdown_2 = advance(cfg2, x2, l2, dw, e, y, dl2, nullptr).has_value();
    if (rep.breakdown_1 || rep.breakdown_2) break;
    rep.breakdown_1 = ev1.breaks(ev1.evaluate(x1, false).rho);
    rep.breakdown_2 = ev2.breaks(ev2.evaluate(x2, false).rho);
    for (std::size_t i = 0; i < n; ++i) {
      rep.max_position_violation = std::max(rep.max_position_violation, x1[i] - x2[i]);
      rep.max_increment_violation = std::max(rep.max_increment_violation, dl2[i] - dl1[i]);
      rep.max_abs_position = std::max({rep.max_abs_position, std::abs(x1[i]), std::abs(x2[i])});
    }
    ++rep.steps_compared;
  }
  return rep;
}

}  // namespace ltsim
