#include "ltsim/fokker_planck.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace ltsim {

Grid1D::Grid1D(double x_max_, std::size_t n_cells_) : x_max(x_max_), n_cells(n_cells_) {
  if (!(x_max > 0.0) || n_cells < 3) fail(ErrorCode::InvalidArgument, "grid needs x_max > 0 and at least 3 cells");
}

Grid1D Grid1D::with_width(double x_max, double h) {
  if (!(h > 0.0) || !(x_max > 0.0)) fail(ErrorCode::InvalidArgument, "grid needs h > 0 and x_max > 0");
  const auto n = static_cast<std::size_t>(std::ceil(x_max / h - 1e-9));
  return Grid1D(static_cast<double>(n) * h, n);
}

double boundary_value(const std::vector<double>& mu, Extrapolation order) {
  double v = order == Extrapolation::Quadratic ? (11.0 * mu[0] - 7.0 * mu[1] + 2.0 * mu[2]) / 6.0
                                               : (3.0 * mu[0] - mu[1]) / 2.0;
  return v > 0.0 ? v : 0.0;
}

double DensityField::mass(double h) const {
  double s = 0.0;
  for (double v : mu) s += v;
  return s * h;
}

double cfl_step(double h, double alpha, double mu0) {
  return 0.45 * std::min(h * h, h / (alpha * mu0 / 2.0 + 1e-30));
}

namespace {

// Advance in place; returns the clipped mass (before renormalization).
double update(std::vector<double>& mu, std::vector<double>& flux, double v, double dt, double h) {
  const std::size_t n = mu.size();
  const double inv2h = 0.5 / h;
  flux.resize(n + 1);
  flux[0] = 0.0;
  flux[n] = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) flux[j + 1] = v * mu[j + 1] - (mu[j + 1] - mu[j]) * inv2h;
  const double c = dt / h;
  double clipped = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double next = mu[j] - c * (flux[j + 1] - flux[j]);
    if (next < 0.0) {
      clipped -= next * h;
      mu[j] = 0.0;
    } else {
      mu[j] = next;
    }
  }
  return clipped;
}

void renormalize(std::vector<double>& mu, double h, double clipped, double t, FpStepLog* log) {
  if (clipped <= 1e-12) return;
  double mass = 0.0;
  for (double v : mu) mass += v;
  mass *= h;
  for (double& v : mu) v /= mass;
  if (log) {
    log->entries.push_back({t, clipped});
    log->cumulative += clipped;
    if (log->cumulative > 1e-6)
      fail(ErrorCode::MassLoss, fmt::format("cumulative renormalization {:.3e} exceeds 1e-6 at t = {}", log->cumulative, t));
  }
}

}  // namespace

DensityField fp_step(const DensityField& field, double alpha, double dt, double h, Extrapolation order,
                     FpStepLog* log) {
  if (field.mu.size() < 3) fail(ErrorCode::InvalidArgument, "density needs at least 3 cells");
  const double mu0 = boundary_value(field.mu, order);
  const double bound = cfl_step(h, alpha, mu0);
  if (dt > bound * (1.0 + 1e-12))
    fail(ErrorCode::CFLViolation, fmt::format("dt = {:.3e} exceeds the CFL bound {:.3e}", dt, bound));
  DensityField out = field;
  std::vector<double> flux;
  const double clipped = update(out.mu, flux, -alpha * mu0 / 2.0, dt, h);
  out.t = field.t + dt;
  renormalize(out.mu, h, clipped, out.t, log);
  out.mu0 = boundary_value(out.mu, order);
  return out;
}

double default_x_max(const InitialLaw& initial, double horizon) {
  double q = 0.0;
  switch (initial.kind()) {
    case InitialLaw::Kind::Dirac: q = initial.parameter(); break;
    case InitialLaw::Kind::Exponential: q = -std::log(1e-9) / initial.parameter(); break;
    case InitialLaw::Kind::Empirical: q = initial.quantile(1.0); break;
  }
  return std::max(10.0, 6.0 * std::sqrt(horizon) + q);
}

std::vector<double> project_initial(const InitialLaw& initial, const Grid1D& grid) {
  const double h = grid.h();
  std::vector<double> mu(grid.n_cells, 0.0);
  auto cell_of = [&](double x) { return std::min(grid.n_cells - 1, static_cast<std::size_t>(x / h)); };
  switch (initial.kind()) {
    case InitialLaw::Kind::Dirac:
      mu[cell_of(initial.parameter())] = 1.0 / h;
      break;
    case InitialLaw::Kind::Exponential: {
      const double lambda = initial.parameter();
      for (std::size_t j = 0; j < grid.n_cells; ++j) {
        const double a = static_cast<double>(j) * h;
        // exp(-lambda a) - exp(-lambda (a + h)) without cancellation.
        mu[j] = -std::exp(-lambda * a) * std::expm1(-lambda * h) / h;
      }
      break;
    }
    case InitialLaw::Kind::Empirical: {
      const double w = 1.0 / static_cast<double>(initial.samples().size());
      for (double x : initial.samples()) mu[cell_of(x)] += w / h;
      break;
    }
  }
  double mass = 0.0;
  for (double v : mu) mass += v * h;
  for (double& v : mu) v /= mass;
  return mu;
}

FpResult fp_solve(const InitialLaw& initial, double alpha, double horizon, const Grid1D& grid,
                  const FpOptions& options) {
  return fp_solve(project_initial(initial, grid), alpha, horizon, grid, options);
}

FpResult fp_solve(std::vector<double> initial_cells, double alpha, double horizon, const Grid1D& grid,
                  const FpOptions& options) {
  if (!(alpha >= 0.0)) fail(ErrorCode::InvalidArgument, "alpha must be nonnegative");
  if (!(horizon > 0.0)) fail(ErrorCode::InvalidArgument, "horizon must be > 0");
  if (initial_cells.size() != grid.n_cells) fail(ErrorCode::DimensionMismatch, "initial cells differ from grid");
  const double h = grid.h();
  double mass0 = 0.0;
  for (double v : initial_cells) {
    if (!(v >= 0.0)) fail(ErrorCode::InvalidArgument, "initial density must be nonnegative");
    mass0 += v * h;
  }
  if (!(mass0 > 0.0)) fail(ErrorCode::InvalidArgument, "initial density has zero mass");

  FpResult res{grid, {}, {}, {}, std::nullopt, {}, 0.0, true, std::abs(mass0 - 1.0), 0.0, 0};
  for (double& v : initial_cells) v /= mass0;

  std::vector<double> mu = std::move(initial_cells);
  std::vector<double> flux;
  std::vector<double> stops = options.snapshot_times;
  std::sort(stops.begin(), stops.end());
  stops.erase(std::remove_if(stops.begin(), stops.end(), [&](double t) { return !(t > 0.0) || t > horizon; }),
              stops.end());

  const std::size_t tail_cells = std::min(grid.n_cells, static_cast<std::size_t>(std::ceil(1.0 / h)));
  auto check_tail = [&]() {
    double tail = 0.0;
    for (std::size_t j = grid.n_cells - tail_cells; j < grid.n_cells; ++j) tail += mu[j] * h;
    res.tail_mass_max = std::max(res.tail_mass_max, tail);
    if (tail >= options.tail_tolerance) res.tail_check_passed = false;
  };
  auto mass_check = [&]() {
    double m = 0.0;
    for (double v : mu) m += v;
    res.mass_error_max = std::max(res.mass_error_max, std::abs(m * h - 1.0));
  };

  double t = 0.0;
  double ell = 0.0;
  double mu0 = boundary_value(mu, options.extrapolation);
  double next_record = 0.0;
  auto record = [&](bool force) {
    if (!force && t + 1e-15 < next_record) return;
    res.flux.times.push_back(t);
    res.flux.ell.push_back(ell);
    res.flux.mu0.push_back(mu0);
    next_record = t + options.record_interval;
  };
  record(true);
  check_tail();
  for (double s : stops)
    if (s <= 0.0) res.snapshots[s] = DensityField{mu, 0.0, mu0};

  std::size_t stop_idx = 0;
  const double tiny = 1e-12 * horizon;
  while (t < horizon - tiny) {
    if (alpha > 0.0 && mu0 > 1.0 / (alpha * h)) {
      res.breakdown = FpBreakdown{t, mu0};
      break;
    }
    double dt = cfl_step(h, alpha, mu0);
    double target = horizon;
    if (stop_idx < stops.size()) target = std::min(target, stops[stop_idx]);
    bool hit = false;
    if (t + dt >= target - tiny) {
      dt = target - t;
      hit = true;
    }
    const double clipped = update(mu, flux, -alpha * mu0 / 2.0, dt, h);
    ell += 0.5 * dt * mu0;
    t = hit ? target : t + dt;
    renormalize(mu, h, clipped, t, &res.renormalization);
    mu0 = boundary_value(mu, options.extrapolation);
    ++res.steps;
    record(hit);
    if (hit && stop_idx < stops.size() && std::abs(t - stops[stop_idx]) <= tiny) {
      res.snapshots[stops[stop_idx]] = DensityField{mu, t, mu0};
      check_tail();
      mass_check();
      ++stop_idx;
    }
  }
  if (res.flux.times.back() != t) record(true);
  check_tail();
  mass_check();
  res.final_field = DensityField{std::move(mu), t, mu0};
  return res;
}

}  // namespace ltsim
