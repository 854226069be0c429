#include "ltsim/timegrid_noise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

#include "ltsim/seeding.hpp"

namespace ltsim {

namespace {

constexpr std::size_t kMaxDenseDimension = 4096;

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

// ---------------------------------------------------------------------------
// TimeGrid
// ---------------------------------------------------------------------------

TimeGrid::TimeGrid(double t0, double dt, std::size_t n_steps) : t0_(t0), dt_(dt), n_steps_(n_steps) {
  if (!(t0 >= 0.0) || !std::isfinite(t0)) fail(ErrorCode::InvalidArgument, "t0 must be finite and >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::InvalidArgument, "dt must be finite and > 0");
  if (n_steps < 1) fail(ErrorCode::InvalidArgument, "n_steps must be >= 1");
}

TimeGrid TimeGrid::until(double horizon, double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0)) fail(ErrorCode::InvalidArgument, "horizon and dt must be > 0");
  const double n = std::round(horizon / dt);
  return TimeGrid(0.0, dt, static_cast<std::size_t>(std::max(1.0, n)));
}

std::size_t TimeGrid::index_of(double t) const noexcept {
  const double k = std::round((t - t0_) / dt_);
  if (!(k > 0.0)) return 0;
  return std::min(n_steps_, static_cast<std::size_t>(k));
}

// ---------------------------------------------------------------------------
// CovarianceSpec
// ---------------------------------------------------------------------------

CovarianceSpec CovarianceSpec::identity(std::size_t n, double variance) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "covariance dimension must be >= 1");
  if (!(variance >= 0.0) || !std::isfinite(variance))
    fail(ErrorCode::InvalidArgument, "identity variance must be finite and >= 0");
  CovarianceSpec c;
  c.n_ = n;
  c.variance_ = variance;
  return c;
}

CovarianceSpec CovarianceSpec::dense(Eigen::MatrixXd a) {
  if (a.rows() == 0 || a.rows() != a.cols())
    fail(ErrorCode::DimensionMismatch, fmt::format("covariance must be square, got {}x{}", a.rows(), a.cols()));
  if (!a.allFinite()) fail(ErrorCode::InvalidArgument, "covariance has non-finite entries");
  CovarianceSpec c;
  c.n_ = static_cast<std::size_t>(a.rows());
  c.dense_ = std::move(a);
  return c;
}

double CovarianceSpec::entry(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) fail(ErrorCode::IndexOutOfRange, fmt::format("entry ({}, {}) outside {}", i, j, n_));
  if (dense_) return (*dense_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return i == j ? variance_ : 0.0;
}

Eigen::MatrixXd CovarianceSpec::matrix() const {
  if (dense_) return *dense_;
  if (n_ > kMaxDenseDimension)
    fail(ErrorCode::TooLarge, fmt::format("refusing to materialize a {}x{} covariance", n_, n_));
  return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_)) * variance_;
}

Eigen::MatrixXd CovarianceSpec::principal_minor(std::span<const std::size_t> idx) const {
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(m, m);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c) out(r, c) = entry(idx[r], idx[c]);
  return out;
}

// ---------------------------------------------------------------------------
// CorrelationFactor
// ---------------------------------------------------------------------------

CorrelationFactor CorrelationFactor::scaled_identity(std::size_t n, double scale) {
  CorrelationFactor f;
  f.n_ = n;
  f.scale_ = scale;
  return f;
}

CorrelationFactor CorrelationFactor::dense(Eigen::MatrixXd m) {
  if (m.rows() != m.cols()) fail(ErrorCode::DimensionMismatch, "factor must be square");
  CorrelationFactor f;
  f.n_ = static_cast<std::size_t>(m.rows());
  f.dense_ = std::move(m);
  return f;
}

Eigen::MatrixXd CorrelationFactor::matrix() const {
  if (dense_) return *dense_;
  if (n_ > kMaxDenseDimension) fail(ErrorCode::TooLarge, "refusing to materialize a large diagonal factor");
  return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_)) * scale_;
}

std::size_t CorrelationFactor::rank() const {
  if (!dense_) return scale_ != 0.0 ? n_ : 0;
  // Columns of P^T L sqrt(D) are independent unless zeroed by a clamped pivot.
  std::size_t r = 0;
  for (Eigen::Index c = 0; c < dense_->cols(); ++c)
    if (dense_->col(c).cwiseAbs().maxCoeff() > 0.0) ++r;
  return r;
}

void CorrelationFactor::apply(std::span<const double> z, double scale_factor, std::span<double> out) const {
  if (z.size() != n_ || out.size() != n_) fail(ErrorCode::DimensionMismatch, "factor apply size mismatch");
  if (!dense_) {
    const double s = scale_factor * scale_;
    for (std::size_t i = 0; i < n_; ++i) out[i] = s * z[i];
    return;
  }
  const Eigen::MatrixXd& f = *dense_;
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n_; ++j)
      acc += f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * z[j];
    out[i] = scale_factor * acc;
  }
}

CorrelationFactor factor_covariance(const CovarianceSpec& a) {
  if (a.is_scaled_identity()) {
    const double v = a.identity_variance();
    return CorrelationFactor::scaled_identity(a.dimension(), std::sqrt(v));
  }
  const Eigen::MatrixXd m = a.matrix();
  const double norm = max_abs(m);
  const double asym = max_abs(m - m.transpose());
  if (asym > 1e-12 * norm)
    fail(ErrorCode::NotSymmetric, fmt::format("max |A - A^T| = {:.3e} exceeds 1e-12 * {:.3e}", asym, norm));
  if (norm == 0.0) return CorrelationFactor::dense(Eigen::MatrixXd::Zero(m.rows(), m.cols()));

  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  const double spec_norm = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double lambda_min = eig.eigenvalues().minCoeff();
  if (lambda_min < -1e-10 * spec_norm)
    fail(ErrorCode::NotPositiveSemidefinite,
         fmt::format("smallest eigenvalue {:.3e} below -1e-10 * {:.3e}", lambda_min, spec_norm));

  // Pivoted LDL^T keeps exact structure of singular inputs (for instance the
  // rows of [[1,-1],[-1,1]] come out as exact negatives of each other).
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sym);
  Eigen::VectorXd d = ldlt.vectorD();
  const double clamp = 1e-14 * spec_norm;
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = d(i) > clamp ? std::sqrt(d(i)) : 0.0;
  Eigen::MatrixXd l = ldlt.matrixL();
  Eigen::MatrixXd f = l * d.asDiagonal();
  f = ldlt.transpositionsP().transpose() * f;
  return CorrelationFactor::dense(std::move(f));
}

// ---------------------------------------------------------------------------
// Noise generation
// ---------------------------------------------------------------------------

NoiseStream::NoiseStream(const TimeGrid& grid, CorrelationFactor factor, std::uint64_t seed)
    : grid_(grid),
      factor_(std::move(factor)),
      seed_(seed),
      engine_(make_engine(seed, StreamTag::Noise)),
      z_(factor_.dimension()) {}

NoiseStream::NoiseStream(const TimeGrid& grid, const CovarianceSpec& a, std::uint64_t seed)
    : NoiseStream(grid, factor_covariance(a), seed) {}

void NoiseStream::next(std::span<double> out) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  for (double& z : z_) z = normal(engine_);
  factor_.apply(z_, std::sqrt(grid_.dt()), out);
  for (double v : out)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteNoise, "generated a non-finite increment");
  ++emitted_;
}

NoiseEnsemble::NoiseEnsemble(TimeGrid grid, CorrelationFactor factor, std::uint64_t seed,
                             std::vector<double> increments)
    : grid_(grid), factor_(std::move(factor)), seed_(seed), increments_(std::move(increments)) {
  if (increments_.size() != grid_.n_steps() * factor_.dimension())
    fail(ErrorCode::DimensionMismatch, "increment buffer does not match n_steps x N");
}

std::span<const double> NoiseEnsemble::row(std::size_t k) const {
  if (k >= grid_.n_steps()) fail(ErrorCode::IndexOutOfRange, fmt::format("row {} outside {}", k, grid_.n_steps()));
  const std::size_t n = dimension();
  return std::span<const double>(increments_).subspan(k * n, n);
}

std::vector<double> NoiseEnsemble::path(std::size_t i) const {
  if (i >= dimension()) fail(ErrorCode::IndexOutOfRange, "path column out of range");
  std::vector<double> w(grid_.n_steps() + 1, 0.0);
  for (std::size_t k = 0; k < grid_.n_steps(); ++k) w[k + 1] = w[k] + increments_[k * dimension() + i];
  return w;
}

namespace {

class ReplaySource final : public IncrementSource {
 public:
  explicit ReplaySource(const NoiseEnsemble& e) : e_(e) {}
  const TimeGrid& grid() const noexcept override { return e_.grid(); }
  std::size_t dimension() const noexcept override { return e_.dimension(); }
  void next(std::span<double> out) override {
    const auto r = e_.row(k_++);
    std::copy(r.begin(), r.end(), out.begin());
  }

 private:
  const NoiseEnsemble& e_;
  std::size_t k_ = 0;
};

}  // namespace

std::unique_ptr<IncrementSource> NoiseEnsemble::replay() const { return std::make_unique<ReplaySource>(*this); }

NoiseEnsemble sample_noise(const TimeGrid& grid, const CovarianceSpec& a, std::uint64_t seed) {
  CorrelationFactor f = factor_covariance(a);
  const std::size_t n = f.dimension();
  std::vector<double> buf(grid.n_steps() * n);
  NoiseStream stream(grid, f, seed);
  for (std::size_t k = 0; k < grid.n_steps(); ++k) stream.next(std::span<double>(buf).subspan(k * n, n));
  return NoiseEnsemble(grid, std::move(f), seed, std::move(buf));
}

// ---------------------------------------------------------------------------
// Skorokhod map
// ---------------------------------------------------------------------------

ReflectedPath skorokhod_map(std::span<const double> z) {
  if (z.empty()) fail(ErrorCode::InvalidArgument, "empty path");
  if (!(z[0] >= 0.0)) fail(ErrorCode::NegativeStart, fmt::format("z_0 = {} < 0", z[0]));
  ReflectedPath p;
  p.z.assign(z.begin(), z.end());
  p.x.resize(z.size());
  p.l.resize(z.size());
  double running = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    running = std::max(running, std::max(-z[k], 0.0));
    p.l[k] = running;
    p.x[k] = z[k] + running;
  }
  return p;
}

SkorokhodIncrement skorokhod_increment(double x_s, std::span<const double> dz) {
  if (!(x_s >= 0.0)) fail(ErrorCode::NegativeStart, fmt::format("x_s = {} < 0", x_s));
  double c = x_s;
  double dl = 0.0;
  for (double d : dz) {
    c += d;
    dl = std::max(dl, std::max(-c, 0.0));
  }
  return {dl, c + dl};
}

std::string_view to_string(BoundaryMonitoring m) noexcept {
  return m == BoundaryMonitoring::Grid ? "grid" : "bridge";
}

void bridge_variates(std::uint64_t seed, std::size_t k, std::span<double> out) {
  auto eng = make_engine(splitmix64(seed + splitmix64(static_cast<std::uint64_t>(k))), StreamTag::Bridge);
  boost::random::exponential_distribution<double> dist(1.0);
  for (double& v : out) v = dist(eng);
}

}  // namespace ltsim
