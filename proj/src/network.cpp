#include "ltsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

namespace ltsim {

// ---------------------------------------------------------------------------
// NodeSet
// ---------------------------------------------------------------------------

NodeSet::NodeSet(std::initializer_list<std::size_t> idx) : NodeSet(std::vector<std::size_t>(idx)) {}

NodeSet::NodeSet(std::vector<std::size_t> idx) : idx_(std::move(idx)) {
  std::sort(idx_.begin(), idx_.end());
  idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
}

NodeSet NodeSet::all(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return NodeSet(std::move(v));
}

NodeSet NodeSet::from_mask(std::uint64_t mask, std::size_t n) {
  std::vector<std::size_t> v;
  for (std::size_t i = 0; i < n && i < 64; ++i)
    if (mask >> i & 1U) v.push_back(i);
  return NodeSet(std::move(v));
}

bool NodeSet::contains(std::size_t i) const noexcept { return std::binary_search(idx_.begin(), idx_.end(), i); }

bool NodeSet::is_subset_of(const NodeSet& other) const noexcept {
  return std::includes(other.idx_.begin(), other.idx_.end(), idx_.begin(), idx_.end());
}

std::uint64_t NodeSet::mask() const {
  std::uint64_t m = 0;
  for (std::size_t i : idx_) {
    if (i >= 64) fail(ErrorCode::TooLarge, "node index does not fit a 64-bit mask");
    m |= std::uint64_t{1} << i;
  }
  return m;
}

// ---------------------------------------------------------------------------
// InteractionNetwork
// ---------------------------------------------------------------------------

InteractionNetwork InteractionNetwork::dense(Eigen::MatrixXd q, CovarianceSpec a) {
  if (q.rows() == 0 || q.rows() != q.cols())
    fail(ErrorCode::DimensionMismatch, fmt::format("Q must be square, got {}x{}", q.rows(), q.cols()));
  if (static_cast<std::size_t>(q.rows()) != a.dimension())
    fail(ErrorCode::DimensionMismatch, "Q and A dimensions differ");
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (!std::isfinite(q(i, j))) fail(ErrorCode::InvalidArgument, "Q has non-finite entries");
      if (q(i, j) < 0.0) fail(ErrorCode::NegativeEntry, fmt::format("q[{}][{}] = {} < 0", i, j, q(i, j)));
    }
  InteractionNetwork net(static_cast<std::size_t>(q.rows()), std::move(a));
  net.q_ = std::move(q);
  return net;
}

InteractionNetwork InteractionNetwork::uniform(double alpha, std::size_t n, CovarianceSpec a) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "N must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail(ErrorCode::InvalidArgument, "alpha must be nonnegative");
  if (a.dimension() != n) fail(ErrorCode::DimensionMismatch, "Q and A dimensions differ");
  InteractionNetwork net(n, std::move(a));
  net.alpha_ = alpha;
  return net;
}

InteractionNetwork InteractionNetwork::uniform(double alpha, std::size_t n) {
  return uniform(alpha, n, CovarianceSpec::identity(n));
}

double InteractionNetwork::q(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) fail(ErrorCode::IndexOutOfRange, fmt::format("q({}, {}) outside {}", i, j, n_));
  if (q_) return (*q_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return alpha_ / static_cast<double>(n_);
}

Eigen::MatrixXd InteractionNetwork::weights() const {
  if (q_) return *q_;
  if (n_ > 4096) fail(ErrorCode::TooLarge, "refusing to materialize a large uniform Q");
  const auto n = static_cast<Eigen::Index>(n_);
  return Eigen::MatrixXd::Constant(n, n, alpha_ / static_cast<double>(n_));
}

const Eigen::MatrixXd& InteractionNetwork::dense_weights() const {
  if (!q_) fail(ErrorCode::PreconditionViolated, "uniform network has no stored matrix");
  return *q_;
}

// ---------------------------------------------------------------------------
// Active nodes and minors
// ---------------------------------------------------------------------------

namespace {

void check_subset(const NodeSet& s, std::size_t n) {
  if (!s.empty() && s.indices().back() >= n)
    fail(ErrorCode::IndexOutOfRange, fmt::format("node {} outside network of size {}", s.indices().back(), n));
}

}  // namespace

NodeSet active_nodes(const NodeSet& subset, const InteractionNetwork& net) {
  check_subset(subset, net.size());
  const auto& idx = subset.indices();
  const CovarianceSpec& a = net.covariance();

  if (net.is_uniform()) {
    bool any_noisy = false;
    for (std::size_t i : idx) any_noisy = any_noisy || a.diagonal(i) > 0.0;
    if (!any_noisy) return {};
    if (net.alpha() > 0.0) return subset;
    std::vector<std::size_t> out;
    for (std::size_t i : idx)
      if (a.diagonal(i) > 0.0) out.push_back(i);
    return NodeSet(std::move(out));
  }

  const std::size_t m = idx.size();
  std::vector<char> seen(m, 0);
  std::vector<std::size_t> stack;
  for (std::size_t r = 0; r < m; ++r)
    if (a.diagonal(idx[r]) > 0.0) {
      seen[r] = 1;
      stack.push_back(r);
    }
  while (!stack.empty()) {
    const std::size_t r = stack.back();
    stack.pop_back();
    // Edge (i, j) exists when q_ji > 0.
    for (std::size_t c = 0; c < m; ++c)
      if (!seen[c] && net.q(idx[c], idx[r]) > 0.0) {
        seen[c] = 1;
        stack.push_back(c);
      }
  }
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < m; ++r)
    if (seen[r]) out.push_back(idx[r]);
  return NodeSet(std::move(out));
}

Eigen::MatrixXd minor(const InteractionNetwork& net, const NodeSet& subset) {
  check_subset(subset, net.size());
  const auto& idx = subset.indices();
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(m, m);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c) out(r, c) = net.q(idx[r], idx[c]);
  return out;
}

// ---------------------------------------------------------------------------
// Perron roots
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kMaxSweeps = 100000;

// Tarjan's algorithm on the graph r -> c iff b(r, c) > 0. Components are
// emitted sinks first.
std::vector<std::vector<std::size_t>> strongly_connected(const Eigen::MatrixXd& b) {
  const std::size_t n = static_cast<std::size_t>(b.rows());
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (b(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) > 0.0) adj[r].push_back(c);

  std::vector<std::vector<std::size_t>> out;
  std::vector<std::ptrdiff_t> index(n, -1), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::ptrdiff_t counter = 0;

  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = 1;
    for (std::size_t w : adj[v]) {
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> comp;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = 0;
        comp.push_back(w);
      } while (w != v);
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (index[v] < 0) visit(v);
  return out;
}

struct BlockPerron {
  double rho;
  Eigen::VectorXd left;  // positive, l1-normalized
};

// Shifted power iteration on the transpose of an irreducible block, with
// Collatz-Wielandt bounds as the stopping rule.
BlockPerron irreducible_perron(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n == 1) return {m(0, 0), Eigen::VectorXd::Ones(1)};

  const double shift = 0.5 * m.rowwise().sum().maxCoeff();
  const Eigen::MatrixXd mt = m.transpose();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double best_gap = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x;
  double best_rho = 0.0;
  std::size_t last_improvement = 0;

  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    Eigen::VectorXd y = mt * x + shift * x;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = y(i) / x(i);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const double gap = hi - lo;
    if (gap < best_gap) {
      best_gap = gap;
      best_rho = 0.5 * (lo + hi) - shift;
      best_x = x;
      last_improvement = sweep;
    }
    if (gap <= 1e-14 * hi || (gap <= 1e-10 * hi && sweep - last_improvement > 20)) {
      return {best_rho, best_x / best_x.sum()};
    }
    x = y / y.sum();
  }
  fail(ErrorCode::NoConvergence,
       fmt::format("power iteration did not converge in {} sweeps (rho ~ {:.12g}, Collatz-Wielandt gap {:.3e})",
                   kMaxSweeps, best_rho, best_gap));
}

Eigen::MatrixXd sub(const Eigen::MatrixXd& b, const std::vector<std::size_t>& rows,
                    const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          b(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
  return out;
}

// Nodes reachable from `from` along r -> c iff b(r, c) > 0, excluding `from`.
std::vector<std::size_t> downstream(const Eigen::MatrixXd& b, const std::vector<std::size_t>& from) {
  const std::size_t n = static_cast<std::size_t>(b.rows());
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack(from.begin(), from.end());
  for (std::size_t v : from) seen[v] = 1;
  std::vector<std::size_t> out;
  while (!stack.empty()) {
    const std::size_t r = stack.back();
    stack.pop_back();
    for (std::size_t c = 0; c < n; ++c)
      if (!seen[c] && b(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) > 0.0) {
        seen[c] = 1;
        out.push_back(c);
        stack.push_back(c);
      }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_max(double rho_c, double rho) { return rho_c >= rho - 1e-9 * std::max(1.0, std::abs(rho)); }

}  // namespace

PerronAnalysis perron_analysis(const Eigen::MatrixXd& b, bool want_generators) {
  PerronAnalysis out;
  if (b.rows() != b.cols()) fail(ErrorCode::DimensionMismatch, "Perron analysis needs a square matrix");
  if (b.rows() == 0) return out;
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      if (b(i, j) < 0.0) fail(ErrorCode::NegativeEntry, fmt::format("entry ({}, {}) = {} < 0", i, j, b(i, j)));

  out.classes = strongly_connected(b);
  std::vector<Eigen::VectorXd> block_vectors;
  for (const auto& cls : out.classes) {
    BlockPerron bp = irreducible_perron(sub(b, cls, cls));
    out.class_rho.push_back(bp.rho);
    block_vectors.push_back(std::move(bp.left));
  }
  out.rho = *std::max_element(out.class_rho.begin(), out.class_rho.end());
  if (!want_generators) return out;

  const std::size_t n = static_cast<std::size_t>(b.rows());
  std::vector<std::ptrdiff_t> class_of(n, -1);
  for (std::size_t c = 0; c < out.classes.size(); ++c)
    for (std::size_t v : out.classes[c]) class_of[v] = static_cast<std::ptrdiff_t>(c);

  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    if (!is_max(out.class_rho[c], out.rho)) continue;
    const std::vector<std::size_t> down = downstream(b, out.classes[c]);
    // Distinguished: no other maximizing class downstream.
    bool distinguished = true;
    for (std::size_t v : down)
      if (is_max(out.class_rho[static_cast<std::size_t>(class_of[v])], out.rho)) distinguished = false;
    if (!distinguished) continue;

    Eigen::VectorXd v = Eigen::VectorXd::Zero(b.rows());
    const auto& cls = out.classes[c];
    for (std::size_t r = 0; r < cls.size(); ++r) v(static_cast<Eigen::Index>(cls[r])) = block_vectors[c](r);
    if (!down.empty()) {
      // (rho I - B_DD^T) v_D = B_CD^T v_C on the downstream nodes D.
      const Eigen::MatrixXd bdd = sub(b, down, down);
      const Eigen::MatrixXd bcd = sub(b, cls, down);
      const auto nd = static_cast<Eigen::Index>(down.size());
      const Eigen::MatrixXd lhs = out.rho * Eigen::MatrixXd::Identity(nd, nd) - bdd.transpose();
      const Eigen::VectorXd rhs = bcd.transpose() * block_vectors[c];
      Eigen::VectorXd vd = lhs.fullPivLu().solve(rhs);
      for (std::size_t r = 0; r < down.size(); ++r)
        v(static_cast<Eigen::Index>(down[r])) = std::max(0.0, vd(static_cast<Eigen::Index>(r)));
    }
    v /= v.sum();
    out.generators.push_back(std::move(v));
    out.generator_class.push_back(c);
  }
  return out;
}

SpectralResult spectral_radius(const InteractionNetwork& net, const NodeSet& subset, bool want_vector) {
  check_subset(subset, net.size());
  SpectralResult res;
  if (subset.empty()) return res;
  const std::size_t m = subset.size();

  if (net.is_uniform()) {
    const double alpha = net.alpha();
    res.rho = alpha * static_cast<double>(m) / static_cast<double>(net.size());
    if (alpha > 0.0) {
      res.component = subset;
      if (want_vector) res.vector = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
    } else {
      res.rho = 0.0;
      res.component = NodeSet{subset.indices().front()};
      if (want_vector) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
        v(0) = 1.0;
        res.vector = v;
      }
    }
    return res;
  }

  const PerronAnalysis pa = perron_analysis(minor(net, subset), want_vector);
  res.rho = pa.rho;
  std::size_t comp = 0;
  if (want_vector) {
    res.vector = pa.generators.front();
    comp = pa.generator_class.front();
  } else {
    comp = static_cast<std::size_t>(
        std::max_element(pa.class_rho.begin(), pa.class_rho.end()) - pa.class_rho.begin());
  }
  std::vector<std::size_t> orig;
  for (std::size_t r : pa.classes[comp]) orig.push_back(subset.indices()[r]);
  res.component = NodeSet(std::move(orig));
  return res;
}

// ---------------------------------------------------------------------------
// Regime classification
// ---------------------------------------------------------------------------

std::string_view to_string(Regime r) noexcept {
  switch (r) {
    case Regime::Subcritical: return "Subcritical";
    case Regime::Critical: return "Critical";
    case Regime::Supercritical: return "Supercritical";
  }
  return "Unknown";
}

std::string_view to_string(FiniteBreakdown f) noexcept {
  switch (f) {
    case FiniteBreakdown::Always: return "Always";
    case FiniteBreakdown::Never: return "Never";
    case FiniteBreakdown::InitialConditionDependent: return "InitialConditionDependent";
  }
  return "Unknown";
}

RegimeReport classify_regime(const InteractionNetwork& net, const NodeSet& zero_support) {
  const std::size_t n = net.size();
  if (n > 16) fail(ErrorCode::TooLarge, fmt::format("exhaustive classification supports N <= 16, got {}", n));
  check_subset(zero_support, n);

  RegimeReport rep;
  const double tol = rep.tolerance;
  auto is_one = [tol](double rho) { return std::abs(rho - 1.0) <= tol; };

  rep.rho_active = spectral_radius(net, active_nodes(NodeSet::all(n), net)).rho;
  if (rep.rho_active > 1.0 + tol) {
    rep.regime = Regime::Supercritical;
  } else if (is_one(rep.rho_active)) {
    rep.regime = Regime::Critical;
  } else {
    rep.regime = Regime::Subcritical;
  }
  rep.rho_initial = spectral_radius(net, active_nodes(zero_support, net)).rho;
  rep.condition_a = rep.regime == Regime::Supercritical;
  rep.condition_c = rep.rho_initial >= 1.0 - tol;

  if (rep.regime == Regime::Critical) {
    // Every v in the eigencone is a nonnegative combination of the extremal
    // generators, and for PSD A the set {v : v^T A v = 0} is the kernel of A,
    // a linear space. So the cone escapes the kernel iff some generator does.
    std::unordered_map<std::uint64_t, bool> done;
    bool all_ok = true;
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    for (std::uint64_t mask = 1; mask <= full; ++mask) {
      ++rep.subsets_scanned;
      const NodeSet ia = active_nodes(NodeSet::from_mask(mask, n), net);
      if (ia.empty()) continue;
      const std::uint64_t key = ia.mask();
      if (done.count(key)) continue;
      const PerronAnalysis pa = perron_analysis(minor(net, ia), true);
      bool ok = true;
      if (is_one(pa.rho)) {
        const Eigen::MatrixXd a = net.covariance().principal_minor(ia.indices());
        ok = false;
        for (const Eigen::VectorXd& v : pa.generators) {
          const double quad = v.dot(a * v);
          rep.witnesses.push_back({ia, v, quad});
          if (quad > 1e-12) ok = true;
        }
        if (!ok) rep.degenerate_subsets.push_back(ia);
      }
      done.emplace(key, ok);
      all_ok = all_ok && ok;
    }
    rep.condition_b = all_ok;
  }

  if (rep.condition_a || rep.condition_b) {
    rep.finite_breakdown = FiniteBreakdown::Always;
  } else if (rep.regime == Regime::Critical) {
    rep.finite_breakdown = FiniteBreakdown::InitialConditionDependent;
  } else {
    rep.finite_breakdown = FiniteBreakdown::Never;
  }
  return rep;
}

}  // namespace ltsim
