#pragma once

// Interaction matrices: active nodes, minors, Perron roots and left
// eigenvectors, and the finite-time breakdown classifier.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ltsim/timegrid_noise.hpp"

namespace ltsim {

/// Sorted, duplicate-free subset of {0, ..., N-1}.
class NodeSet {
 public:
  NodeSet() = default;
  NodeSet(std::initializer_list<std::size_t> idx);
  explicit NodeSet(std::vector<std::size_t> idx);

  static NodeSet all(std::size_t n);
  static NodeSet from_mask(std::uint64_t mask, std::size_t n);

  const std::vector<std::size_t>& indices() const noexcept { return idx_; }
  std::size_t size() const noexcept { return idx_.size(); }
  bool empty() const noexcept { return idx_.empty(); }
  bool contains(std::size_t i) const noexcept;
  bool is_subset_of(const NodeSet& other) const noexcept;
  /// Bitmask form; only valid when every index is < 64.
  std::uint64_t mask() const;

  auto begin() const noexcept { return idx_.begin(); }
  auto end() const noexcept { return idx_.end(); }

  friend bool operator==(const NodeSet&, const NodeSet&) = default;

 private:
  std::vector<std::size_t> idx_;
};

/// Nonnegative weights Q together with the noise covariance A. The uniform
/// form q_ij = alpha/N is stored implicitly so that large symmetric systems
/// never allocate an N x N matrix.
class InteractionNetwork {
 public:
  static InteractionNetwork dense(Eigen::MatrixXd q, CovarianceSpec a);
  static InteractionNetwork uniform(double alpha, std::size_t n, CovarianceSpec a);
  /// Uniform weights with independent standard noise.
  static InteractionNetwork uniform(double alpha, std::size_t n);

  std::size_t size() const noexcept { return n_; }
  bool is_uniform() const noexcept { return !q_.has_value(); }
  /// Interaction strength of the uniform form.
  double alpha() const noexcept { return alpha_; }
  double q(std::size_t i, std::size_t j) const;
  const CovarianceSpec& covariance() const noexcept { return a_; }
  /// Materialized Q (TooLarge beyond 4096 nodes).
  Eigen::MatrixXd weights() const;
  /// Stored matrix of the dense form (PreconditionViolated for uniform).
  const Eigen::MatrixXd& dense_weights() const;

 private:
  InteractionNetwork(std::size_t n, CovarianceSpec a) : n_(n), a_(std::move(a)) {}
  std::size_t n_;
  double alpha_ = 0.0;
  std::optional<Eigen::MatrixXd> q_;
  CovarianceSpec a_;
};

/// I^a: nodes of I reachable inside I from a node with a_jj > 0, following
/// edges (i, j) whenever q_ji > 0.
NodeSet active_nodes(const NodeSet& subset, const InteractionNetwork& net);

/// Q[I] as a dense |I| x |I| matrix.
Eigen::MatrixXd minor(const InteractionNetwork& net, const NodeSet& subset);

inline constexpr double kRhoEmpty = -std::numeric_limits<double>::infinity();

struct SpectralResult {
  double rho = kRhoEmpty;
  /// Left eigenvector over the indices of I (same order), l1-normalized.
  std::optional<Eigen::VectorXd> vector;
  /// Strongly connected component attaining rho, in original node indices.
  NodeSet component;
};

SpectralResult spectral_radius(const InteractionNetwork& net, const NodeSet& subset, bool want_vector = false);

struct PerronAnalysis {
  double rho = kRhoEmpty;
  /// Strongly connected classes (local indices), sinks of the graph b_rc > 0 first.
  std::vector<std::vector<std::size_t>> classes;
  std::vector<double> class_rho;
  /// Extremal nonnegative left eigenvectors for rho, one per distinguished
  /// class; every nonnegative left eigenvector is a nonnegative combination.
  std::vector<Eigen::VectorXd> generators;
  std::vector<std::size_t> generator_class;
};

/// Perron root of a square nonnegative matrix via SCC decomposition and
/// shifted power iteration on each irreducible block (relative tolerance
/// 1e-10, at most 1e5 sweeps per block).
PerronAnalysis perron_analysis(const Eigen::MatrixXd& b, bool want_generators);

enum class Regime { Subcritical, Critical, Supercritical };
enum class FiniteBreakdown { Always, Never, InitialConditionDependent };

std::string_view to_string(Regime r) noexcept;
std::string_view to_string(FiniteBreakdown f) noexcept;

struct RegimeWitness {
  NodeSet subset;         ///< an active set I^a with rho(Q[I^a]) = 1
  Eigen::VectorXd vector; ///< eigencone generator over subset
  double quadratic;       ///< v^T A[I^a] v
};

struct RegimeReport {
  Regime regime = Regime::Subcritical;
  double rho_active = kRhoEmpty;
  FiniteBreakdown finite_breakdown = FiniteBreakdown::Never;
  bool condition_a = false;
  bool condition_b = false;
  /// rho(Q[I_0^a]) = 1 for the supplied zero support: breakdown at t = 0.
  bool condition_c = false;
  double rho_initial = kRhoEmpty;
  /// Active sets with rho = 1 whose whole eigencone is A-degenerate.
  std::vector<NodeSet> degenerate_subsets;
  std::vector<RegimeWitness> witnesses;
  double tolerance = 1e-9;
  std::size_t subsets_scanned = 0;
};

/// Exhaustive classification over all subsets (N <= 16).
RegimeReport classify_regime(const InteractionNetwork& net, const NodeSet& zero_support);

}  // namespace ltsim
