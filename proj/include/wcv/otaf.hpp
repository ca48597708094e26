#pragma once

// Supervised dimension reduction for mixture-valued instances: alternate
// between exact transport couplings under the current projection and a
// generalized-eigenvector update of the projection that maximizes the ratio
// of between-class to within-class transport variation.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wcv/distributions.hpp"
#include "wcv/linalg.hpp"
#include "wcv/transport.hpp"

namespace wcv {

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Ordered instance pairs entering the between-class (different labels) and
/// within-class (equal labels) variations. The first index of every pair is
/// an anchor.
struct PairSets {
  std::vector<std::size_t> anchors;
  std::vector<IndexPair> between;
  std::vector<IndexPair> within;
};

/// One coupling per pair, aligned with PairSets::between / ::within. Row
/// marginal = priors of the first instance, column marginal = second.
struct PairCouplings {
  std::vector<Coupling> between;
  std::vector<Coupling> within;
};

struct ScatterMatrices {
  SymMatrix between;
  SymMatrix within;
};

enum class RidgePolicy {
  Auto,   // auto_ridge(): only when lambda_min / lambda_max < 1e-10
  None,
  Fixed,  // OtafConfig::ridge
};

struct OtafConfig {
  int reduced_dim = 1;
  double alpha = 1.0 / 3.0;  // fraction of hardest instances used as anchors
  int min_iters = 2;
  int max_iters = 30;
  double epsilon = 1e-4;  // relative-increase threshold on the Fisher ratio
  bool orthonormal = true;
  RidgePolicy ridge_policy = RidgePolicy::Auto;
  double ridge = 0.0;

  // Throws InvalidInput. Requires 0 < reduced_dim < ambient_dim,
  // 0 < alpha <= 1, 1 <= min_iters <= max_iters, max_iters >= 2, epsilon > 0.
  void validate(Eigen::Index ambient_dim) const;
};

/// d x d' matrix whose columns are the discriminant coordinates.
class ProjectionMatrix {
 public:
  // Throws InvalidInput on non-finite entries and RankDeficient when the
  // columns are not linearly independent.
  explicit ProjectionMatrix(Eigen::MatrixXd a);

  static ProjectionMatrix identity(Eigen::Index dim);

  const Eigen::MatrixXd& matrix() const { return a_; }
  Eigen::Index ambient_dim() const { return a_.rows(); }
  Eigen::Index reduced_dim() const { return a_.cols(); }

 private:
  Eigen::MatrixXd a_;
};

struct OtafResult {
  ProjectionMatrix projection;
  // fisher_trace[t] is r(A) after t updates; t = 0 is A = I (no reduction).
  std::vector<double> fisher_trace;
  // Grassmann distance between the spans of consecutive reduced iterates;
  // NaN where no previous reduced iterate exists (t = 0, 1).
  std::vector<double> grassmann_trace;
  int iterations = 0;  // value of the iteration counter at exit (>= 2)
  bool converged = false;
  int best_iteration = 0;  // index into fisher_trace of the returned projection
  PairSets pairs;
};

/// All pairwise squared MAW distances and optimal component couplings of a
/// sample set in its native dimension. Fold-level fits reuse a subset of it.
class PairwiseTransport {
 public:
  static PairwiseTransport compute(const std::vector<LabeledSample>& samples);

  std::size_t size() const { return static_cast<std::size_t>(distances_.rows()); }
  const Eigen::MatrixXd& distances() const { return distances_; }
  double distance(std::size_t i, std::size_t j) const {
    return distances_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  // Plan with rows indexed by i's components. i != j.
  Coupling coupling(std::size_t i, std::size_t j) const;

  PairwiseTransport subset(std::span<const std::size_t> indices) const;

 private:
  std::size_t slot(std::size_t i, std::size_t j) const;

  Eigen::MatrixXd distances_;
  std::vector<Coupling> couplings_;  // upper triangle, row-major order
};

/// gamma_k = (mean squared MAW to other-class instances) / (mean squared MAW
/// to same-class instances). +inf when the same-class mean is zero.
/// Throws SingletonClass if any class has a single member, InvalidInput with
/// fewer than two classes.
std::vector<double> discriminant_ratios(const std::vector<LabeledSample>& samples);
std::vector<double> discriminant_ratios(std::span<const int> labels, const Eigen::MatrixXd& distances);

/// Anchors are the ceil(alpha * n) instances with the smallest gamma (ties by
/// index). Pairs are (anchor, k) for every k != anchor, sorted by anchor then
/// k. Throws EmptyPairSet if either set comes out empty.
PairSets select_pairs(std::span<const int> labels, std::span<const double> gammas, double alpha);

/// Between/within scatter under fixed couplings:
///   C = 1/|I| sum_pairs [ sum_ij pi_ij (mu_i - mu_j)(mu_i - mu_j)^t
///                         + sum_i p_i S_i + sum_j q_j S_j ].
/// Throws MarginalMismatch if a coupling's marginals differ from the priors.
ScatterMatrices scatter_matrices(const std::vector<LabeledSample>& samples, const PairSets& pairs,
                                 const PairCouplings& couplings);

/// tr(A^t Cb A) / tr(A^t Cw A). Throws DegenerateWithinVariation when the
/// denominator is not positive.
double fisher_ratio(const SymMatrix& between, const SymMatrix& within, const Eigen::MatrixXd& a);

ProjectionMatrix solve_directions(const SymMatrix& between, const SymMatrix& within, int reduced_dim,
                                  bool orthonormal, RidgePolicy ridge_policy = RidgePolicy::Auto,
                                  double ridge = 0.0);

/// Transport solutions for every pair under the given (already projected)
/// samples, with the between / within mean squared MAW.
struct PairTransport {
  PairCouplings couplings;
  double between_mean = 0.0;
  double within_mean = 0.0;

  // Throws DegenerateWithinVariation when within_mean is zero.
  double ratio() const;
};

PairTransport solve_pair_transport(const std::vector<LabeledSample>& samples, const PairSets& pairs);

/// Fisher's ratio of transport variations r(A) with exact MAW distances.
double variation_ratio(const std::vector<LabeledSample>& samples, const PairSets& pairs, const Eigen::MatrixXd& a);

/// The alternating optimization. `original` may carry precomputed pairwise
/// transport for `samples` in their native dimension. Returns the iterate with
/// the highest Fisher ratio.
OtafResult fit(const std::vector<LabeledSample>& samples, const OtafConfig& config,
               const PairwiseTransport* original = nullptr);

std::vector<LabeledSample> project_samples(const std::vector<LabeledSample>& samples, const Eigen::MatrixXd& a);

}  // namespace wcv
