#pragma once

// Exact optimal transport and the Gaussian / mixture distances built on it.

#include <Eigen/Dense>

#include "wcv/distributions.hpp"

namespace wcv {

/// Transport plan between two marginals. Construction checks nonnegativity
/// and that row/column sums match the marginals within 1e-8.
class Coupling {
 public:
  Coupling(Eigen::MatrixXd plan, Eigen::VectorXd row_marginal, Eigen::VectorXd col_marginal);

  const Eigen::MatrixXd& plan() const { return plan_; }
  const Eigen::VectorXd& row_marginal() const { return row_marginal_; }
  const Eigen::VectorXd& col_marginal() const { return col_marginal_; }

  Coupling transposed() const;

 private:
  Eigen::MatrixXd plan_;
  Eigen::VectorXd row_marginal_;
  Eigen::VectorXd col_marginal_;
};

struct OtResult {
  double cost = 0.0;  // sum_ij plan_ij * cost_ij
  Coupling coupling;
};

/// Exact solution of the transportation LP min <pi, cost> subject to the
/// marginal constraints, by the transportation (network) simplex method. The
/// returned plan is a basic optimal solution. Zero-mass rows and columns are
/// removed before solving and restored as zero rows/columns.
/// Throws MarginalMismatch when the total masses differ by more than 1e-6.
OtResult solve_ot(const Eigen::MatrixXd& cost, const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// Squared 2-Wasserstein distance with squared Euclidean ground cost.
OtResult wasserstein2_discrete(const DiscreteDistribution& q1, const DiscreteDistribution& q2);

/// Closed-form squared W2 between Gaussians:
/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2), clamped at 0.
double gaussian_w2(const GaussianComponent& c1, const GaussianComponent& c2);

/// Transport cost under the independent coupling: |mu1 - mu2|^2 + tr S1 + tr S2.
/// Always >= gaussian_w2.
double gaussian_what2(const GaussianComponent& c1, const GaussianComponent& c2);

/// Matrix of gaussian_w2 between all component pairs (rows: g1, cols: g2).
Eigen::MatrixXd component_cost_matrix(const GaussianMixture& g1, const GaussianMixture& g2);

/// Squared MAW distance: OT over the priors with gaussian_w2 ground cost.
OtResult maw2(const GaussianMixture& g1, const GaussianMixture& g2);

}  // namespace wcv
