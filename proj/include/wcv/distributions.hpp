#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wcv/linalg.hpp"

namespace wcv {

/// Probability vector check shared by the distribution types: entries must be
/// finite and nonnegative and sum to 1 within 1e-9. Returns the renormalized
/// vector; throws InvalidInput otherwise.
Eigen::VectorXd normalized_probabilities(const Eigen::VectorXd& p, const char* what);

/// Weighted support points; row j of `support` is x_j.
class DiscreteDistribution {
 public:
  DiscreteDistribution(Eigen::MatrixXd support, const Eigen::VectorXd& weights);

  static DiscreteDistribution uniform(Eigen::MatrixXd support);

  Eigen::Index dim() const { return support_.cols(); }
  Eigen::Index size() const { return support_.rows(); }
  const Eigen::MatrixXd& support() const { return support_; }
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  Eigen::MatrixXd support_;
  Eigen::VectorXd weights_;
};

/// N(mean, covariance). Zero covariance is allowed and models a point mass.
class GaussianComponent {
 public:
  // Validates dimensions and numerical PSD-ness (lambda_min >= -1e-10 lambda_max).
  GaussianComponent(Eigen::VectorXd mean, SymMatrix covariance);

  static GaussianComponent point_mass(Eigen::VectorXd mean);

  // Skips the PSD check; for covariances that are PSD by construction.
  static GaussianComponent trusted(Eigen::VectorXd mean, SymMatrix covariance);

  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const SymMatrix& covariance() const { return covariance_; }
  bool degenerate() const { return degenerate_; }

 private:
  struct Trusted {};
  GaussianComponent(Trusted, Eigen::VectorXd mean, SymMatrix covariance);

  Eigen::VectorXd mean_;
  SymMatrix covariance_;
  bool degenerate_ = false;
};

class GaussianMixture {
 public:
  GaussianMixture(std::vector<GaussianComponent> components, const Eigen::VectorXd& priors);
  // Keeps `priors` bit-for-bit; for vectors already validated by another mixture.
  static GaussianMixture trusted(std::vector<GaussianComponent> components, Eigen::VectorXd priors);

  Eigen::Index dim() const { return components_.front().dim(); }
  Eigen::Index size() const { return static_cast<Eigen::Index>(components_.size()); }
  const std::vector<GaussianComponent>& components() const { return components_; }
  const GaussianComponent& component(Eigen::Index i) const { return components_[static_cast<std::size_t>(i)]; }
  const Eigen::VectorXd& priors() const { return priors_; }

  // Sum_i p_i Sigma_i; the covariance part of the scatter matrices.
  Eigen::MatrixXd weighted_covariance() const;

 private:
  struct Trusted {};
  GaussianMixture(Trusted, std::vector<GaussianComponent> components, Eigen::VectorXd priors);
  void check_shapes() const;

  std::vector<GaussianComponent> components_;
  Eigen::VectorXd priors_;
};

struct LabeledSample {
  std::string id;
  GaussianMixture distribution;
  int label = 0;  // class index in [0, num_classes)
};

/// Number of classes implied by a sample set (max label + 1). Throws
/// InvalidInput on negative labels or an empty set.
int class_count(const std::vector<LabeledSample>& samples);

/// One zero-covariance component per support point, prior = weight.
GaussianMixture from_discrete(const DiscreteDistribution& q);

/// Maps every component to N(A^t mu, A^t Sigma A); priors unchanged.
GaussianMixture project(const GaussianMixture& g, const Eigen::MatrixXd& a);

/// {"priors": [...], "means": [[...]], "covariances": [[[...]]]}, row-major.
nlohmann::json to_json(const GaussianMixture& g);
GaussianMixture gmm_from_json(const nlohmann::json& j);

}  // namespace wcv
