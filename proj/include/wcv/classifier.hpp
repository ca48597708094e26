#pragma once

// Distance-kernel pseudo-mixture classifier over Gaussian mixtures.
//
//   psi_l(G) = 1/|I_l| sum_{j in I_l} (pi b)^(-s) exp(-MAW^2(G, G_j) / b)
//   P(Y = l | G) ∝ alpha_l psi_l(G)
//
// Everything is evaluated in the log domain; the (pi b)^(-s) factor is common
// to all classes and cancels in the posterior.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wcv/distributions.hpp"
#include "wcv/otaf.hpp"

namespace wcv {

struct ClassifierConfig {
  std::optional<double> shape;  // s; defaults to the reference dimension
  std::optional<double> scale;  // b; defaults to the median pairwise squared MAW
};

struct PseudoMixtureModel {
  std::vector<GaussianMixture> references;  // in reduced space when projected
  std::vector<int> reference_labels;
  int num_classes = 0;
  double shape = 1.0;
  double scale = 1.0;
  Eigen::VectorXd class_priors;
  std::optional<ProjectionMatrix> projection;

  Eigen::Index reference_dim() const { return references.front().dim(); }

  // Applies the projection (if any) to a native-space mixture.
  GaussianMixture to_reference_space(const GaussianMixture& g) const;
};

/// Median of the pairwise squared MAW distances (upper triangle) in `d2`.
double median_pairwise(const Eigen::MatrixXd& d2);

/// Throws EmptyClass if some class in [0, num_classes) has no training sample.
/// `train_distances`, when given, holds the pairwise squared MAW between the
/// training references in reference space and skips recomputing it.
PseudoMixtureModel fit_pseudo_mixture(const std::vector<LabeledSample>& train, int num_classes,
                                      const std::optional<ProjectionMatrix>& projection,
                                      const ClassifierConfig& config = {},
                                      const Eigen::MatrixXd* train_distances = nullptr);

/// Squared MAW from g (reference space) to every reference.
Eigen::VectorXd reference_distances(const PseudoMixtureModel& model, const GaussianMixture& g);

double log_pseudo_density(const PseudoMixtureModel& model, int label, std::span<const double> distances);
double pseudo_density(const PseudoMixtureModel& model, int label, const GaussianMixture& g);

/// Posterior over classes from reference distances. If every class score is
/// -inf or NaN the nearest reference's class gets probability 1.
Eigen::VectorXd posterior_from_distances(const PseudoMixtureModel& model, std::span<const double> distances);
Eigen::VectorXd posterior(const PseudoMixtureModel& model, const GaussianMixture& g);

/// argmax of the posterior, lowest class index on ties.
int predict(const Eigen::VectorXd& posterior);

nlohmann::json to_json(const PseudoMixtureModel& model);
PseudoMixtureModel pseudo_mixture_from_json(const nlohmann::json& j);

}  // namespace wcv
