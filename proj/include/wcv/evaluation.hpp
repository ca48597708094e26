#pragma once

// Leave-one-out evaluation of OTAF + pseudo-mixture classification.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wcv/classifier.hpp"
#include "wcv/gmm_build.hpp"
#include "wcv/otaf.hpp"

namespace wcv {

/// A way of turning the instances of a data set into mixtures for one fold.
/// Training mixtures may depend on which instance is held out (combined
/// clustering is refit without it).
class Representation {
 public:
  virtual ~Representation() = default;

  virtual std::size_t size() const = 0;
  virtual const std::string& id(std::size_t k) const = 0;
  virtual int label(std::size_t k) const = 0;

  // Mixtures of every instance except k, in order.
  virtual std::vector<LabeledSample> training(std::size_t held_out) const = 0;
  // Instance k as seen from a model trained without it.
  virtual LabeledSample held_out(std::size_t k) const = 0;
  // Native-space pairwise transport of training(held_out), if available.
  virtual std::optional<PairwiseTransport> training_transport(std::size_t held_out) const;

  virtual nlohmann::json describe() const = 0;
};

/// Fixed mixtures; pairwise transport is computed once and sliced per fold.
class SampleRepresentation final : public Representation {
 public:
  explicit SampleRepresentation(std::vector<LabeledSample> samples, std::string name = "samples");

  std::size_t size() const override { return samples_.size(); }
  const std::string& id(std::size_t k) const override { return samples_[k].id; }
  int label(std::size_t k) const override { return samples_[k].label; }
  std::vector<LabeledSample> training(std::size_t held_out) const override;
  LabeledSample held_out(std::size_t k) const override { return samples_[k]; }
  std::optional<PairwiseTransport> training_transport(std::size_t held_out) const override;
  nlohmann::json describe() const override;

  const std::vector<LabeledSample>& samples() const { return samples_; }

 private:
  std::vector<LabeledSample> samples_;
  std::string name_;
  std::shared_ptr<const PairwiseTransport> transport_;
};

/// Data clouds under a GMM build configuration. With the separate scheme the
/// mixtures do not depend on the fold; with the combined scheme clustering is
/// redone on the training clouds of each fold.
class CloudRepresentation final : public Representation {
 public:
  CloudRepresentation(std::vector<DataCloud> clouds, GmmBuildConfig config, std::string name = "clouds");

  std::size_t size() const override { return clouds_.size(); }
  const std::string& id(std::size_t k) const override { return clouds_[k].id; }
  int label(std::size_t k) const override { return clouds_[k].label; }
  std::vector<LabeledSample> training(std::size_t held_out) const override;
  LabeledSample held_out(std::size_t k) const override;
  std::optional<PairwiseTransport> training_transport(std::size_t held_out) const override;
  nlohmann::json describe() const override;

 private:
  std::vector<DataCloud> clouds_;
  GmmBuildConfig config_;
  std::string name_;
  std::optional<SampleRepresentation> separate_;  // set for the separate scheme
};

struct EvaluationConfig {
  bool reduce = true;  // false: classify in the native space
  OtafConfig otaf;
  ClassifierConfig classifier;

  nlohmann::json to_json() const;
};

struct FoldOutcome {
  std::size_t index = 0;
  std::string id;
  int true_label = 0;
  bool skipped = false;
  std::string skip_reason;
  Eigen::VectorXd posterior;  // empty when skipped
  int predicted = -1;
  // OTAF diagnostics; empty without reduction.
  std::vector<double> fisher_trace;
  std::vector<double> grassmann_trace;
  int iterations = 0;
  bool converged = false;
  int best_iteration = 0;
  Eigen::MatrixXd projection;
  std::uint64_t training_hash = 0;  // fingerprint of everything the fold was fitted on
};

struct EvaluationReport {
  std::vector<FoldOutcome> folds;
  int num_classes = 0;
  std::size_t skipped = 0;
  double accuracy = 0.0;  // NaN when every fold was skipped
  double auc = 0.0;       // NaN when undefined (a class missing among scored folds)
};

/// Rank-based AUC (Mann-Whitney, ties count 1/2). Throws InvalidInput when
/// either group is empty or the spans differ in length.
double auc(std::span<const double> scores, std::span<const int> positive);

/// AUC of posteriors against labels: class 1 vs class 0 for two classes, the
/// macro one-vs-rest average otherwise. NaN when no class can be scored.
double posterior_auc(const std::vector<Eigen::VectorXd>& posteriors, std::span<const int> labels);

/// Fingerprint of a training set: ids, labels, priors, means, covariances.
std::uint64_t hash_samples(const std::vector<LabeledSample>& samples);

EvaluationReport leave_one_out(const Representation& data, const EvaluationConfig& config);
EvaluationReport leave_one_out(const std::vector<LabeledSample>& samples, const EvaluationConfig& config);

/// grid[i][j]: training folds drawn from representation i, held-out instances
/// from representation j. Throws IdMismatch unless every representation lists
/// the same ids and labels in the same order.
std::vector<std::vector<EvaluationReport>> cross_representation_eval(
    const std::vector<const Representation*>& representations, const EvaluationConfig& config);

}  // namespace wcv
