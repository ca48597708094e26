#pragma once

// Turning data clouds (unordered point sets, one per instance) into labeled
// Gaussian mixtures.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wcv/distributions.hpp"

namespace wcv {

struct DataCloud {
  std::string id;
  Eigen::MatrixXd points;  // one row per point; row order carries no meaning
  int label = 0;
};

enum class ClusteringScheme {
  Combined,  // pool every cloud's points, cluster once, split per cloud
  Separate,  // cluster each cloud on its own
};

std::string to_string(ClusteringScheme scheme);
ClusteringScheme parse_scheme(const std::string& text);

struct GmmBuildConfig {
  ClusteringScheme scheme = ClusteringScheme::Separate;
  int components = 3;
  int small_sample_threshold = 10;  // clouds below this get a single Gaussian
  double perturbation_sd = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidInput
  nlohmann::json to_json() const;
};

/// Throws EmptyCloud / DimensionMismatch on malformed clouds.
void validate_clouds(const std::vector<DataCloud>& clouds);

/// Mean and unbiased covariance of the given rows. A single row gets the
/// covariance of ten copies jittered with N(0, sd^2) noise; the stream is
/// derived from (seed, stream_a, stream_b).
GaussianComponent moment_component(const Eigen::MatrixXd& points, double perturbation_sd, std::uint64_t seed,
                                   std::uint64_t stream_a, std::uint64_t stream_b);

/// Builds one mixture per cloud. Component counts that exceed a cloud's size
/// are reduced and reported through `warnings`. In the combined scheme,
/// clusters a cloud has no points in are left out of its mixture.
std::vector<LabeledSample> build_gmms(const std::vector<DataCloud>& clouds, const GmmBuildConfig& config,
                                      std::vector<std::string>* warnings = nullptr);

/// Combined-scheme mixtures for one leave-one-out fold: clustering uses only
/// the training clouds, and the held-out cloud's points are assigned to the
/// nearest training centroid.
struct CombinedFold {
  std::vector<LabeledSample> training;  // clouds in order, held-out removed
  LabeledSample held_out;
};
CombinedFold build_combined_fold(const std::vector<DataCloud>& clouds, const GmmBuildConfig& config,
                                 std::size_t held_out);

/// Keeps the k coordinates with the largest pooled variance (ties by index),
/// in ascending coordinate order.
std::vector<DataCloud> select_top_variable_features(const std::vector<DataCloud>& clouds, int k,
                                                    std::vector<int>* selected = nullptr);

}  // namespace wcv
