#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace wcv {

struct KMeansResult {
  std::vector<int> labels;    // cluster index per point
  Eigen::MatrixXd centroids;  // k x d
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixed point or 300 iterations. Empty clusters are re-seeded with the point
/// farthest from its centroid. k is clamped to the number of points.
/// Throws InvalidInput for k < 1 or an empty point set.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed);

/// Index of the nearest centroid for each row of `points` (ties: lowest index).
std::vector<int> assign_nearest(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids);

}  // namespace wcv
