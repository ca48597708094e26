#include <limits>
#include <random>

#include "wcv/clustering.hpp"
#include "wcv/error.hpp"
#include "wcv/kernels.hpp"

namespace wcv {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kMaxIterations = 300;

std::vector<int> assign(const RowMajor& x, const RowMajor& c, std::vector<double>* best_d2) {
  const auto& k = kernels::active();
  const auto d = static_cast<std::size_t>(x.cols());
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  if (best_d2 != nullptr) best_d2->assign(labels.size(), 0.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      const double dist = k.squared_distance(x.row(i).data(), c.row(j).data(), d);
      if (dist < best) {
        best = dist;
        arg = static_cast<int>(j);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
    if (best_d2 != nullptr) (*best_d2)[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

RowMajor seed_plus_plus(const RowMajor& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  const auto d = static_cast<std::size_t>(x.cols());
  const auto& kern = kernels::active();
  RowMajor centers(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = kern.squared_distance(x.row(i).data(), centers.row(0).data(), d);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (const double v : d2) total += v;
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[static_cast<std::size_t>(i)];
        if (target < 0.0 && d2[static_cast<std::size_t>(i)] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = x.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = kern.squared_distance(x.row(i).data(), centers.row(c).data(), d);
      if (v < d2[static_cast<std::size_t>(i)]) d2[static_cast<std::size_t>(i)] = v;
    }
  }
  return centers;
}

}  // namespace

std::vector<int> assign_nearest(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids) {
  if (points.cols() != centroids.cols()) throw Error(ErrorCode::DimensionMismatch, "points and centroids differ in dimension");
  if (centroids.rows() == 0) throw Error(ErrorCode::InvalidInput, "no centroids");
  return assign(RowMajor(points), RowMajor(centroids), nullptr);
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
  if (points.rows() == 0) throw Error(ErrorCode::InvalidInput, "k-means on an empty point set");
  if (k < 1) throw Error(ErrorCode::InvalidInput, "k must be >= 1");
  if (!points.allFinite()) throw Error(ErrorCode::InvalidInput, "points have non-finite entries");
  const Eigen::Index n = points.rows();
  k = static_cast<int>(std::min<Eigen::Index>(k, n));

  const RowMajor x = points;
  std::mt19937_64 rng(seed);
  RowMajor centers = seed_plus_plus(x, k, rng);

  KMeansResult result;
  std::vector<double> d2;
  std::vector<int> labels = assign(x, centers, &d2);
  for (int it = 1;; ++it) {
    const std::vector<int> previous = labels;
    // Update step.
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    RowMajor sums = RowMajor::Zero(k, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = labels[static_cast<std::size_t>(i)];
      sums.row(c) += x.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: take the point worst served by its current centroid
      // from a cluster that can spare it.
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] < 2) continue;
        if (far < 0 || d2[static_cast<std::size_t>(i)] > d2[static_cast<std::size_t>(far)]) far = i;
      }
      if (far < 0) continue;
      --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
      labels[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      d2[static_cast<std::size_t>(far)] = 0.0;
      centers.row(c) = x.row(far);
    }
    std::vector<int> next = assign(x, centers, &d2);
    result.iterations = it;
    const bool fixed_point = next == previous;
    labels = std::move(next);
    if (fixed_point || it >= kMaxIterations) break;
  }
  result.labels = std::move(labels);
  result.centroids = centers;
  return result;
}

}  // namespace wcv
