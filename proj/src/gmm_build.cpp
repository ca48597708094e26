#include "wcv/gmm_build.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "wcv/clustering.hpp"
#include "wcv/error.hpp"
#include "wcv/kernels.hpp"

namespace wcv {

namespace {

constexpr int kPerturbedCopies = 10;

Eigen::MatrixXd rows_with_label(const Eigen::MatrixXd& points, const std::vector<int>& labels, int cluster,
                                Eigen::Index offset = 0) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (labels[static_cast<std::size_t>(offset + i)] == cluster) idx.push_back(i);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), points.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = points.row(idx[r]);
  return out;
}

// Mixture from a cloud and its per-point cluster labels (clusters 0..k-1).
// Empty clusters are skipped.
GaussianMixture mixture_from_labels(const DataCloud& cloud, const std::vector<int>& labels, int k,
                                    Eigen::Index offset, const GmmBuildConfig& cfg, std::uint64_t cloud_stream) {
  std::vector<GaussianComponent> comps;
  std::vector<double> priors;
  const auto n = static_cast<double>(cloud.points.rows());
  for (int c = 0; c < k; ++c) {
    const Eigen::MatrixXd members = rows_with_label(cloud.points, labels, c, offset);
    if (members.rows() == 0) continue;
    comps.push_back(moment_component(members, cfg.perturbation_sd, cfg.seed, cloud_stream,
                                     static_cast<std::uint64_t>(c)));
    priors.push_back(static_cast<double>(members.rows()) / n);
  }
  return GaussianMixture(std::move(comps), Eigen::Map<const Eigen::VectorXd>(priors.data(), static_cast<Eigen::Index>(priors.size())));
}

GaussianMixture single_gaussian(const DataCloud& cloud, const GmmBuildConfig& cfg, std::uint64_t cloud_stream) {
  std::vector<GaussianComponent> comps{moment_component(cloud.points, cfg.perturbation_sd, cfg.seed, cloud_stream, 0)};
  return GaussianMixture(std::move(comps), Eigen::VectorXd::Ones(1));
}

bool is_small(const DataCloud& cloud, const GmmBuildConfig& cfg) {
  return cloud.points.rows() < cfg.small_sample_threshold;
}

Eigen::MatrixXd pool(const std::vector<DataCloud>& clouds, const std::vector<std::size_t>& which) {
  Eigen::Index total = 0;
  for (const auto i : which) total += clouds[i].points.rows();
  Eigen::MatrixXd pooled(total, clouds.front().points.cols());
  Eigen::Index row = 0;
  for (const auto i : which) {
    pooled.middleRows(row, clouds[i].points.rows()) = clouds[i].points;
    row += clouds[i].points.rows();
  }
  return pooled;
}

}  // namespace

std::string to_string(ClusteringScheme scheme) { return scheme == ClusteringScheme::Combined ? "combined" : "separate"; }

ClusteringScheme parse_scheme(const std::string& text) {
  if (text == "combined") return ClusteringScheme::Combined;
  if (text == "separate") return ClusteringScheme::Separate;
  throw Error(ErrorCode::InvalidInput, "unknown clustering scheme '" + text + "'");
}

void GmmBuildConfig::validate() const {
  if (components < 1) throw Error(ErrorCode::InvalidInput, "components must be >= 1");
  if (small_sample_threshold < 2) throw Error(ErrorCode::InvalidInput, "small-sample threshold must be >= 2");
  if (!(perturbation_sd > 0.0)) throw Error(ErrorCode::InvalidInput, "perturbation sd must be > 0");
}

nlohmann::json GmmBuildConfig::to_json() const {
  return {{"scheme", to_string(scheme)},
          {"components", components},
          {"small_sample_threshold", small_sample_threshold},
          {"perturbation_sd", perturbation_sd},
          {"seed", seed}};
}

void validate_clouds(const std::vector<DataCloud>& clouds) {
  if (clouds.empty()) throw Error(ErrorCode::InvalidInput, "no data clouds");
  const Eigen::Index d = clouds.front().points.cols();
  for (const auto& c : clouds) {
    if (c.points.rows() == 0) throw Error(ErrorCode::EmptyCloud, "cloud '" + c.id + "' has no points");
    if (c.points.cols() != d || d == 0) throw Error(ErrorCode::DimensionMismatch, "cloud '" + c.id + "' has inconsistent dimension");
    if (!c.points.allFinite()) throw Error(ErrorCode::InvalidInput, "cloud '" + c.id + "' has non-finite values");
    if (c.label < 0) throw Error(ErrorCode::InvalidInput, "cloud '" + c.id + "' has a negative label");
  }
}

GaussianComponent moment_component(const Eigen::MatrixXd& points, double perturbation_sd, std::uint64_t seed,
                                   std::uint64_t stream_a, std::uint64_t stream_b) {
  if (points.rows() == 0) throw Error(ErrorCode::EmptyCloud, "no points for component");
  Eigen::MatrixXd sample = points;
  if (points.rows() == 1) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_a), static_cast<std::uint32_t>(stream_b)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, perturbation_sd);
    sample.resize(kPerturbedCopies, points.cols());
    for (Eigen::Index r = 0; r < sample.rows(); ++r) {
      for (Eigen::Index c = 0; c < sample.cols(); ++c) sample(r, c) = points(0, c) + noise(rng);
    }
  }
  const Eigen::Index d = points.cols();
  const Eigen::VectorXd mean = points.rows() == 1 ? Eigen::VectorXd(points.row(0).transpose())
                                                  : Eigen::VectorXd(sample.colwise().mean().transpose());
  const Eigen::RowVectorXd sample_mean = sample.colwise().mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd centered(d);
  const auto& k = kernels::active();
  for (Eigen::Index r = 0; r < sample.rows(); ++r) {
    centered = (sample.row(r) - sample_mean).transpose();
    k.add_scaled_outer(cov.data(), static_cast<std::size_t>(d), 1.0, centered.data());
  }
  cov /= static_cast<double>(sample.rows() - 1);
  return GaussianComponent(mean, SymMatrix(cov));
}

std::vector<LabeledSample> build_gmms(const std::vector<DataCloud>& clouds, const GmmBuildConfig& config,
                                      std::vector<std::string>* warnings) {
  config.validate();
  validate_clouds(clouds);
  auto warn = [&](std::string msg) {
    if (warnings != nullptr) warnings->push_back(std::move(msg));
  };
  std::vector<LabeledSample> out;
  out.reserve(clouds.size());

  if (config.scheme == ClusteringScheme::Separate) {
    for (std::size_t c = 0; c < clouds.size(); ++c) {
      const DataCloud& cloud = clouds[c];
      if (is_small(cloud, config)) {
        out.push_back({cloud.id, single_gaussian(cloud, config, c), cloud.label});
        continue;
      }
      int k = config.components;
      if (k > cloud.points.rows()) {
        k = static_cast<int>(cloud.points.rows());
        warn("cloud '" + cloud.id + "': components reduced from " + std::to_string(config.components) + " to " +
             std::to_string(k));
      }
      const KMeansResult km = kmeans(cloud.points, k, config.seed + c);
      out.push_back({cloud.id, mixture_from_labels(cloud, km.labels, k, 0, config, c), cloud.label});
    }
    return out;
  }

  std::vector<std::size_t> all(clouds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Eigen::MatrixXd pooled = pool(clouds, all);
  int k = config.components;
  if (k > pooled.rows()) {
    k = static_cast<int>(pooled.rows());
    warn("pooled clustering: components reduced from " + std::to_string(config.components) + " to " + std::to_string(k));
  }
  const KMeansResult km = kmeans(pooled, k, config.seed);
  Eigen::Index offset = 0;
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const DataCloud& cloud = clouds[c];
    if (is_small(cloud, config)) {
      out.push_back({cloud.id, single_gaussian(cloud, config, c), cloud.label});
    } else {
      out.push_back({cloud.id, mixture_from_labels(cloud, km.labels, k, offset, config, c), cloud.label});
    }
    offset += cloud.points.rows();
  }
  return out;
}

CombinedFold build_combined_fold(const std::vector<DataCloud>& clouds, const GmmBuildConfig& config,
                                 std::size_t held_out) {
  config.validate();
  validate_clouds(clouds);
  if (held_out >= clouds.size()) throw Error(ErrorCode::InvalidInput, "held-out index out of range");
  std::vector<std::size_t> train;
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    if (c != held_out) train.push_back(c);
  }
  const Eigen::MatrixXd pooled = pool(clouds, train);
  const int k = static_cast<int>(std::min<Eigen::Index>(config.components, pooled.rows()));
  const KMeansResult km = kmeans(pooled, k, config.seed);

  CombinedFold fold{{}, {clouds[held_out].id, single_gaussian(clouds[held_out], config, held_out), clouds[held_out].label}};
  Eigen::Index offset = 0;
  for (const std::size_t c : train) {
    const DataCloud& cloud = clouds[c];
    if (is_small(cloud, config)) {
      fold.training.push_back({cloud.id, single_gaussian(cloud, config, c), cloud.label});
    } else {
      fold.training.push_back({cloud.id, mixture_from_labels(cloud, km.labels, k, offset, config, c), cloud.label});
    }
    offset += cloud.points.rows();
  }
  const DataCloud& test = clouds[held_out];
  if (!is_small(test, config)) {
    const std::vector<int> labels = assign_nearest(test.points, km.centroids);
    fold.held_out.distribution = mixture_from_labels(test, labels, k, 0, config, held_out);
  }
  return fold;
}

std::vector<DataCloud> select_top_variable_features(const std::vector<DataCloud>& clouds, int k,
                                                    std::vector<int>* selected) {
  validate_clouds(clouds);
  const Eigen::Index d = clouds.front().points.cols();
  if (k < 1 || k > d) throw Error(ErrorCode::InvalidInput, "feature count must be in [1, d]");
  std::vector<std::size_t> all(clouds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Eigen::MatrixXd pooled = pool(clouds, all);
  const Eigen::RowVectorXd mean = pooled.colwise().mean();
  const Eigen::RowVectorXd var = (pooled.rowwise() - mean).array().square().colwise().sum() /
                                 static_cast<double>(std::max<Eigen::Index>(1, pooled.rows() - 1));
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return var(a) > var(b); });
  std::vector<int> keep(order.begin(), order.begin() + k);
  std::sort(keep.begin(), keep.end());
  std::vector<DataCloud> out;
  out.reserve(clouds.size());
  for (const auto& c : clouds) {
    Eigen::MatrixXd pts(c.points.rows(), k);
    for (int j = 0; j < k; ++j) pts.col(j) = c.points.col(keep[static_cast<std::size_t>(j)]);
    out.push_back({c.id, std::move(pts), c.label});
  }
  if (selected != nullptr) *selected = std::move(keep);
  return out;
}

}  // namespace wcv
