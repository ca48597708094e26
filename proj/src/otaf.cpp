#include "wcv/otaf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

#include "wcv/error.hpp"
#include "wcv/kernels.hpp"
#include "wcv/parallel.hpp"

namespace wcv {

void OtafConfig::validate(Eigen::Index ambient_dim) const {
  if (reduced_dim < 1 || reduced_dim >= ambient_dim) {
    throw Error(ErrorCode::InvalidInput, "reduced dimension must satisfy 1 <= d' < d (d' = " +
                                             std::to_string(reduced_dim) + ", d = " + std::to_string(ambient_dim) + ")");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidInput, "alpha must lie in (0, 1]");
  if (min_iters < 1) throw Error(ErrorCode::InvalidInput, "min_iters must be >= 1");
  if (max_iters < 2) throw Error(ErrorCode::InvalidInput, "max_iters must be >= 2 (one projection update)");
  if (min_iters > max_iters) throw Error(ErrorCode::InvalidInput, "min_iters must not exceed max_iters");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidInput, "epsilon must be > 0");
  if (ridge_policy == RidgePolicy::Fixed && !(ridge >= 0.0)) throw Error(ErrorCode::InvalidInput, "ridge must be >= 0");
}

ProjectionMatrix::ProjectionMatrix(Eigen::MatrixXd a) : a_(std::move(a)) {
  if (!a_.allFinite()) throw Error(ErrorCode::InvalidInput, "projection has non-finite entries");
  (void)orthonormal_span(a_);  // rank check
}

ProjectionMatrix ProjectionMatrix::identity(Eigen::Index dim) {
  return ProjectionMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

// ---------------------------------------------------------------------------

std::size_t PairwiseTransport::slot(std::size_t i, std::size_t j) const {
  const std::size_t n = size();
  const std::size_t a = std::min(i, j);
  const std::size_t b = std::max(i, j);
  return a * n - a * (a + 1) / 2 + (b - a - 1);
}

PairwiseTransport PairwiseTransport::compute(const std::vector<LabeledSample>& samples) {
  const std::size_t n = samples.size();
  std::vector<IndexPair> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::vector<std::optional<OtResult>> results(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    results[k] = maw2(samples[pairs[k].first].distribution, samples[pairs[k].second].distribution);
  });
  PairwiseTransport out;
  out.distances_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.couplings_.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    out.distances_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = results[k]->cost;
    out.distances_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = results[k]->cost;
    out.couplings_.push_back(std::move(results[k]->coupling));
  }
  return out;
}

Coupling PairwiseTransport::coupling(std::size_t i, std::size_t j) const {
  if (i == j || i >= size() || j >= size()) throw Error(ErrorCode::InvalidInput, "invalid pair index");
  const Coupling& c = couplings_[slot(i, j)];
  return i < j ? c : c.transposed();
}

PairwiseTransport PairwiseTransport::subset(std::span<const std::size_t> indices) const {
  const std::size_t n = indices.size();
  PairwiseTransport out;
  out.distances_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.couplings_.reserve(n * (n - 1) / 2);
  for (std::size_t a = 0; a < n; ++a) {
    out.distances_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = 0.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const double d = distance(indices[a], indices[b]);
      out.distances_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = d;
      out.distances_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = d;
      out.couplings_.push_back(coupling(indices[a], indices[b]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> labels_of(const std::vector<LabeledSample>& samples) {
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  return labels;
}

}  // namespace

std::vector<double> discriminant_ratios(std::span<const int> labels, const Eigen::MatrixXd& distances) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(distances.rows()) != n || static_cast<std::size_t>(distances.cols()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "distance matrix does not match label count");
  }
  std::map<int, std::size_t> class_sizes;
  for (const int l : labels) ++class_sizes[l];
  if (class_sizes.size() < 2) throw Error(ErrorCode::InvalidInput, "at least two classes are required");
  for (const auto& [label, count] : class_sizes) {
    if (count < 2) throw Error(ErrorCode::SingletonClass, "class " + std::to_string(label) + " has a single member");
  }
  std::vector<double> gammas(n);
  for (std::size_t k = 0; k < n; ++k) {
    double same = 0.0;
    double other = 0.0;
    std::size_t n_same = 0;
    std::size_t n_other = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k) continue;
      const double d = distances(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
      if (labels[j] == labels[k]) {
        same += d;
        ++n_same;
      } else {
        other += d;
        ++n_other;
      }
    }
    const double delta = same / static_cast<double>(n_same);
    const double delta_other = other / static_cast<double>(n_other);
    gammas[k] = delta > 0.0 ? delta_other / delta : std::numeric_limits<double>::infinity();
  }
  return gammas;
}

std::vector<double> discriminant_ratios(const std::vector<LabeledSample>& samples) {
  const auto labels = labels_of(samples);
  return discriminant_ratios(labels, PairwiseTransport::compute(samples).distances());
}

PairSets select_pairs(std::span<const int> labels, std::span<const double> gammas, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidInput, "alpha must lie in (0, 1]");
  if (labels.size() != gammas.size()) throw Error(ErrorCode::DimensionMismatch, "labels/gammas length mismatch");
  const std::size_t n = labels.size();
  const auto count = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gammas[a] < gammas[b]; });

  PairSets out;
  out.anchors.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::vector<std::size_t> sorted_anchors = out.anchors;
  std::sort(sorted_anchors.begin(), sorted_anchors.end());
  for (const std::size_t k1 : sorted_anchors) {
    for (std::size_t k2 = 0; k2 < n; ++k2) {
      if (k2 == k1) continue;
      (labels[k1] == labels[k2] ? out.within : out.between).emplace_back(k1, k2);
    }
  }
  if (out.between.empty()) throw Error(ErrorCode::EmptyPairSet, "no between-class pairs selected");
  if (out.within.empty()) throw Error(ErrorCode::EmptyPairSet, "no within-class pairs selected");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_marginals(const Coupling& c, const GaussianMixture& g1, const GaussianMixture& g2) {
  const Eigen::MatrixXd& plan = c.plan();
  if (plan.rows() != g1.size() || plan.cols() != g2.size()) {
    throw Error(ErrorCode::MarginalMismatch, "coupling shape does not match component counts");
  }
  if ((plan.rowwise().sum() - g1.priors()).cwiseAbs().maxCoeff() > 1e-8 ||
      (plan.colwise().sum().transpose() - g2.priors()).cwiseAbs().maxCoeff() > 1e-8) {
    throw Error(ErrorCode::MarginalMismatch, "coupling marginals differ from mixture priors");
  }
}

Eigen::MatrixXd accumulate(const std::vector<LabeledSample>& samples, const std::vector<IndexPair>& pairs,
                           const std::vector<Coupling>& couplings, const std::vector<Eigen::MatrixXd>& weighted_cov) {
  if (pairs.size() != couplings.size()) {
    throw Error(ErrorCode::MarginalMismatch, "coupling count does not match pair count");
  }
  const Eigen::Index d = samples.front().distribution.dim();
  const auto& k = kernels::active();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd diff(d);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& g1 = samples[pairs[p].first].distribution;
    const auto& g2 = samples[pairs[p].second].distribution;
    check_marginals(couplings[p], g1, g2);
    const Eigen::MatrixXd& plan = couplings[p].plan();
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
      for (Eigen::Index j = 0; j < plan.cols(); ++j) {
        const double w = plan(i, j);
        if (w == 0.0) continue;
        diff = g1.component(i).mean() - g2.component(j).mean();
        k.add_scaled_outer(c.data(), static_cast<std::size_t>(d), w, diff.data());
      }
    }
    c += weighted_cov[pairs[p].first];
    c += weighted_cov[pairs[p].second];
  }
  return c / static_cast<double>(pairs.size());
}

}  // namespace

ScatterMatrices scatter_matrices(const std::vector<LabeledSample>& samples, const PairSets& pairs,
                                 const PairCouplings& couplings) {
  if (samples.empty()) throw Error(ErrorCode::InvalidInput, "no samples");
  if (pairs.between.empty() || pairs.within.empty()) throw Error(ErrorCode::EmptyPairSet, "empty pair set");
  const Eigen::Index d = samples.front().distribution.dim();
  std::vector<Eigen::MatrixXd> weighted_cov;
  weighted_cov.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.distribution.dim() != d) throw Error(ErrorCode::DimensionMismatch, "samples differ in dimension");
    weighted_cov.push_back(s.distribution.weighted_covariance());
  }
  return ScatterMatrices{SymMatrix(accumulate(samples, pairs.between, couplings.between, weighted_cov)),
                         SymMatrix(accumulate(samples, pairs.within, couplings.within, weighted_cov))};
}

double fisher_ratio(const SymMatrix& between, const SymMatrix& within, const Eigen::MatrixXd& a) {
  if (a.rows() != between.dim() || a.rows() != within.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "projection rows do not match scatter dimension");
  }
  const double num = (a.transpose() * between.matrix() * a).trace();
  const double den = (a.transpose() * within.matrix() * a).trace();
  if (!(den > 0.0)) throw Error(ErrorCode::DegenerateWithinVariation, "within-class variation is zero");
  return num / den;
}

ProjectionMatrix solve_directions(const SymMatrix& between, const SymMatrix& within, int reduced_dim,
                                  bool orthonormal, RidgePolicy ridge_policy, double ridge) {
  if (between.dim() != within.dim()) throw Error(ErrorCode::DimensionMismatch, "scatter matrices differ in size");
  if (reduced_dim < 1 || reduced_dim > between.dim()) {
    throw Error(ErrorCode::InvalidInput, "reduced dimension out of range");
  }
  double applied = 0.0;
  switch (ridge_policy) {
    case RidgePolicy::Auto: applied = auto_ridge(within); break;
    case RidgePolicy::None: applied = 0.0; break;
    case RidgePolicy::Fixed: applied = ridge; break;
  }
  const SymMatrix whiten = psd_inv_sqrt(within, applied);
  const SymMatrix whitened(whiten.matrix() * between.matrix() * whiten.matrix());
  const SymEigen eig = sym_eig(whitened);
  Eigen::MatrixXd a = whiten.matrix() * eig.vectors.leftCols(reduced_dim);
  if (orthonormal) a = orthonormal_span(a).basis();
  return ProjectionMatrix(std::move(a));
}

// ---------------------------------------------------------------------------

double PairTransport::ratio() const {
  if (!(within_mean > 0.0)) throw Error(ErrorCode::DegenerateWithinVariation, "within-class variation is zero");
  return between_mean / within_mean;
}

PairTransport solve_pair_transport(const std::vector<LabeledSample>& samples, const PairSets& pairs) {
  // Each unordered pair is solved once; (k2, k1) reuses the transpose.
  std::map<IndexPair, std::size_t> unique;
  std::vector<IndexPair> jobs;
  auto key = [](const IndexPair& p) { return IndexPair{std::min(p.first, p.second), std::max(p.first, p.second)}; };
  for (const auto* list : {&pairs.between, &pairs.within}) {
    for (const auto& p : *list) {
      if (unique.emplace(key(p), jobs.size()).second) jobs.push_back(key(p));
    }
  }
  std::vector<std::optional<OtResult>> results(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t k) {
    results[k] = maw2(samples[jobs[k].first].distribution, samples[jobs[k].second].distribution);
  });
  PairTransport out;
  auto collect = [&](const std::vector<IndexPair>& list, std::vector<Coupling>& dst, double& mean) {
    double total = 0.0;
    dst.reserve(list.size());
    for (const auto& p : list) {
      const OtResult& r = *results[unique.at(key(p))];
      dst.push_back(p.first < p.second ? r.coupling : r.coupling.transposed());
      total += r.cost;
    }
    mean = total / static_cast<double>(list.size());
  };
  collect(pairs.between, out.couplings.between, out.between_mean);
  collect(pairs.within, out.couplings.within, out.within_mean);
  return out;
}

std::vector<LabeledSample> project_samples(const std::vector<LabeledSample>& samples, const Eigen::MatrixXd& a) {
  std::vector<LabeledSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(LabeledSample{s.id, project(s.distribution, a), s.label});
  return out;
}

double variation_ratio(const std::vector<LabeledSample>& samples, const PairSets& pairs, const Eigen::MatrixXd& a) {
  return solve_pair_transport(project_samples(samples, a), pairs).ratio();
}

OtafResult fit(const std::vector<LabeledSample>& samples, const OtafConfig& config, const PairwiseTransport* original) {
  if (samples.empty()) throw Error(ErrorCode::InvalidInput, "no samples");
  const Eigen::Index d = samples.front().distribution.dim();
  for (const auto& s : samples) {
    if (s.distribution.dim() != d) throw Error(ErrorCode::DimensionMismatch, "samples differ in dimension");
  }
  config.validate(d);

  std::optional<PairwiseTransport> local;
  if (original == nullptr) {
    local = PairwiseTransport::compute(samples);
    original = &*local;
  } else if (original->size() != samples.size()) {
    throw Error(ErrorCode::DimensionMismatch, "precomputed transport does not match sample count");
  }

  const auto labels = labels_of(samples);
  const auto gammas = discriminant_ratios(labels, original->distances());
  PairSets pairs = select_pairs(labels, gammas, config.alpha);

  // Iteration 1 runs with A = I, so its couplings are the native-space ones.
  PairTransport current;
  {
    double between = 0.0;
    double within = 0.0;
    for (const auto& p : pairs.between) {
      current.couplings.between.push_back(original->coupling(p.first, p.second));
      between += original->distance(p.first, p.second);
    }
    for (const auto& p : pairs.within) {
      current.couplings.within.push_back(original->coupling(p.first, p.second));
      within += original->distance(p.first, p.second);
    }
    current.between_mean = between / static_cast<double>(pairs.between.size());
    current.within_mean = within / static_cast<double>(pairs.within.size());
  }

  std::vector<double> fisher_trace{current.ratio()};
  std::vector<double> grassmann_trace{std::numeric_limits<double>::quiet_NaN()};
  std::optional<ProjectionMatrix> best;
  double best_ratio = -std::numeric_limits<double>::infinity();
  int best_iteration = 0;
  std::optional<Subspace> previous_span;

  int tau = 1;
  double eta = std::numeric_limits<double>::infinity();
  while (tau < config.min_iters || (eta > config.epsilon && tau < config.max_iters)) {
    const ScatterMatrices scatter = scatter_matrices(samples, pairs, current.couplings);
    ProjectionMatrix a = solve_directions(scatter.between, scatter.within, config.reduced_dim, config.orthonormal,
                                          config.ridge_policy, config.ridge);
    ++tau;
    current = solve_pair_transport(project_samples(samples, a.matrix()), pairs);
    const double rho = current.ratio();
    eta = (rho - fisher_trace.back()) / fisher_trace.back();

    Subspace span = config.orthonormal ? Subspace(a.matrix()) : orthonormal_span(a.matrix());
    grassmann_trace.push_back(previous_span ? grassmann_distance(*previous_span, span)
                                            : std::numeric_limits<double>::quiet_NaN());
    previous_span = std::move(span);
    fisher_trace.push_back(rho);
    if (rho > best_ratio) {
      best_ratio = rho;
      best_iteration = static_cast<int>(fisher_trace.size()) - 1;
      best = std::move(a);
    }
  }

  return OtafResult{std::move(*best),       std::move(fisher_trace), std::move(grassmann_trace), tau,
                    eta <= config.epsilon, best_iteration,          std::move(pairs)};
}

}  // namespace wcv
