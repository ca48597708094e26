#include "wcv/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "wcv/error.hpp"
#include "wcv/parallel.hpp"

namespace wcv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool skippable(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingletonClass:
    case ErrorCode::EmptyClass:
    case ErrorCode::EmptyPairSet:
    case ErrorCode::SingularMatrix:
    case ErrorCode::DegenerateWithinVariation:
      return true;
    default:
      return false;
  }
}

std::vector<std::size_t> all_but(std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx;
  idx.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != k) idx.push_back(i);
  }
  return idx;
}

struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ULL;
    }
  }
  void value(double x) { bytes(&x, sizeof x); }
  void value(std::int64_t x) { bytes(&x, sizeof x); }
  void text(const std::string& s) {
    value(static_cast<std::int64_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void matrix(const Eigen::MatrixXd& m) {
    value(static_cast<std::int64_t>(m.rows()));
    value(static_cast<std::int64_t>(m.cols()));
    bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
};

// Everything a fold learns from its training set.
struct FittedFold {
  std::optional<PseudoMixtureModel> model;
  FoldOutcome base;
};

FittedFold fit_fold(const Representation& data, std::size_t k, int num_classes, const EvaluationConfig& cfg) {
  FittedFold out;
  out.base.index = k;
  out.base.id = data.id(k);
  out.base.true_label = data.label(k);
  try {
    const std::vector<LabeledSample> train = data.training(k);
    out.base.training_hash = hash_samples(train);
    std::vector<bool> present(static_cast<std::size_t>(num_classes), false);
    for (const auto& s : train) present[static_cast<std::size_t>(s.label)] = true;
    for (int l = 0; l < num_classes; ++l) {
      if (!present[static_cast<std::size_t>(l)]) {
        throw Error(ErrorCode::EmptyClass, "class " + std::to_string(l) + " has no training instances");
      }
    }
    const std::optional<PairwiseTransport> transport = data.training_transport(k);
    if (cfg.reduce) {
      const OtafResult r = fit(train, cfg.otaf, transport ? &*transport : nullptr);
      out.base.fisher_trace = r.fisher_trace;
      out.base.grassmann_trace = r.grassmann_trace;
      out.base.iterations = r.iterations;
      out.base.converged = r.converged;
      out.base.best_iteration = r.best_iteration;
      out.base.projection = r.projection.matrix();
      out.model = fit_pseudo_mixture(train, num_classes, r.projection, cfg.classifier);
    } else {
      out.model = fit_pseudo_mixture(train, num_classes, std::nullopt, cfg.classifier,
                                     transport ? &transport->distances() : nullptr);
    }
  } catch (const Error& e) {
    if (!skippable(e.code())) throw;
    out.model.reset();
    out.base.skipped = true;
    out.base.skip_reason = e.what();
  }
  return out;
}

FoldOutcome score_fold(const FittedFold& fitted, const LabeledSample& held) {
  FoldOutcome out = fitted.base;
  if (!fitted.model) return out;
  out.posterior = posterior(*fitted.model, fitted.model->to_reference_space(held.distribution));
  out.predicted = predict(out.posterior);
  return out;
}

EvaluationReport aggregate(std::vector<FoldOutcome> folds, int num_classes) {
  EvaluationReport report;
  report.num_classes = num_classes;
  std::vector<Eigen::VectorXd> posteriors;
  std::vector<int> labels;
  std::size_t correct = 0;
  for (const auto& f : folds) {
    if (f.skipped) {
      ++report.skipped;
      continue;
    }
    posteriors.push_back(f.posterior);
    labels.push_back(f.true_label);
    if (f.predicted == f.true_label) ++correct;
  }
  report.accuracy = posteriors.empty() ? kNaN : static_cast<double>(correct) / static_cast<double>(posteriors.size());
  report.auc = posteriors.empty() ? kNaN : posterior_auc(posteriors, labels);
  report.folds = std::move(folds);
  return report;
}

int checked_class_count(const Representation& data) {
  if (data.size() == 0) throw Error(ErrorCode::InvalidInput, "no instances to evaluate");
  int m = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (data.label(k) < 0) throw Error(ErrorCode::InvalidInput, "negative label for '" + data.id(k) + "'");
    m = std::max(m, data.label(k) + 1);
  }
  if (data.size() < static_cast<std::size_t>(m) + 1) {
    throw Error(ErrorCode::InvalidInput, "leave-one-out needs more instances than classes");
  }
  return m;
}

}  // namespace

std::optional<PairwiseTransport> Representation::training_transport(std::size_t) const { return std::nullopt; }

SampleRepresentation::SampleRepresentation(std::vector<LabeledSample> samples, std::string name)
    : samples_(std::move(samples)), name_(std::move(name)) {
  if (samples_.empty()) throw Error(ErrorCode::InvalidInput, "empty sample set");
  transport_ = std::make_shared<const PairwiseTransport>(PairwiseTransport::compute(samples_));
}

std::vector<LabeledSample> SampleRepresentation::training(std::size_t held_out) const {
  std::vector<LabeledSample> out;
  out.reserve(samples_.size() - 1);
  for (const auto i : all_but(samples_.size(), held_out)) out.push_back(samples_[i]);
  return out;
}

std::optional<PairwiseTransport> SampleRepresentation::training_transport(std::size_t held_out) const {
  const auto idx = all_but(samples_.size(), held_out);
  return transport_->subset(idx);
}

nlohmann::json SampleRepresentation::describe() const {
  return {{"name", name_}, {"kind", "mixtures"}, {"instances", samples_.size()}};
}

CloudRepresentation::CloudRepresentation(std::vector<DataCloud> clouds, GmmBuildConfig config, std::string name)
    : clouds_(std::move(clouds)), config_(config), name_(std::move(name)) {
  config_.validate();
  validate_clouds(clouds_);
  if (config_.scheme == ClusteringScheme::Separate) {
    separate_.emplace(build_gmms(clouds_, config_), name_);
  }
}

std::vector<LabeledSample> CloudRepresentation::training(std::size_t held_out) const {
  if (separate_) return separate_->training(held_out);
  return build_combined_fold(clouds_, config_, held_out).training;
}

LabeledSample CloudRepresentation::held_out(std::size_t k) const {
  if (separate_) return separate_->held_out(k);
  return build_combined_fold(clouds_, config_, k).held_out;
}

std::optional<PairwiseTransport> CloudRepresentation::training_transport(std::size_t held_out) const {
  if (separate_) return separate_->training_transport(held_out);
  return std::nullopt;
}

nlohmann::json CloudRepresentation::describe() const {
  return {{"name", name_}, {"kind", "clouds"}, {"instances", clouds_.size()}, {"gmm", config_.to_json()}};
}

nlohmann::json EvaluationConfig::to_json() const {
  const char* ridge = otaf.ridge_policy == RidgePolicy::Auto ? "auto" : otaf.ridge_policy == RidgePolicy::None ? "none" : "fixed";
  nlohmann::json classifier_json = {{"shape", classifier.shape ? nlohmann::json(*classifier.shape) : nlohmann::json("reference_dim")},
                                    {"scale", classifier.scale ? nlohmann::json(*classifier.scale) : nlohmann::json("median")}};
  return {{"reduce", reduce},
          {"otaf",
           {{"reduced_dim", otaf.reduced_dim},
            {"alpha", otaf.alpha},
            {"min_iters", otaf.min_iters},
            {"max_iters", otaf.max_iters},
            {"epsilon", otaf.epsilon},
            {"orthonormal", otaf.orthonormal},
            {"ridge_policy", ridge},
            {"ridge", otaf.ridge}}},
          {"classifier", classifier_json}};
}

double auc(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw Error(ErrorCode::DimensionMismatch, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]] != 0) {
        rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::InvalidInput, "AUC needs both positive and negative cases");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double posterior_auc(const std::vector<Eigen::VectorXd>& posteriors, std::span<const int> labels) {
  if (posteriors.size() != labels.size()) throw Error(ErrorCode::DimensionMismatch, "posteriors and labels differ in length");
  if (posteriors.empty()) return kNaN;
  const Eigen::Index m = posteriors.front().size();
  auto one_vs_rest = [&](Eigen::Index cls) {
    std::vector<double> s;
    std::vector<int> pos;
    for (std::size_t i = 0; i < posteriors.size(); ++i) {
      s.push_back(posteriors[i](cls));
      pos.push_back(labels[i] == cls ? 1 : 0);
    }
    const auto n_pos = std::count(pos.begin(), pos.end(), 1);
    if (n_pos == 0 || n_pos == static_cast<long>(pos.size())) return kNaN;
    return auc(s, pos);
  };
  if (m == 2) return one_vs_rest(1);
  double sum = 0.0;
  int used = 0;
  for (Eigen::Index c = 0; c < m; ++c) {
    const double a = one_vs_rest(c);
    if (std::isnan(a)) continue;
    sum += a;
    ++used;
  }
  return used == 0 ? kNaN : sum / used;
}

std::uint64_t hash_samples(const std::vector<LabeledSample>& samples) {
  Fnv h;
  h.value(static_cast<std::int64_t>(samples.size()));
  for (const auto& s : samples) {
    h.text(s.id);
    h.value(static_cast<std::int64_t>(s.label));
    h.matrix(s.distribution.priors());
    for (const auto& c : s.distribution.components()) {
      h.matrix(c.mean());
      h.matrix(c.covariance().matrix());
    }
  }
  return h.h;
}

EvaluationReport leave_one_out(const Representation& data, const EvaluationConfig& config) {
  const int m = checked_class_count(data);
  std::vector<FoldOutcome> folds(data.size());
  parallel_for(data.size(), [&](std::size_t k) {
    const FittedFold fitted = fit_fold(data, k, m, config);
    folds[k] = fitted.model ? score_fold(fitted, data.held_out(k)) : fitted.base;
  });
  return aggregate(std::move(folds), m);
}

EvaluationReport leave_one_out(const std::vector<LabeledSample>& samples, const EvaluationConfig& config) {
  return leave_one_out(SampleRepresentation(samples), config);
}

std::vector<std::vector<EvaluationReport>> cross_representation_eval(
    const std::vector<const Representation*>& representations, const EvaluationConfig& config) {
  if (representations.empty()) throw Error(ErrorCode::InvalidInput, "no representations");
  const Representation& first = *representations.front();
  for (const Representation* r : representations) {
    if (r->size() != first.size()) throw Error(ErrorCode::IdMismatch, "representations differ in instance count");
    for (std::size_t k = 0; k < first.size(); ++k) {
      if (r->id(k) != first.id(k) || r->label(k) != first.label(k)) {
        throw Error(ErrorCode::IdMismatch, "instance " + std::to_string(k) + " differs across representations ('" +
                                               first.id(k) + "' vs '" + r->id(k) + "')");
      }
    }
  }
  const int m = checked_class_count(first);
  const std::size_t reps = representations.size();
  const std::size_t n = first.size();

  // Held-out mixtures depend only on (representation, instance).
  std::vector<std::vector<std::optional<LabeledSample>>> held(reps, std::vector<std::optional<LabeledSample>>(n));
  parallel_for(reps * n, [&](std::size_t t) { held[t / n][t % n] = representations[t / n]->held_out(t % n); });

  std::vector<std::vector<std::vector<FoldOutcome>>> cells(reps, std::vector<std::vector<FoldOutcome>>(reps, std::vector<FoldOutcome>(n)));
  parallel_for(reps * n, [&](std::size_t t) {
    const std::size_t i = t / n;
    const std::size_t k = t % n;
    const FittedFold fitted = fit_fold(*representations[i], k, m, config);
    for (std::size_t j = 0; j < reps; ++j) cells[i][j][k] = score_fold(fitted, *held[j][k]);
  });

  std::vector<std::vector<EvaluationReport>> grid(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    for (std::size_t j = 0; j < reps; ++j) grid[i].push_back(aggregate(std::move(cells[i][j]), m));
  }
  return grid;
}

}  // namespace wcv
