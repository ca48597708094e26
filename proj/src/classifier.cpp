#include "wcv/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wcv/error.hpp"
#include "wcv/parallel.hpp"
#include "wcv/transport.hpp"

namespace wcv {

namespace {

constexpr const char* kModelFormat = "wcv.pseudo_mixture.v1";

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (const double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (const double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

GaussianMixture PseudoMixtureModel::to_reference_space(const GaussianMixture& g) const {
  return projection ? project(g, projection->matrix()) : g;
}

double median_pairwise(const Eigen::MatrixXd& d2) {
  std::vector<double> values;
  for (Eigen::Index i = 0; i < d2.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < d2.cols(); ++j) values.push_back(d2(i, j));
  }
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

PseudoMixtureModel fit_pseudo_mixture(const std::vector<LabeledSample>& train, int num_classes,
                                      const std::optional<ProjectionMatrix>& projection,
                                      const ClassifierConfig& config, const Eigen::MatrixXd* train_distances) {
  if (train.empty()) throw Error(ErrorCode::EmptyClass, "no training samples");
  if (num_classes < 1) throw Error(ErrorCode::InvalidInput, "num_classes must be >= 1");
  PseudoMixtureModel model;
  model.num_classes = num_classes;
  model.projection = projection;
  model.class_priors = Eigen::VectorXd::Zero(num_classes);
  for (const auto& s : train) {
    if (s.label < 0 || s.label >= num_classes) {
      throw Error(ErrorCode::InvalidInput, "label " + std::to_string(s.label) + " out of range for " + s.id);
    }
    model.class_priors(s.label) += 1.0;
    model.references.push_back(model.to_reference_space(s.distribution));
    model.reference_labels.push_back(s.label);
  }
  for (int l = 0; l < num_classes; ++l) {
    if (model.class_priors(l) == 0.0) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(l) + " has no training sample");
  }
  model.class_priors /= static_cast<double>(train.size());

  model.shape = config.shape.value_or(static_cast<double>(model.reference_dim()));
  if (!(model.shape > 0.0)) throw Error(ErrorCode::InvalidInput, "shape must be > 0");
  if (config.scale) {
    model.scale = *config.scale;
  } else {
    Eigen::MatrixXd d2;
    if (train_distances != nullptr) {
      if (train_distances->rows() != static_cast<Eigen::Index>(train.size())) {
        throw Error(ErrorCode::DimensionMismatch, "training distance matrix has wrong size");
      }
      d2 = *train_distances;
    } else {
      const auto n = static_cast<Eigen::Index>(train.size());
      d2 = Eigen::MatrixXd::Zero(n, n);
      std::vector<std::pair<Eigen::Index, Eigen::Index>> jobs;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) jobs.emplace_back(i, j);
      }
      std::vector<double> values(jobs.size());
      parallel_for(jobs.size(), [&](std::size_t k) {
        values[k] = maw2(model.references[static_cast<std::size_t>(jobs[k].first)],
                         model.references[static_cast<std::size_t>(jobs[k].second)]).cost;
      });
      for (std::size_t k = 0; k < jobs.size(); ++k) {
        d2(jobs[k].first, jobs[k].second) = values[k];
        d2(jobs[k].second, jobs[k].first) = values[k];
      }
    }
    double b = median_pairwise(d2);
    if (!(b > 0.0)) {
      // Fewer than half the pairs are distinct: fall back to the mean, then 1.
      const Eigen::Index n = d2.rows();
      const double mean = n > 1 ? d2.sum() / static_cast<double>(n * (n - 1)) : 0.0;
      b = mean > 0.0 ? mean : 1.0;
    }
    model.scale = b;
  }
  if (!(model.scale > 0.0) || !std::isfinite(model.scale)) throw Error(ErrorCode::InvalidInput, "scale must be finite and > 0");
  return model;
}

Eigen::VectorXd reference_distances(const PseudoMixtureModel& model, const GaussianMixture& g) {
  if (g.dim() != model.reference_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "mixture dimension " + std::to_string(g.dim()) +
                                                  " differs from reference dimension " +
                                                  std::to_string(model.reference_dim()));
  }
  Eigen::VectorXd d(static_cast<Eigen::Index>(model.references.size()));
  for (std::size_t j = 0; j < model.references.size(); ++j) d(static_cast<Eigen::Index>(j)) = maw2(g, model.references[j]).cost;
  return d;
}

double log_pseudo_density(const PseudoMixtureModel& model, int label, std::span<const double> distances) {
  if (distances.size() != model.references.size()) {
    throw Error(ErrorCode::DimensionMismatch, "distance count differs from reference count");
  }
  std::vector<double> terms;
  for (std::size_t j = 0; j < distances.size(); ++j) {
    if (model.reference_labels[j] == label) terms.push_back(-distances[j] / model.scale);
  }
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  const double norm = -model.shape * std::log(std::numbers::pi * model.scale);
  return norm + log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
}

double pseudo_density(const PseudoMixtureModel& model, int label, const GaussianMixture& g) {
  const Eigen::VectorXd d = reference_distances(model, g);
  return std::exp(log_pseudo_density(model, label, std::span<const double>(d.data(), static_cast<std::size_t>(d.size()))));
}

Eigen::VectorXd posterior_from_distances(const PseudoMixtureModel& model, std::span<const double> distances) {
  std::vector<double> scores(static_cast<std::size_t>(model.num_classes));
  for (int l = 0; l < model.num_classes; ++l) {
    // The shared (pi b)^(-s) factor is left out; it cancels on normalization.
    std::vector<double> terms;
    for (std::size_t j = 0; j < distances.size(); ++j) {
      if (model.reference_labels[j] == l) terms.push_back(-distances[j] / model.scale);
    }
    const double lp = terms.empty() ? -std::numeric_limits<double>::infinity()
                                    : log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
    scores[static_cast<std::size_t>(l)] = std::log(model.class_priors(l)) + lp;
  }
  const double total = log_sum_exp(scores);
  Eigen::VectorXd post = Eigen::VectorXd::Zero(model.num_classes);
  if (!std::isfinite(total)) {
    std::size_t nearest = 0;
    for (std::size_t j = 1; j < distances.size(); ++j) {
      if (distances[j] < distances[nearest]) nearest = j;
    }
    post(model.reference_labels[nearest]) = 1.0;
    return post;
  }
  for (int l = 0; l < model.num_classes; ++l) post(l) = std::exp(scores[static_cast<std::size_t>(l)] - total);
  return post / post.sum();
}

Eigen::VectorXd posterior(const PseudoMixtureModel& model, const GaussianMixture& g) {
  const Eigen::VectorXd d = reference_distances(model, g);
  return posterior_from_distances(model, std::span<const double>(d.data(), static_cast<std::size_t>(d.size())));
}

int predict(const Eigen::VectorXd& posterior) {
  Eigen::Index best = 0;
  for (Eigen::Index l = 1; l < posterior.size(); ++l) {
    if (posterior(l) > posterior(best)) best = l;
  }
  return static_cast<int>(best);
}

nlohmann::json to_json(const PseudoMixtureModel& model) {
  nlohmann::json refs = nlohmann::json::array();
  for (std::size_t j = 0; j < model.references.size(); ++j) {
    refs.push_back({{"label", model.reference_labels[j]}, {"gmm", to_json(model.references[j])}});
  }
  nlohmann::json j{{"format", kModelFormat},
                   {"num_classes", model.num_classes},
                   {"shape", model.shape},
                   {"scale", model.scale},
                   {"class_priors", std::vector<double>(model.class_priors.data(),
                                                        model.class_priors.data() + model.class_priors.size())},
                   {"references", std::move(refs)}};
  if (model.projection) {
    const Eigen::MatrixXd& a = model.projection->matrix();
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(a.cols()));
      for (Eigen::Index c = 0; c < a.cols(); ++c) row[static_cast<std::size_t>(c)] = a(r, c);
      rows.push_back(std::move(row));
    }
    j["projection"] = std::move(rows);
  } else {
    j["projection"] = nullptr;
  }
  return j;
}

PseudoMixtureModel pseudo_mixture_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) {
      throw Error(ErrorCode::ParseError, "unsupported model format " + j.at("format").get<std::string>());
    }
    PseudoMixtureModel model;
    model.num_classes = j.at("num_classes").get<int>();
    model.shape = j.at("shape").get<double>();
    model.scale = j.at("scale").get<double>();
    const auto priors = j.at("class_priors").get<std::vector<double>>();
    model.class_priors = Eigen::Map<const Eigen::VectorXd>(priors.data(), static_cast<Eigen::Index>(priors.size()));
    for (const auto& r : j.at("references")) {
      model.reference_labels.push_back(r.at("label").get<int>());
      model.references.push_back(gmm_from_json(r.at("gmm")));
    }
    if (!j.at("projection").is_null()) {
      const auto rows = j.at("projection").get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = rows[static_cast<std::size_t>(r)].at(static_cast<std::size_t>(c));
      }
      model.projection = ProjectionMatrix(std::move(a));
    }
    if (model.references.empty() || model.class_priors.size() != model.num_classes) {
      throw Error(ErrorCode::ParseError, "inconsistent model document");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
  }
}

}  // namespace wcv
