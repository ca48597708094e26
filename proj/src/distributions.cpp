#include "wcv/distributions.hpp"

#include <cmath>
#include <limits>
#include <json.hpp>

#include "wcv/error.hpp"

namespace wcv {

Eigen::VectorXd normalized_probabilities(const Eigen::VectorXd& p, const char* what) {
  if (p.size() == 0) throw Error(ErrorCode::InvalidInput, std::string(what) + " is empty");
  if (!p.allFinite() || (p.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidInput, std::string(what) + " must be finite and nonnegative");
  }
  const double total = p.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidInput, std::string(what) + " sums to " + std::to_string(total));
  }
  // Already normalized up to summation roundoff: keep the exact values so that
  // repeated validation is idempotent.
  if (std::abs(total - 1.0) <= static_cast<double>(p.size()) * std::numeric_limits<double>::epsilon()) return p;
  return p / total;
}

DiscreteDistribution::DiscreteDistribution(Eigen::MatrixXd support, const Eigen::VectorXd& weights)
    : support_(std::move(support)), weights_(normalized_probabilities(weights, "weights")) {
  if (support_.rows() != weights_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "support/weight count mismatch");
  }
  if (support_.cols() == 0) throw Error(ErrorCode::InvalidInput, "support points must have dimension >= 1");
  if (!support_.allFinite()) throw Error(ErrorCode::InvalidInput, "support has non-finite entries");
}

DiscreteDistribution DiscreteDistribution::uniform(Eigen::MatrixXd support) {
  const Eigen::Index m = support.rows();
  if (m == 0) throw Error(ErrorCode::InvalidInput, "empty support");
  return DiscreteDistribution(std::move(support), Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m)));
}

GaussianComponent::GaussianComponent(Trusted, Eigen::VectorXd mean, SymMatrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (mean_.size() == 0) throw Error(ErrorCode::InvalidInput, "component dimension must be >= 1");
  if (covariance_.dim() != mean_.size()) throw Error(ErrorCode::DimensionMismatch, "mean/covariance dimension mismatch");
  if (!mean_.allFinite()) throw Error(ErrorCode::InvalidInput, "mean has non-finite entries");
  degenerate_ = covariance_.is_zero();
}

GaussianComponent::GaussianComponent(Eigen::VectorXd mean, SymMatrix covariance)
    : GaussianComponent(Trusted{}, std::move(mean), std::move(covariance)) {
  if (!degenerate_ && !is_numerically_psd(covariance_)) {
    throw Error(ErrorCode::NotPositiveSemidefinite, "component covariance is not PSD");
  }
}

GaussianComponent GaussianComponent::point_mass(Eigen::VectorXd mean) {
  const Eigen::Index d = mean.size();
  return GaussianComponent(Trusted{}, std::move(mean), SymMatrix::zero(d));
}

GaussianComponent GaussianComponent::trusted(Eigen::VectorXd mean, SymMatrix covariance) {
  return GaussianComponent(Trusted{}, std::move(mean), std::move(covariance));
}

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components, const Eigen::VectorXd& priors)
    : components_(std::move(components)), priors_(normalized_probabilities(priors, "priors")) {
  check_shapes();
}

GaussianMixture::GaussianMixture(Trusted, std::vector<GaussianComponent> components, Eigen::VectorXd priors)
    : components_(std::move(components)), priors_(std::move(priors)) {
  check_shapes();
}

GaussianMixture GaussianMixture::trusted(std::vector<GaussianComponent> components, Eigen::VectorXd priors) {
  return GaussianMixture(Trusted{}, std::move(components), std::move(priors));
}

void GaussianMixture::check_shapes() const {
  if (components_.empty()) throw Error(ErrorCode::InvalidInput, "mixture has no components");
  if (static_cast<Eigen::Index>(components_.size()) != priors_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "component/prior count mismatch");
  }
  const Eigen::Index d = components_.front().dim();
  for (const auto& c : components_) {
    if (c.dim() != d) throw Error(ErrorCode::DimensionMismatch, "components differ in dimension");
  }
}

Eigen::MatrixXd GaussianMixture::weighted_covariance() const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim(), dim());
  for (Eigen::Index i = 0; i < size(); ++i) {
    const auto& c = component(i);
    if (!c.degenerate()) s.noalias() += priors_(i) * c.covariance().matrix();
  }
  return s;
}

int class_count(const std::vector<LabeledSample>& samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidInput, "no samples");
  int m = 0;
  for (const auto& s : samples) {
    if (s.label < 0) throw Error(ErrorCode::InvalidInput, "negative label for " + s.id);
    m = std::max(m, s.label + 1);
  }
  return m;
}

GaussianMixture from_discrete(const DiscreteDistribution& q) {
  std::vector<GaussianComponent> comps;
  comps.reserve(static_cast<std::size_t>(q.size()));
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    comps.push_back(GaussianComponent::point_mass(q.support().row(j).transpose()));
  }
  return GaussianMixture(std::move(comps), q.weights());
}

GaussianMixture project(const GaussianMixture& g, const Eigen::MatrixXd& a) {
  if (a.rows() != g.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "projection has " + std::to_string(a.rows()) +
                                                  " rows, mixture dimension is " + std::to_string(g.dim()));
  }
  if (a.cols() == 0 || a.cols() > a.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "projection must have 1..d columns");
  }
  std::vector<GaussianComponent> comps;
  comps.reserve(static_cast<std::size_t>(g.size()));
  for (const auto& c : g.components()) {
    Eigen::VectorXd mean = a.transpose() * c.mean();
    if (c.degenerate()) {
      comps.push_back(GaussianComponent::point_mass(std::move(mean)));
    } else {
      comps.push_back(GaussianComponent::trusted(
          std::move(mean), SymMatrix(a.transpose() * c.covariance().matrix() * a)));
    }
  }
  return GaussianMixture::trusted(std::move(comps), g.priors());
}

nlohmann::json to_json(const GaussianMixture& g) {
  nlohmann::json priors = nlohmann::json::array();
  nlohmann::json means = nlohmann::json::array();
  nlohmann::json covs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    priors.push_back(g.priors()(i));
    const auto& c = g.component(i);
    means.push_back(std::vector<double>(c.mean().data(), c.mean().data() + c.mean().size()));
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < c.dim(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(c.dim()));
      for (Eigen::Index s = 0; s < c.dim(); ++s) row[static_cast<std::size_t>(s)] = c.covariance()(r, s);
      rows.push_back(std::move(row));
    }
    covs.push_back(std::move(rows));
  }
  return {{"priors", std::move(priors)}, {"means", std::move(means)}, {"covariances", std::move(covs)}};
}

GaussianMixture gmm_from_json(const nlohmann::json& j) {
  try {
    const auto priors = j.at("priors").get<std::vector<double>>();
    const auto means = j.at("means").get<std::vector<std::vector<double>>>();
    const auto covs = j.at("covariances").get<std::vector<std::vector<std::vector<double>>>>();
    if (priors.empty() || priors.size() != means.size() || priors.size() != covs.size()) {
      throw Error(ErrorCode::ParseError, "priors/means/covariances lengths disagree");
    }
    std::vector<GaussianComponent> comps;
    for (std::size_t i = 0; i < priors.size(); ++i) {
      const auto d = static_cast<Eigen::Index>(means[i].size());
      if (static_cast<Eigen::Index>(covs[i].size()) != d) {
        throw Error(ErrorCode::DimensionMismatch, "covariance " + std::to_string(i) + " has wrong row count");
      }
      Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(means[i].data(), d);
      Eigen::MatrixXd cov(d, d);
      for (Eigen::Index r = 0; r < d; ++r) {
        if (static_cast<Eigen::Index>(covs[i][static_cast<std::size_t>(r)].size()) != d) {
          throw Error(ErrorCode::DimensionMismatch, "covariance " + std::to_string(i) + " is not square");
        }
        for (Eigen::Index s = 0; s < d; ++s) cov(r, s) = covs[i][static_cast<std::size_t>(r)][static_cast<std::size_t>(s)];
      }
      comps.emplace_back(std::move(mean), SymMatrix(cov));
    }
    return GaussianMixture(std::move(comps), Eigen::Map<const Eigen::VectorXd>(priors.data(), static_cast<Eigen::Index>(priors.size())));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("mixture JSON: ") + e.what());
  }
}

}  // namespace wcv
