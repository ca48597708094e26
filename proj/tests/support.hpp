#pragma once

// Random generators and brute-force oracles shared by the test binaries.
// Nothing here calls into the library's solvers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wcv/distributions.hpp"
#include "wcv/gmm_build.hpp"

namespace wcv::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline double normal(Rng& rng, double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng); }
inline int integer(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng, sd);
  }
  return m;
}

inline Eigen::VectorXd gaussian_vector(Rng& rng, Eigen::Index n, double sd = 1.0) {
  return gaussian_matrix(rng, n, 1, sd).col(0);
}

/// Probability vector; with `allow_zero` some entries may be exactly 0.
inline Eigen::VectorXd random_probabilities(Rng& rng, Eigen::Index n, bool allow_zero = false) {
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i) = (allow_zero && n > 1 && integer(rng, 0, 4) == 0) ? 0.0 : uniform(rng, 0.05, 1.0);
  }
  if (p.sum() == 0.0) p(0) = 1.0;
  return p / p.sum();
}

/// Q diag(lambda) Q^t with lambda in [lo, hi].
inline Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index d, double lo = 0.1, double hi = 3.0) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(rng, d, d));
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lambda(d);
  for (Eigen::Index i = 0; i < d; ++i) lambda(i) = uniform(rng, lo, hi);
  Eigen::MatrixXd m = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

/// PSD of the given rank (B B^t with B d x rank).
inline Eigen::MatrixXd random_psd(Rng& rng, Eigen::Index d, Eigen::Index rank) {
  const Eigen::MatrixXd b = gaussian_matrix(rng, d, rank);
  Eigen::MatrixXd m = b * b.transpose();
  return 0.5 * (m + m.transpose());
}

inline GaussianMixture random_gmm(Rng& rng, Eigen::Index d, Eigen::Index k, bool degenerate = false,
                                  double spread = 2.0) {
  std::vector<GaussianComponent> comps;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::VectorXd mean = gaussian_vector(rng, d, spread);
    comps.push_back(degenerate ? GaussianComponent::point_mass(mean)
                               : GaussianComponent(mean, SymMatrix(random_spd(rng, d, 0.05, 1.5))));
  }
  return GaussianMixture(std::move(comps), random_probabilities(rng, k));
}

inline std::vector<LabeledSample> random_samples(Rng& rng, int n, int classes, Eigen::Index d, Eigen::Index k,
                                                 bool degenerate = false, double shift = 1.0) {
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    const int label = i % classes;
    GaussianMixture g = random_gmm(rng, d, k, degenerate);
    std::vector<GaussianComponent> comps;
    for (const auto& c : g.components()) {
      Eigen::VectorXd mean = c.mean();
      mean(0) += shift * label;
      comps.push_back(GaussianComponent::trusted(mean, c.covariance()));
    }
    out.push_back({"s" + std::to_string(i), GaussianMixture(std::move(comps), g.priors()), label});
  }
  return out;
}

/// Dense coupling with the given marginals: Sinkhorn scaling of a random
/// positive matrix, then an exact fix-up of the last row and column.
inline Eigen::MatrixXd random_coupling(Rng& rng, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  Eigen::MatrixXd k(p.size(), q.size());
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) k(i, j) = uniform(rng, 0.2, 1.0);
  }
  for (int it = 0; it < 500; ++it) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) k.row(i) *= p(i) / k.row(i).sum();
    for (Eigen::Index j = 0; j < k.cols(); ++j) k.col(j) *= q(j) / k.col(j).sum();
  }
  return k;
}

/// Vertex enumeration of the transportation polytope: every spanning tree of
/// the complete bipartite graph on (rows, cols) is a candidate basis; its
/// flows come from a dense least-squares solve of the marginal equations and
/// the basis counts when the flows are nonnegative and reproduce the
/// marginals. Returns the minimum cost over feasible vertices.
inline double brute_force_ot(const Eigen::MatrixXd& cost, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  const int m = static_cast<int>(p.size());
  const int n = static_cast<int>(q.size());
  const int cells = m * n;
  const int basis = m + n - 1;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(basis));
  std::iota(pick.begin(), pick.end(), 0);
  Eigen::VectorXd rhs(m + n);
  rhs << p, q;
  auto find = [](std::vector<int>& parent, int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  while (true) {
    std::vector<int> parent(static_cast<std::size_t>(m + n));
    std::iota(parent.begin(), parent.end(), 0);
    bool tree = true;
    for (const int c : pick) {
      const int a = find(parent, c / n);
      const int b = find(parent, m + c % n);
      if (a == b) {
        tree = false;
        break;
      }
      parent[static_cast<std::size_t>(a)] = b;
    }
    if (tree) {
      Eigen::MatrixXd eq = Eigen::MatrixXd::Zero(m + n, basis);
      for (int t = 0; t < basis; ++t) {
        eq(pick[static_cast<std::size_t>(t)] / n, t) = 1.0;
        eq(m + pick[static_cast<std::size_t>(t)] % n, t) = 1.0;
      }
      const Eigen::VectorXd x = eq.colPivHouseholderQr().solve(rhs);
      if ((eq * x - rhs).cwiseAbs().maxCoeff() < 1e-10 && x.minCoeff() > -1e-12) {
        double c = 0.0;
        for (int t = 0; t < basis; ++t) c += std::max(0.0, x(t)) * cost(pick[static_cast<std::size_t>(t)] / n, pick[static_cast<std::size_t>(t)] % n);
        best = std::min(best, c);
      }
    }
    // Next combination of `basis` cells out of `cells`.
    int i = basis - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == cells - basis + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < basis; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

/// Squared-distance transport cost between two weighted point sets on the
/// line via the monotone (quantile) coupling.
inline double monotone_w2(std::vector<std::pair<double, double>> a, std::vector<std::pair<double, double>> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double cost = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  double ra = a.empty() ? 0.0 : a[0].second;
  double rb = b.empty() ? 0.0 : b[0].second;
  while (i < a.size() && j < b.size()) {
    const double flow = std::min(ra, rb);
    const double diff = a[i].first - b[j].first;
    cost += flow * diff * diff;
    ra -= flow;
    rb -= flow;
    if (ra <= 0.0 && ++i < a.size()) ra = a[i].second;
    if (rb <= 0.0 && ++j < b.size()) rb = b[j].second;
  }
  return cost;
}

/// max of a^t B a / a^t W a: best of `samples` random directions, then
/// gradient ascent with backtracking from the 16 best.
inline double rayleigh_oracle(Rng& rng, const Eigen::MatrixXd& b, const Eigen::MatrixXd& w, int samples = 100000) {
  const Eigen::Index d = b.rows();
  auto ratio = [&](const Eigen::VectorXd& a) { return a.dot(b * a) / a.dot(w * a); };
  std::vector<std::pair<double, Eigen::VectorXd>> starts;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd a = gaussian_vector(rng, d);
    a.normalize();
    starts.emplace_back(ratio(a), a);
  }
  std::partial_sort(starts.begin(), starts.begin() + 16, starts.end(),
                    [](const auto& x, const auto& y) { return x.first > y.first; });
  double best = starts.front().first;
  for (int s = 0; s < 16; ++s) {
    Eigen::VectorXd a = starts[static_cast<std::size_t>(s)].second;
    double r = ratio(a);
    double step = 1.0;
    for (int it = 0; it < 20000 && step > 1e-14; ++it) {
      const Eigen::VectorXd grad = 2.0 * (b * a - r * (w * a)) / a.dot(w * a);
      Eigen::VectorXd next = a + step * grad;
      next.normalize();
      const double rn = ratio(next);
      if (rn > r) {
        a = next;
        r = rn;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    best = std::max(best, r);
  }
  return best;
}

/// Brute-force AUC: fraction of (positive, negative) pairs ordered correctly,
/// ties counting 1/2.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& positive) {
  double hits = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      hits += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return hits / pairs;
}

/// Two-class data clouds in R^d whose class means differ along coordinate 0;
/// each cloud is drawn from a few subject-specific blobs.
inline std::vector<DataCloud> synthetic_clouds(Rng& rng, int n, Eigen::Index d, int points, double shift = 1.5) {
  std::vector<DataCloud> clouds;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const int blobs = 3;
    std::vector<Eigen::VectorXd> centers;
    for (int b = 0; b < blobs; ++b) {
      Eigen::VectorXd c = gaussian_vector(rng, d, 1.5);
      c(0) = 0.6 * c(0) + shift * label;
      centers.push_back(c);
    }
    Eigen::MatrixXd pts(points, d);
    for (int r = 0; r < points; ++r) {
      pts.row(r) = (centers[static_cast<std::size_t>(r % blobs)] + gaussian_vector(rng, d, 0.4)).transpose();
    }
    clouds.push_back({"c" + std::to_string(i), std::move(pts), label});
  }
  return clouds;
}

}  // namespace wcv::testing
