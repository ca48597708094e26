#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "wcv/error.hpp"
#include "wcv/otaf.hpp"

using namespace wcv;
using namespace wcv::testing;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected wcv::Error");
  return ErrorCode::InvalidInput;
}

LabeledSample point_sample(const std::string& id, std::initializer_list<double> x, int label) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  Eigen::Index i = 0;
  for (const double t : x) v(i++) = t;
  return {id, GaussianMixture({GaussianComponent::point_mass(v)}, Eigen::VectorXd::Ones(1)), label};
}

std::vector<int> labels_of(const std::vector<LabeledSample>& s) {
  std::vector<int> out;
  for (const auto& x : s) out.push_back(x.label);
  return out;
}

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

// Point-mass clouds for two classes separated along e1 with noise along e2.
std::vector<LabeledSample> separated_discrete(Rng& rng, int n, Eigen::Index d, int support, double noise) {
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    Eigen::MatrixXd pts = gaussian_matrix(rng, support, d, 0.3);
    pts.col(0).array() += 2.0 * label;
    for (Eigen::Index c = 1; c < d; ++c) pts.col(c) *= noise;
    out.push_back({"q" + std::to_string(i), from_discrete(DiscreteDistribution::uniform(pts)), label});
  }
  return out;
}

// Scatter matrices summed straight from their definition.
Eigen::MatrixXd direct_scatter(const std::vector<LabeledSample>& s, const std::vector<IndexPair>& pairs,
                               const std::vector<Coupling>& couplings) {
  const Eigen::Index d = s.front().distribution.dim();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const auto& g1 = s[pairs[t].first].distribution;
    const auto& g2 = s[pairs[t].second].distribution;
    const auto& pi = couplings[t].plan();
    for (Eigen::Index i = 0; i < g1.size(); ++i) {
      for (Eigen::Index j = 0; j < g2.size(); ++j) {
        const Eigen::VectorXd diff = g1.component(i).mean() - g2.component(j).mean();
        c += pi(i, j) * diff * diff.transpose();
      }
    }
    for (Eigen::Index i = 0; i < g1.size(); ++i) c += g1.priors()(i) * g1.component(i).covariance().matrix();
    for (Eigen::Index j = 0; j < g2.size(); ++j) c += g2.priors()(j) * g2.component(j).covariance().matrix();
  }
  return c / static_cast<double>(pairs.size());
}

}  // namespace

TEST_CASE("discriminant_ratios examples") {
  SUBCASE("regular tetrahedron gives gamma = 1") {
    const std::vector<LabeledSample> s{point_sample("a", {1, 1, 1}, 0), point_sample("b", {1, -1, -1}, 0),
                                       point_sample("c", {-1, 1, -1}, 1), point_sample("d", {-1, -1, 1}, 1)};
    for (const double g : discriminant_ratios(s)) CHECK(g == doctest::Approx(1.0));
  }
  SUBCASE("identical same-class instances give +inf") {
    const std::vector<LabeledSample> s{point_sample("a", {0}, 0), point_sample("b", {0}, 0), point_sample("c", {5}, 1),
                                       point_sample("d", {5}, 1)};
    for (const double g : discriminant_ratios(s)) CHECK(std::isinf(g));
  }
  SUBCASE("matches brute force on mixtures") {
    Rng rng(31);
    const auto s = random_samples(rng, 6, 2, 2, 2);
    const auto g = discriminant_ratios(s);
    for (std::size_t k = 0; k < s.size(); ++k) {
      double same = 0, other = 0;
      int ns = 0, no = 0;
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (j == k) continue;
        const double d = maw2(s[k].distribution, s[j].distribution).cost;
        if (s[j].label == s[k].label) {
          same += d;
          ++ns;
        } else {
          other += d;
          ++no;
        }
      }
      CHECK(g[k] == doctest::Approx((other / no) / (same / ns)).epsilon(1e-10));
    }
  }
  SUBCASE("errors") {
    const std::vector<LabeledSample> single{point_sample("a", {0}, 0), point_sample("b", {1}, 0),
                                            point_sample("c", {2}, 1)};
    CHECK(code_of([&] { discriminant_ratios(single); }) == ErrorCode::SingletonClass);
    const std::vector<LabeledSample> one_class{point_sample("a", {0}, 0), point_sample("b", {1}, 0)};
    CHECK(code_of([&] { discriminant_ratios(one_class); }) == ErrorCode::InvalidInput);
  }
}

TEST_CASE("select_pairs examples") {
  const std::vector<int> labels{0, 0, 0, 1, 1, 1};
  SUBCASE("alpha = 1 anchors every instance") {
    const std::vector<double> g{3, 1, 2, 6, 5, 4};
    const auto p = select_pairs(labels, g, 1.0);
    CHECK(p.anchors.size() == 6);
    CHECK(p.between.size() == 18);
    CHECK(p.within.size() == 12);
  }
  SUBCASE("n = 6, alpha = 1/3") {
    const std::vector<double> g{3, 1, 2, 0.5, 5, 4};
    const auto p = select_pairs(labels, g, 1.0 / 3.0);
    CHECK(p.anchors == std::vector<std::size_t>{3, 1});
    CHECK(p.between.size() == 6);
    CHECK(p.within.size() == 4);
    for (const auto& [a, b] : p.between) CHECK(labels[a] != labels[b]);
    for (const auto& [a, b] : p.within) {
      CHECK(labels[a] == labels[b]);
      CHECK(a != b);
    }
    // Sorted by anchor index, then partner.
    CHECK(p.between.front() == IndexPair{1, 3});
    CHECK(p.within.front() == IndexPair{1, 0});
  }
  SUBCASE("ties resolved by index") {
    const std::vector<double> g(6, 1.0);
    CHECK(select_pairs(labels, g, 1.0 / 3.0).anchors == std::vector<std::size_t>{0, 1});
    CHECK(select_pairs(labels, g, 0.5).anchors == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("empty within set") {
    const std::vector<int> l{0, 1};
    const std::vector<double> g{1, 1};
    CHECK(code_of([&] { select_pairs(l, g, 1.0); }) == ErrorCode::EmptyPairSet);
  }
  SUBCASE("invalid alpha") {
    const std::vector<double> g(6, 1.0);
    CHECK(code_of([&] { select_pairs(labels, g, 0.0); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { select_pairs(labels, g, 1.5); }) == ErrorCode::InvalidInput);
  }
}

TEST_CASE("scatter_matrices examples") {
  SUBCASE("single pair of point masses") {
    const std::vector<LabeledSample> s{point_sample("a", {1, 2}, 0), point_sample("b", {4, 0}, 1)};
    PairSets pairs{{0}, {{0, 1}}, {{0, 1}}};
    const Coupling c(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
    const auto sc = scatter_matrices(s, pairs, {{c}, {c}});
    Eigen::Vector2d diff(-3, 2);
    CHECK((sc.between.matrix() - diff * diff.transpose()).norm() < 1e-15);
  }
  SUBCASE("covariance-only case") {
    Eigen::MatrixXd s1 = mat2(2, 0, 0, 1), s2 = mat2(1, 0.5, 0.5, 3);
    const Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    const GaussianMixture g1({GaussianComponent(mu, SymMatrix(s1)), GaussianComponent(mu, SymMatrix(s2))},
                             Eigen::Vector2d(0.25, 0.75));
    const GaussianMixture g2({GaussianComponent(mu, SymMatrix(s2))}, Eigen::VectorXd::Ones(1));
    const std::vector<LabeledSample> s{{"a", g1, 0}, {"b", g2, 1}};
    PairSets pairs{{0}, {{0, 1}}, {{0, 1}}};
    const Coupling c(Eigen::Vector2d(0.25, 0.75), Eigen::Vector2d(0.25, 0.75), Eigen::VectorXd::Ones(1));
    const auto sc = scatter_matrices(s, pairs, {{c}, {c}});
    const Eigen::MatrixXd expected = 0.25 * s1 + 0.75 * s2 + s2;
    CHECK((sc.between.matrix() - expected).norm() < 1e-14);
    CHECK((sc.within.matrix() - expected).norm() < 1e-14);
  }
  SUBCASE("random mixtures against direct summation") {
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = random_samples(rng, 6, 2, 3, integer(rng, 1, 3));
      const auto pairs = select_pairs(labels_of(s), std::vector<double>(6, 1.0), 0.5);
      PairCouplings cps;
      for (const auto& [a, b] : pairs.between) {
        const auto& p = s[a].distribution.priors();
        const auto& q = s[b].distribution.priors();
        cps.between.emplace_back(random_coupling(rng, p, q), p, q);
      }
      for (const auto& [a, b] : pairs.within) {
        const auto& p = s[a].distribution.priors();
        const auto& q = s[b].distribution.priors();
        cps.within.emplace_back(random_coupling(rng, p, q), p, q);
      }
      const auto sc = scatter_matrices(s, pairs, cps);
      const Eigen::MatrixXd cb = direct_scatter(s, pairs.between, cps.between);
      const Eigen::MatrixXd cw = direct_scatter(s, pairs.within, cps.within);
      CHECK((sc.between.matrix() - cb).norm() <= 1e-12 * cb.norm());
      CHECK((sc.within.matrix() - cw).norm() <= 1e-12 * cw.norm());
    }
  }
  SUBCASE("coupling with the wrong marginals") {
    const std::vector<LabeledSample> s{point_sample("a", {1, 2}, 0), point_sample("b", {4, 0}, 1)};
    PairSets pairs{{0}, {{0, 1}}, {{0, 1}}};
    const Coupling c(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.5, 0.5), Eigen::VectorXd::Ones(1));
    CHECK(code_of([&] { scatter_matrices(s, pairs, {{c}, {c}}); }) == ErrorCode::MarginalMismatch);
  }
}

TEST_CASE("fisher_ratio examples") {
  Rng rng(33);
  const SymMatrix b(random_spd(rng, 3));
  CHECK(fisher_ratio(b, b, gaussian_matrix(rng, 3, 2)) == doctest::Approx(1.0));
  CHECK(fisher_ratio(SymMatrix(mat2(4, 0, 0, 1)), SymMatrix::identity(2), Eigen::MatrixXd::Identity(2, 1)) == 4.0);
  const SymMatrix w(random_spd(rng, 4));
  const SymMatrix b4(random_spd(rng, 4));
  const Eigen::MatrixXd a = gaussian_matrix(rng, 4, 4);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(rng, 4, 4));
  const Eigen::MatrixXd r = qr.householderQ();
  CHECK(fisher_ratio(b4, w, a * r) == doctest::Approx(fisher_ratio(b4, w, a)).epsilon(1e-12));
  CHECK(code_of([] { fisher_ratio(SymMatrix::identity(2), SymMatrix::zero(2), Eigen::MatrixXd::Identity(2, 1)); }) ==
        ErrorCode::DegenerateWithinVariation);
}

TEST_CASE("solve_directions examples") {
  SUBCASE("identity within scatter picks top eigenvectors") {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 3);
    b.diagonal() << 1, 5, 3;
    const auto a = solve_directions(SymMatrix(b), SymMatrix::identity(3), 2, true);
    CHECK(std::abs(a.matrix()(1, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(a.matrix()(2, 1)) == doctest::Approx(1.0));
  }
  SUBCASE("proportional matrices are deterministic") {
    const SymMatrix m(mat2(1, 0, 0, 9));
    const auto a1 = solve_directions(m, m, 1, true);
    const auto a2 = solve_directions(m, m, 1, true);
    CHECK(a1.matrix() == a2.matrix());
    CHECK(fisher_ratio(m, m, a1.matrix()) == doctest::Approx(1.0));
  }
  SUBCASE("grid search on the unit circle") {
    const SymMatrix b(mat2(2, 1, 1, 2));
    const SymMatrix w(mat2(1, 0, 0, 4));
    double best = 0.0;
    const int steps = 100000;
    for (int k = 0; k < steps; ++k) {
      const double t = std::numbers::pi * k / steps;
      const Eigen::Vector2d a(std::cos(t), std::sin(t));
      best = std::max(best, a.dot(b.matrix() * a) / a.dot(w.matrix() * a));
    }
    for (const bool ortho : {true, false}) {
      const auto a = solve_directions(b, w, 1, ortho);
      CHECK(fisher_ratio(b, w, a.matrix()) == doctest::Approx(best).epsilon(1e-6));
      CHECK(fisher_ratio(b, w, a.matrix()) >= best - 1e-12);
    }
  }
  SUBCASE("non-orthonormal columns are whitened eigenvectors") {
    Rng rng(34);
    const SymMatrix b(random_spd(rng, 4));
    const SymMatrix w(random_spd(rng, 4));
    const auto a = solve_directions(b, w, 2, false).matrix();
    // Generalized eigenvectors: B a = lambda W a.
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double lambda = a.col(j).dot(b.matrix() * a.col(j)) / a.col(j).dot(w.matrix() * a.col(j));
      CHECK((b.matrix() * a.col(j) - lambda * w.matrix() * a.col(j)).norm() < 1e-8 * (1 + lambda));
    }
    // W-orthonormal: a^t W a = I.
    CHECK((a.transpose() * w.matrix() * a - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-8);
  }
  SUBCASE("singular within scatter") {
    CHECK(code_of([] {
            solve_directions(SymMatrix::identity(2), SymMatrix(mat2(1, 0, 0, 0)), 1, true, RidgePolicy::None);
          }) == ErrorCode::SingularMatrix);
    CHECK_NOTHROW(solve_directions(SymMatrix::identity(2), SymMatrix(mat2(1, 0, 0, 0)), 1, true, RidgePolicy::Auto));
    CHECK_NOTHROW(
        solve_directions(SymMatrix::identity(2), SymMatrix(mat2(1, 0, 0, 0)), 1, true, RidgePolicy::Fixed, 1e-3));
  }
}

TEST_CASE("Rayleigh property: solve_directions matches a multi-start oracle") {
  Rng rng(35);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = integer(rng, 2, 6);
    const Eigen::MatrixXd b = random_spd(rng, d);
    const Eigen::MatrixXd w = random_spd(rng, d);
    const auto a = solve_directions(SymMatrix(b), SymMatrix(w), 1, true);
    const double got = fisher_ratio(SymMatrix(b), SymMatrix(w), a.matrix());
    const double oracle = rayleigh_oracle(rng, b, w, 20000);
    CHECK(got == doctest::Approx(oracle).epsilon(1e-6));
  }
}

TEST_CASE("ProjectionMatrix and OtafConfig validation") {
  CHECK(code_of([] { ProjectionMatrix(mat2(1, 2, 2, 4)); }) == ErrorCode::RankDeficient);
  CHECK(code_of([] { ProjectionMatrix(mat2(1, NAN, 0, 1)); }) == ErrorCode::InvalidInput);
  OtafConfig c;
  CHECK_NOTHROW(c.validate(3));
  c.reduced_dim = 3;
  CHECK(code_of([&] { c.validate(3); }) == ErrorCode::InvalidInput);
  c = {};
  c.min_iters = 0;
  CHECK(code_of([&] { c.validate(3); }) == ErrorCode::InvalidInput);
  c = {};
  c.min_iters = 5;
  c.max_iters = 4;
  CHECK(code_of([&] { c.validate(3); }) == ErrorCode::InvalidInput);
  c = {};
  c.epsilon = 0;
  CHECK(code_of([&] { c.validate(3); }) == ErrorCode::InvalidInput);
  c = {};
  c.alpha = 0;
  CHECK(code_of([&] { c.validate(3); }) == ErrorCode::InvalidInput);
}

TEST_CASE("PairwiseTransport agrees with maw2 and slices consistently") {
  Rng rng(36);
  const auto s = random_samples(rng, 6, 2, 2, 2);
  const auto pt = PairwiseTransport::compute(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(pt.distance(i, i) == 0.0);
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (i == j) continue;
      CHECK(pt.distance(i, j) == doctest::Approx(maw2(s[i].distribution, s[j].distribution).cost).epsilon(1e-12));
      CHECK(pt.coupling(i, j).plan() == pt.coupling(j, i).plan().transpose());
      CHECK((pt.coupling(i, j).row_marginal() - s[i].distribution.priors()).norm() < 1e-12);
    }
  }
  const std::vector<std::size_t> keep{0, 2, 5};
  const auto sub = pt.subset(keep);
  CHECK(sub.size() == 3);
  CHECK(sub.distance(1, 2) == pt.distance(2, 5));
  CHECK(sub.coupling(2, 0).plan() == pt.coupling(5, 0).plan());
}

TEST_CASE("fit recovers the separating axis") {
  Rng rng(37);
  const auto s = separated_discrete(rng, 12, 2, 5, 3.0);
  OtafConfig cfg;
  const auto r = fit(s, cfg);
  const Eigen::VectorXd a = r.projection.matrix().col(0).normalized();
  CHECK(std::abs(a(0)) > 0.99);
  CHECK(r.iterations >= cfg.min_iters);
  CHECK(r.iterations <= cfg.max_iters);
  CHECK(r.fisher_trace.size() == static_cast<std::size_t>(r.iterations));
  CHECK(r.grassmann_trace.size() == r.fisher_trace.size());
  CHECK(std::isnan(r.grassmann_trace[0]));
  CHECK(std::isnan(r.grassmann_trace[1]));
  for (std::size_t t = 2; t < r.grassmann_trace.size(); ++t) CHECK(r.grassmann_trace[t] >= 0.0);
  CHECK(r.best_iteration >= 1);
  for (const double x : r.fisher_trace) CHECK(x <= r.fisher_trace[static_cast<std::size_t>(r.best_iteration)]);
}

TEST_CASE("one update with native couplings reproduces solve_directions") {
  Rng rng(38);
  const auto s = random_samples(rng, 9, 2, 4, 2, false, 1.5);
  OtafConfig cfg;
  cfg.reduced_dim = 2;
  cfg.min_iters = 2;
  cfg.max_iters = 2;
  const auto r = fit(s, cfg);
  CHECK(r.iterations == 2);
  CHECK(r.fisher_trace.size() == 2);

  const auto pt = PairwiseTransport::compute(s);
  const auto pairs = select_pairs(labels_of(s), discriminant_ratios(labels_of(s), pt.distances()), cfg.alpha);
  PairCouplings cps;
  for (const auto& [a, b] : pairs.between) cps.between.push_back(pt.coupling(a, b));
  for (const auto& [a, b] : pairs.within) cps.within.push_back(pt.coupling(a, b));
  const auto sc = scatter_matrices(s, pairs, cps);
  const auto expected = solve_directions(sc.between, sc.within, 2, true);
  CHECK((r.projection.matrix() - expected.matrix()).norm() < 1e-10);
  CHECK(r.fisher_trace[1] == doctest::Approx(variation_ratio(s, pairs, expected.matrix())).epsilon(1e-12));
  CHECK(r.fisher_trace[0] == doctest::Approx(variation_ratio(s, pairs, Eigen::MatrixXd::Identity(4, 4))).epsilon(1e-12));
}

TEST_CASE("orthonormal fits keep A^t A = I") {
  Rng rng(39);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = random_samples(rng, 10, 2, 5, 2, false, 1.0);
    OtafConfig cfg;
    cfg.reduced_dim = 1 + trial % 3;
    const auto r = fit(s, cfg);
    const auto& a = r.projection.matrix();
    CHECK((a.transpose() * a - Eigen::MatrixXd::Identity(a.cols(), a.cols())).norm() < 1e-8);
  }
}

TEST_CASE("fit on discrete data ascends with d' = 1") {
  Rng rng(40);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = separated_discrete(rng, 10, 3, 4, 2.0);
    OtafConfig cfg;
    const auto r = fit(s, cfg);
    for (std::size_t t = 2; t < r.fisher_trace.size(); ++t) CHECK(r.fisher_trace[t] >= r.fisher_trace[t - 1] - 1e-10);
  }
}

TEST_CASE("fit errors") {
  Rng rng(41);
  const auto s = random_samples(rng, 6, 2, 3, 1);
  OtafConfig cfg;
  cfg.reduced_dim = 3;
  CHECK(code_of([&] { fit(s, cfg); }) == ErrorCode::InvalidInput);
  std::vector<LabeledSample> singleton(s.begin(), s.begin() + 3);
  CHECK(code_of([&] { fit(singleton, OtafConfig{}); }) == ErrorCode::SingletonClass);
}
