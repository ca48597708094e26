#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "wcv/error.hpp"
#include "wcv/linalg.hpp"

using namespace wcv;
using namespace wcv::testing;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

double rel_frob(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected wcv::Error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("SymMatrix symmetrizes and validates") {
  const SymMatrix s(mat2(1, 2, 4, 3));
  CHECK(s(0, 1) == 3.0);
  CHECK(s(1, 0) == 3.0);
  CHECK(code_of([] { SymMatrix(Eigen::MatrixXd::Ones(2, 3)); }) == ErrorCode::InvalidInput);
  CHECK(code_of([] { SymMatrix(mat2(1, NAN, 0, 1)); }) == ErrorCode::InvalidInput);
}

TEST_CASE("sym_eig examples") {
  SUBCASE("diag(1,4)") {
    const auto e = sym_eig(SymMatrix(mat2(1, 0, 0, 4)));
    CHECK(e.values(0) == doctest::Approx(4));
    CHECK(e.values(1) == doctest::Approx(1));
    CHECK(e.vectors(0, 0) == doctest::Approx(0));
    CHECK(e.vectors(1, 0) == doctest::Approx(1));
    CHECK(e.vectors(0, 1) == doctest::Approx(1));
  }
  SUBCASE("identity(3)") {
    const auto e = sym_eig(SymMatrix::identity(3));
    for (int i = 0; i < 3; ++i) CHECK(e.values(i) == doctest::Approx(1));
    CHECK(rel_frob(e.vectors.transpose() * e.vectors, Eigen::MatrixXd::Identity(3, 3)) < 1e-12);
    for (int j = 0; j < 3; ++j) {
      Eigen::Index first = 0;
      while (std::abs(e.vectors(first, j)) <= 1e-12) ++first;
      CHECK(e.vectors(first, j) > 0);
    }
  }
  SUBCASE("[[2,1],[1,2]]") {
    const auto e = sym_eig(SymMatrix(mat2(2, 1, 1, 2)));
    CHECK(e.values(0) == doctest::Approx(3));
    CHECK(e.values(1) == doctest::Approx(1));
    CHECK(e.vectors(0, 0) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(e.vectors(1, 0) == doctest::Approx(1 / std::sqrt(2.0)));
  }
  SUBCASE("non-finite input") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
    m(0, 0) = std::numeric_limits<double>::infinity();
    CHECK(code_of([&] { sym_eig(SymMatrix(m)); }) == ErrorCode::InvalidInput);
  }
}

TEST_CASE("sym_eig property: eigenpairs, ordering, orthonormality, signs") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = integer(rng, 1, 8);
    const Eigen::MatrixXd a = gaussian_matrix(rng, d, d);
    const SymMatrix m(a + a.transpose());
    const auto e = sym_eig(m);
    const double scale = std::max(1.0, e.values.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < d; ++i) {
      CHECK((m.matrix() * e.vectors.col(i) - e.values(i) * e.vectors.col(i)).norm() <= 1e-8 * scale);
      if (i + 1 < d) CHECK(e.values(i) >= e.values(i + 1));
      Eigen::Index first = 0;
      const double big = e.vectors.col(i).cwiseAbs().maxCoeff();
      while (std::abs(e.vectors(first, i)) <= 1e-12 * big) ++first;
      CHECK(e.vectors(first, i) > 0);
    }
    CHECK((e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(d, d)).norm() < 1e-8);
    CHECK((sym_eigenvalues(m) - e.values).norm() <= 1e-10 * scale);
  }
}

TEST_CASE("psd_sqrt examples") {
  CHECK(rel_frob(psd_sqrt(SymMatrix(mat2(4, 0, 0, 9))).matrix(), mat2(2, 0, 0, 3)) < 1e-14);
  CHECK(rel_frob(psd_sqrt(SymMatrix::identity(4)).matrix(), Eigen::MatrixXd::Identity(4, 4)) < 1e-14);
  // [[2,1],[1,2]] = V diag(3,1) V^t with V = [[1,1],[1,-1]]/sqrt2, so the root
  // is ((sqrt3 + 1)/2) I-part and ((sqrt3 - 1)/2) off-diagonal.
  const double a = (std::sqrt(3.0) + 1.0) / 2.0;
  const double b = (std::sqrt(3.0) - 1.0) / 2.0;
  const SymMatrix s = psd_sqrt(SymMatrix(mat2(2, 1, 1, 2)));
  CHECK(rel_frob(s.matrix(), mat2(a, b, b, a)) < 1e-14);
  CHECK(rel_frob(s.matrix() * s.matrix(), mat2(2, 1, 1, 2)) < 1e-12);
  CHECK(code_of([] { psd_sqrt(SymMatrix(mat2(1, 0, 0, -1))); }) == ErrorCode::NotPositiveSemidefinite);
  // Roundoff-level negative eigenvalue is clamped.
  CHECK_NOTHROW(psd_sqrt(SymMatrix(mat2(1, 0, 0, -1e-13))));
}

TEST_CASE("psd_sqrt property: S S = m for random PSD of any rank") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = integer(rng, 1, 7);
    const auto rank = integer(rng, 0, static_cast<int>(d));
    const Eigen::MatrixXd m = random_psd(rng, d, rank);
    const SymMatrix s = psd_sqrt(SymMatrix(m));
    CHECK(rel_frob(s.matrix() * s.matrix(), m) < 1e-8);
    CHECK(is_numerically_psd(s));
  }
}

TEST_CASE("psd_inv_sqrt examples and errors") {
  CHECK(rel_frob(psd_inv_sqrt(SymMatrix(mat2(4, 0, 0, 16)), 0.0).matrix(), mat2(0.5, 0, 0, 0.25)) < 1e-14);
  CHECK(rel_frob(psd_inv_sqrt(SymMatrix::identity(3), 0.0).matrix(), Eigen::MatrixXd::Identity(3, 3)) < 1e-14);
  CHECK(rel_frob(psd_inv_sqrt(SymMatrix::zero(3), 1.0).matrix(), Eigen::MatrixXd::Identity(3, 3)) < 1e-14);
  CHECK(code_of([] { psd_inv_sqrt(SymMatrix(mat2(1, 0, 0, 0)), 0.0); }) == ErrorCode::SingularMatrix);
  CHECK(code_of([] { psd_inv_sqrt(SymMatrix::zero(2), 0.0); }) == ErrorCode::SingularMatrix);
}

TEST_CASE("psd_inv_sqrt property: W m W = I for random SPD") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = integer(rng, 1, 7);
    const Eigen::MatrixXd m = random_spd(rng, d, 0.01, 10.0);
    const Eigen::MatrixXd w = psd_inv_sqrt(SymMatrix(m), 0.0).matrix();
    CHECK((w * m * w - Eigen::MatrixXd::Identity(d, d)).norm() < 1e-8);
  }
}

TEST_CASE("auto_ridge only fires on ill-conditioned matrices") {
  CHECK(auto_ridge(SymMatrix::identity(3)) == 0.0);
  const SymMatrix singular(mat2(2, 0, 0, 0));
  CHECK(auto_ridge(singular) == doctest::Approx(1e-8 * 2.0 / 2.0));
  CHECK_NOTHROW(psd_inv_sqrt(singular, auto_ridge(singular)));
}

TEST_CASE("orthonormal_span examples") {
  const Eigen::MatrixXd e = Eigen::MatrixXd::Identity(3, 2);
  const Subspace s = orthonormal_span(e);
  CHECK((s.basis().transpose() * s.basis() - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-14);
  CHECK(grassmann_distance(s, Subspace(e)) < 1e-12);

  Eigen::MatrixXd v(2, 1);
  v << 3, 4;
  const Subspace u = orthonormal_span(v);
  CHECK(u.basis()(0, 0) == doctest::Approx(0.6));
  CHECK(u.basis()(1, 0) == doctest::Approx(0.8));

  const Subspace full = orthonormal_span(mat2(1, 1, 0, 1));
  CHECK((full.basis().transpose() * full.basis() - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-14);
  CHECK(std::abs(full.basis().determinant()) == doctest::Approx(1.0));

  CHECK(code_of([] { orthonormal_span(mat2(1, 2, 1, 2)); }) == ErrorCode::RankDeficient);
  CHECK(code_of([] { orthonormal_span(Eigen::MatrixXd::Zero(3, 1)); }) == ErrorCode::RankDeficient);
}

TEST_CASE("orthonormal_span property: same span, orthonormal") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = integer(rng, 2, 8);
    const auto k = integer(rng, 1, static_cast<int>(d));
    const Eigen::MatrixXd a = gaussian_matrix(rng, d, k);
    const Subspace s = orthonormal_span(a);
    CHECK((s.basis().transpose() * s.basis() - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-10);
    // Projection of a onto span(s) reproduces a.
    CHECK((s.basis() * (s.basis().transpose() * a) - a).norm() < 1e-10 * a.norm());
  }
}

TEST_CASE("grassmann_distance examples") {
  Eigen::MatrixXd e1(2, 1), e2(2, 1), diag(2, 1);
  e1 << 1, 0;
  e2 << 0, 1;
  diag << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  CHECK(grassmann_distance(Subspace(e1), Subspace(e1)) == doctest::Approx(0.0));
  CHECK(grassmann_distance(Subspace(e1), Subspace(e2)) == doctest::Approx(std::numbers::pi / 2));
  CHECK(grassmann_distance(Subspace(e1), Subspace(diag)) == doctest::Approx(std::numbers::pi / 4));
  CHECK(code_of([&] { grassmann_distance(Subspace(e1), Subspace(Eigen::MatrixXd::Identity(3, 1))); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { grassmann_distance(Subspace(e1), Subspace(Eigen::MatrixXd::Identity(2, 2))); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([] { Subspace(Eigen::MatrixXd::Ones(2, 1)); }) == ErrorCode::InvalidInput);
}

TEST_CASE("grassmann_distance property: symmetric, zero iff same span, rotation of a line") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = integer(rng, 2, 7);
    const auto k = integer(rng, 1, static_cast<int>(d) - 1);
    const Subspace a = orthonormal_span(gaussian_matrix(rng, d, k));
    const Subspace b = orthonormal_span(gaussian_matrix(rng, d, k));
    CHECK(grassmann_distance(a, b) == doctest::Approx(grassmann_distance(b, a)).epsilon(1e-12));
    CHECK(grassmann_distance(a, b) > 1e-6);
    // A different basis of the same span (mixing by a random invertible matrix).
    const Subspace a2 = orthonormal_span(a.basis() * random_spd(rng, k));
    CHECK(grassmann_distance(a, a2) < 1e-7);
  }
  // Small angles keep full relative accuracy.
  for (const double theta : {1e-9, 1e-6, 1e-3, 0.5, 1.2}) {
    Eigen::MatrixXd u(3, 1), v(3, 1);
    u << 1, 0, 0;
    v << std::cos(theta), std::sin(theta), 0;
    CHECK(grassmann_distance(Subspace(u), Subspace(v)) == doctest::Approx(theta).epsilon(1e-9));
  }
}
