#include "wcv/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "wcv/error.hpp"

namespace wcv {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::InvalidInput, std::string(what) + " has non-finite entries");
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double scale = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12 * scale) {
      if (v(i) < 0) v = -v;
      return;
    }
  }
}

Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& vectors, const Eigen::VectorXd& diag) {
  return vectors * diag.asDiagonal() * vectors.transpose();
}

}  // namespace

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::InvalidInput, "symmetric matrix must be square");
  require_finite(m, "symmetric matrix");
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::zero(Eigen::Index dim) { return SymMatrix(Eigen::MatrixXd::Zero(dim, dim)); }

SymMatrix SymMatrix::identity(Eigen::Index dim) { return SymMatrix(Eigen::MatrixXd::Identity(dim, dim)); }

SymEigen sym_eig(const SymMatrix& m) {
  const Eigen::Index n = m.dim();
  SymEigen out;
  if (n == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.matrix());
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::InvalidInput, "eigendecomposition failed");
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index j = 0; j < n; ++j) fix_sign(out.vectors.col(j));
  return out;
}

Eigen::VectorXd sym_eigenvalues(const SymMatrix& m) {
  if (m.dim() == 0) return {};
  if (m.dim() == 1) return Eigen::VectorXd::Constant(1, m(0, 0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::InvalidInput, "eigendecomposition failed");
  return solver.eigenvalues().reverse();
}

bool is_numerically_psd(const SymMatrix& m, double rel_tol) {
  if (m.dim() == 0 || m.is_zero()) return true;
  const Eigen::VectorXd lambda = sym_eigenvalues(m);
  const double scale = lambda.cwiseAbs().maxCoeff();
  return lambda.minCoeff() >= -rel_tol * scale;
}

SymMatrix psd_sqrt(const SymMatrix& m) {
  if (m.dim() == 0) return m;
  if (m.is_zero()) return m;
  const SymEigen e = sym_eig(m);
  const double scale = e.values.cwiseAbs().maxCoeff();
  if (e.values.minCoeff() < -1e-10 * scale) {
    throw Error(ErrorCode::NotPositiveSemidefinite,
                "smallest eigenvalue " + std::to_string(e.values.minCoeff()) + " below tolerance");
  }
  // Eigenvalues at the solver's roundoff level are zero for all practical
  // purposes; rooting them would inflate eps-sized noise to sqrt(eps).
  const double noise = 1e-14 * scale;
  const Eigen::VectorXd roots = e.values.unaryExpr([noise](double l) { return l > noise ? std::sqrt(l) : 0.0; });
  return SymMatrix(reconstruct(e.vectors, roots));
}

SymMatrix psd_inv_sqrt(const SymMatrix& m, double ridge) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw Error(ErrorCode::InvalidInput, "ridge must be finite and >= 0");
  Eigen::MatrixXd shifted = m.matrix();
  shifted.diagonal().array() += ridge;
  const SymEigen e = sym_eig(SymMatrix(shifted));
  const double lmax = e.values.maxCoeff();
  const double lmin = e.values.minCoeff();
  if (!(lmax > 0.0) || !(lmin > 1e-12 * lmax)) {
    throw Error(ErrorCode::SingularMatrix, "matrix is singular (lambda_min=" + std::to_string(lmin) +
                                               ", lambda_max=" + std::to_string(lmax) + ")");
  }
  const Eigen::VectorXd inv_roots = e.values.cwiseSqrt().cwiseInverse();
  return SymMatrix(reconstruct(e.vectors, inv_roots));
}

double auto_ridge(const SymMatrix& m) {
  if (m.dim() == 0) return 0.0;
  const Eigen::VectorXd lambda = sym_eigenvalues(m);
  const double lmax = lambda.maxCoeff();
  const double lmin = lambda.minCoeff();
  if (lmax > 0.0 && lmin / lmax >= 1e-10) return 0.0;
  return 1e-8 * m.trace() / static_cast<double>(m.dim());
}

Subspace::Subspace(Eigen::MatrixXd basis) : basis_(std::move(basis)) {
  require_finite(basis_, "subspace basis");
  const Eigen::MatrixXd gram = basis_.transpose() * basis_;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  if ((gram - eye).cwiseAbs().maxCoeff() > 1e-8) {
    throw Error(ErrorCode::InvalidInput, "subspace basis is not orthonormal");
  }
}

Subspace orthonormal_span(const Eigen::MatrixXd& a) {
  require_finite(a, "span input");
  const Eigen::Index d = a.rows();
  const Eigen::Index k = a.cols();
  if (k == 0 || k > d) throw Error(ErrorCode::RankDeficient, "column count must be in [1, rows]");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const double col_scale = a.colwise().norm().maxCoeff();
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(std::abs(r(j, j)) > 1e-10 * col_scale)) {
      throw Error(ErrorCode::RankDeficient, "columns are linearly dependent");
    }
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return Subspace(std::move(q));
}

Eigen::VectorXd principal_angles(const Subspace& s1, const Subspace& s2) {
  if (s1.ambient_dim() != s2.ambient_dim() || s1.dim() != s2.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "subspaces differ in ambient or subspace dimension");
  }
  const Eigen::Index k = s1.dim();
  const Eigen::MatrixXd cross = s1.basis().transpose() * s2.basis();
  Eigen::JacobiSVD<Eigen::MatrixXd> cos_svd(cross);
  // Cosines lose resolution for small angles, so those are read off the sines
  // of the residual s2 - P1 s2 instead.
  const Eigen::MatrixXd residual = s2.basis() - s1.basis() * cross;
  Eigen::JacobiSVD<Eigen::MatrixXd> sin_svd(residual);
  const Eigen::VectorXd cosines = cos_svd.singularValues();  // descending
  const Eigen::VectorXd sines = sin_svd.singularValues();    // descending
  Eigen::VectorXd theta(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double c = std::clamp(cosines(i), 0.0, 1.0);
    if (c * c < 0.5) {
      theta(i) = std::acos(c);
    } else {
      const double s = std::clamp(sines(k - 1 - i), 0.0, 1.0);
      theta(i) = std::asin(s);
    }
  }
  std::sort(theta.data(), theta.data() + k);
  return theta;
}

double grassmann_distance(const Subspace& s1, const Subspace& s2) { return principal_angles(s1, s2).norm(); }

}  // namespace wcv
