#pragma once

// Symmetric-matrix kernels and subspace geometry.

#include <Eigen/Dense>

namespace wcv {

/// Dense symmetric matrix. The input is symmetrized ((M + M^t) / 2) on
/// construction; non-finite or non-square input is rejected.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Eigen::MatrixXd& m);

  static SymMatrix zero(Eigen::Index dim);
  static SymMatrix identity(Eigen::Index dim);

  Eigen::Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }
  bool is_zero() const { return m_.isZero(0.0); }

 private:
  Eigen::MatrixXd m_;
};

struct SymEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns, first nonzero entry of each positive
};

SymEigen sym_eig(const SymMatrix& m);

/// Eigenvalues only, descending.
Eigen::VectorXd sym_eigenvalues(const SymMatrix& m);

/// Principal square root. Eigenvalues up to 1e-14 * max|lambda| (roundoff)
/// and down to -1e-10 * max|lambda| are treated as zero; anything lower
/// throws NotPositiveSemidefinite.
SymMatrix psd_sqrt(const SymMatrix& m);

/// (m + ridge * I)^(-1/2). Throws SingularMatrix unless
/// lambda_min > 1e-12 * lambda_max after the ridge is added.
SymMatrix psd_inv_sqrt(const SymMatrix& m, double ridge);

/// Ridge applied to an ill-conditioned within-class scatter before inversion:
/// 1e-8 * trace / dim when lambda_min / lambda_max < 1e-10, else 0.
double auto_ridge(const SymMatrix& m);

bool is_numerically_psd(const SymMatrix& m, double rel_tol = 1e-10);

/// A d'-dimensional linear subspace of R^d held by an orthonormal basis.
class Subspace {
 public:
  // Throws InvalidInput when basis^t basis deviates from I by more than 1e-8.
  explicit Subspace(Eigen::MatrixXd basis);

  Eigen::Index ambient_dim() const { return basis_.rows(); }
  Eigen::Index dim() const { return basis_.cols(); }
  const Eigen::MatrixXd& basis() const { return basis_; }

 private:
  Eigen::MatrixXd basis_;
};

/// Orthonormal basis of the column span of a (Householder QR, signs chosen so
/// R has a positive diagonal). Throws RankDeficient below rank d'.
Subspace orthonormal_span(const Eigen::MatrixXd& a);

/// Principal angles between two equal-dimension subspaces, ascending.
Eigen::VectorXd principal_angles(const Subspace& s1, const Subspace& s2);

/// Geodesic Grassmann distance: 2-norm of the principal angles.
double grassmann_distance(const Subspace& s1, const Subspace& s2);

}  // namespace wcv
