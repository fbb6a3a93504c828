// SPDX-License-Identifier: Apache-2.0
#include "hvsense/linalg.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include "hvsense/errors.hpp"

namespace hvsense::linalg {

namespace {

Eigen::Index numerical_rank(const Eigen::VectorXd& singular_values, double rel_tol) {
  if (singular_values.size() == 0) return 0;
  const double cutoff = rel_tol * singular_values(0);
  Eigen::Index rank = 0;
  while (rank < singular_values.size() && singular_values(rank) > cutoff) ++rank;
  return rank;
}

}  // namespace

Eigen::MatrixXd left_null_space(const Eigen::MatrixXd& a, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU);
  const Eigen::Index rank = numerical_rank(svd.singularValues(), rel_tol);
  return svd.matrixU().rightCols(a.rows() - rank);
}

// The trailing m - rank columns of Q from a rank-revealing QR span the same
// left null space as the thresholded SVD and are an order of magnitude cheaper
// to get, which matters inside the orientation grid search.
double null_space_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double rel_tol) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(rel_tol);
  const Eigen::Index nullity = a.rows() - qr.rank();
  if (nullity <= 0)
    throw SensingError(ErrorKind::empty_null_space,
                       "system has no left null space; orientation is not testable");
  const Eigen::VectorXd qtb = qr.householderQ().adjoint() * b;
  return qtb.tail(nullity).norm();
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (numerical_rank(svd.singularValues(), rel_tol) < a.cols())
    throw SensingError(ErrorKind::rank_deficient,
                       "least-squares system is rank deficient (degenerate path geometry)");
  return svd.solve(b);
}

}  // namespace hvsense::linalg
