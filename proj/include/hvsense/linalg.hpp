// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace hvsense::linalg {

/// Singular values below this fraction of the largest one count as zero.
inline constexpr double kRankTolerance = 1e-9;

/// Orthonormal basis of the left null space of `a` (columns span {x : a^T x = 0}).
Eigen::MatrixXd left_null_space(const Eigen::MatrixXd& a, double rel_tol = kRankTolerance);

/// ||N^T b|| with N = left_null_space(a). Throws SensingError(empty_null_space)
/// when `a` has no left null space.
double null_space_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           double rel_tol = kRankTolerance);

/// Least-squares solution of a z = b. Throws SensingError(rank_deficient) when
/// `a` does not have full column rank.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                              double rel_tol = kRankTolerance);

}  // namespace hvsense::linalg
