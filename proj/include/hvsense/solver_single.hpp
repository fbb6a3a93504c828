// SPDX-License-Identifier: Apache-2.0
//
// Position and heading of a hidden vehicle with a colocated (1-cluster) array
// from at least four single-bounce paths.
//
// For a candidate heading w every path p = 2..P must start where path 1 starts.
// With d_p = d_1 + c*rho_p this is linear in z = (nu_1..nu_P, d_1):
//
//   a_1 nu_1 - a_p nu_p + (cos(phi_p+w) - cos(phi_1+w)) d_1 = -c rho_p cos(phi_p+w)
//   a_p = cos(theta_p) + cos(phi_p+w)
//
// plus the same row with sin. The true heading is where B lies in the column
// space of A, i.e. where the projection of B onto the left null space of A
// vanishes.
#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "hvsense/geometry.hpp"
#include "hvsense/linalg.hpp"
#include "hvsense/orientation_search.hpp"

namespace hvsense::single {

inline constexpr std::size_t kMinPaths = 4;

struct LinearSystem {
  Eigen::MatrixXd a;  // 2(P-1) x (P+1): cos rows p=2..P, then sin rows
  Eigen::VectorXd b;  // 2(P-1)
  double omega = 0.0;
};

struct Options {
  SearchOptions search;
  double c = kSpeedOfLight;
  double rank_tol = linalg::kRankTolerance;
};

struct SingleEstimate {
  double omega = 0.0;
  Vec2 position = Vec2::Zero();
  Eigen::VectorXd z;  // nu_1..nu_P, d_1
  double residual = 0.0;
  std::vector<Vec2> per_path_origins;
  bool ambiguous = false;
  bool nonphysical = false;  // some nu_p <= 0, d_1 <= 0 or d_p < nu_p
};

/// Throws SensingError(insufficient_paths) for fewer than two observations.
LinearSystem assemble(std::span<const PathObservation> obs, double omega,
                      double c = kSpeedOfLight);

/// ||N^T B(w)||, N the left null space of A(w).
double orientation_residual(std::span<const PathObservation> obs, double omega,
                            const Options& options = {});

OrientationResult search_orientation(std::span<const PathObservation> obs,
                                     const Options& options = {});

Eigen::VectorXd solve_distances(std::span<const PathObservation> obs, double omega,
                                const Options& options = {});

SingleEstimate sense(std::span<const PathObservation> obs, const Options& options = {});

/// Path lengths d_p = d_1 + c*rho_p implied by a solved z.
std::vector<double> path_lengths(std::span<const PathObservation> obs, const Eigen::VectorXd& z,
                                 double c);

/// True when every nu_p > 0 and 0 < nu_p < d_p.
bool distances_physical(std::span<const PathObservation> obs, const Eigen::VectorXd& z,
                        double c);

/// Throws SensingError(infeasible) when fewer than `required` paths are given.
void require_paths(std::size_t have, std::size_t required, const char* why);

}  // namespace hvsense::single
