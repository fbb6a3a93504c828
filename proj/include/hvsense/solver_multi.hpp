// SPDX-License-Identifier: Apache-2.0
//
// Four-cluster sensing: vertices, length/width and heading of a hidden vehicle
// whose clusters sit on an L x W rectangle, from at least six labeled paths.
//
// Paths from cluster k start at vertex_1 - offset_k(w, L, W), so relative to
// the single-cluster system each row gains -offset terms that are linear in L
// and W. They become two extra columns of the system matrix:
//   L column: -cos w (cos rows), -sin w (sin rows) for clusters 2 and 3
//   W column: +sin w (cos rows), -cos w (sin rows) for clusters 3 and 4
#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hvsense/geometry.hpp"
#include "hvsense/linalg.hpp"
#include "hvsense/orientation_search.hpp"

namespace hvsense::multi {

inline constexpr std::size_t kMinPaths = 6;

struct Offsets {
  double eta = 0.0;   // x displacement from cluster k to cluster 1
  double zeta = 0.0;  // y displacement
};

Offsets offsets(double omega, double length, double width, Cluster k);

struct Dimensions {
  double length = 0.0;
  double width = 0.0;
};

struct MultiLinearSystem {
  Eigen::MatrixXd a_hat;  // 2(P-1) x (P+3): [A | L | W]
  Eigen::VectorXd b;
  double omega = 0.0;
  std::array<std::size_t, 4> partition{};  // paths per cluster 1..4
  Cluster anchor = Cluster::k1;            // cluster of the reference path
  // System row/column order: order[i] is the input index of the i-th path.
  std::vector<std::size_t> order;
};

struct Options {
  SearchOptions search;
  double c = kSpeedOfLight;
  double rank_tol = linalg::kRankTolerance;
  // Fleet-standard dimensions: L and W move to the right-hand side and only
  // four paths are needed.
  std::optional<Dimensions> known_dimensions;
};

struct MultiEstimate {
  double omega = 0.0;
  std::array<Vec2, 4> vertices{};  // clusters 1..4
  Vec2 centroid = Vec2::Zero();
  double length = 0.0;
  double width = 0.0;
  Eigen::VectorXd z_hat;  // nu (system order), d_1, L, W
  std::vector<std::size_t> order;
  double residual = 0.0;
  bool ambiguous = false;
  bool nonphysical = false;
  // L* or W* came out negative: the labels do not match the assumed layout.
  bool reflected_layout = false;
};

/// Paths are grouped by cluster; the reference is the first path of the
/// lowest-index populated cluster, which need not be cluster 1.
MultiLinearSystem assemble_multi(std::span<const PathObservation> obs, double omega,
                                 double c = kSpeedOfLight);

double orientation_residual_multi(std::span<const PathObservation> obs, double omega,
                                  const Options& options = {});

/// Throws infeasible (P < 6, or P < 4 with known dimensions) and
/// unobservable_dimension (no path that separates L or W from the anchor).
OrientationResult search_orientation_multi(std::span<const PathObservation> obs,
                                           const Options& options = {});

MultiEstimate sense_multi(std::span<const PathObservation> obs, const Options& options = {});

}  // namespace hvsense::multi
