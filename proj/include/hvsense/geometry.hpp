// SPDX-License-Identifier: Apache-2.0
//
// Scene representation and the exact single-bounce forward model.
//
// Frame: the sensing vehicle (SV) array sits at the origin with its heading
// along +X. Angles of arrival are measured counterclockwise from the SV
// heading, angles of departure counterclockwise from the hidden vehicle (HV)
// heading; both are wrapped to [0, 2*pi).
#pragma once

#include <chrono>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hvsense/errors.hpp"

namespace hvsense {

using Vec2 = Eigen::Vector2d;

inline constexpr double kSpeedOfLight = 299'792'458.0;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Time of arrival in integer attoseconds. Differences of ToAs are exact, so
/// anything that depends only on TDoAs is bit-identical under a common shift.
using Toa = std::chrono::duration<std::int64_t, std::atto>;

Toa toa_from_seconds(double seconds);
double to_seconds(Toa t);

/// Wraps an angle to [0, 2*pi).
double wrap_angle(double radians);

/// Signed angular difference a - b wrapped to [-pi, pi).
double angle_difference(double a, double b);

enum class Cluster : std::uint8_t { single = 0, k1 = 1, k2 = 2, k3 = 3, k4 = 4 };

/// 1..4 for the rectangle clusters, 0 for the colocated array.
int cluster_index(Cluster c);
Cluster cluster_from_index(int index);

struct Pose {
  Pose() = default;
  Pose(Vec2 position, double heading);

  Vec2 position = Vec2::Zero();
  double heading = 0.0;
};

/// Displacement from cluster k to the reference cluster (k=1) of an L x W
/// rectangle rotated by omega:
///   k=1 -> (0, 0)
///   k=2 -> (L cos w, L sin w)
///   k=3 -> (L cos w - W sin w, L sin w + W cos w)
///   k=4 -> (-W sin w, W cos w)
/// so vertex_k = vertex_1 - cluster_offset(w, L, W, k).
Vec2 cluster_offset(double omega, double length, double width, Cluster k);

class ClusterLayout {
public:
  /// Colocated array: every cluster label maps to the HV position.
  static ClusterLayout single();
  /// Four-cluster rectangle; length and width must be positive.
  static ClusterLayout rectangle(double length, double width);

  bool is_single() const { return single_; }
  double length() const { return length_; }
  double width() const { return width_; }

  /// Global position of cluster k when the reference vertex sits at `pose`.
  Vec2 vertex(const Pose& pose, Cluster k) const;

private:
  ClusterLayout(bool single, double length, double width)
      : single_(single), length_(length), width_(width) {}

  bool single_ = true;
  double length_ = 0.0;
  double width_ = 0.0;
};

struct Scatterer {
  Vec2 position;
  Cluster cluster = Cluster::single;  // the cluster whose signal it reflects
};

struct Scene {
  Pose hv_pose;  // position of the reference vertex (cluster 1) and heading
  ClusterLayout layout = ClusterLayout::single();
  std::vector<Scatterer> scatterers;
  Toa clock_gap{0};
  double c = kSpeedOfLight;

  std::vector<Vec2> vertices() const;  // four cluster positions (all equal if single)
};

struct PathObservation {
  double aoa = 0.0;  // theta
  double aod = 0.0;  // phi
  Toa toa{0};        // lambda, includes the clock gap
  Cluster cluster = Cluster::single;
};

struct PathGeometry {
  double nu = 0.0;  // SV-to-scatterer distance
  double d = 0.0;   // total path length
  Vec2 origin = Vec2::Zero();
};

struct ObservedPath {
  PathObservation observation;
  PathGeometry geometry;
};

/// Exact single-bounce observations, one per scatterer, in scatterer order.
/// Throws SensingError(degenerate_geometry) when a scatterer coincides with the
/// SV origin or with the cluster it reflects.
std::vector<ObservedPath> forward_observe(const Scene& scene);

std::vector<PathObservation> observations_of(std::span<const ObservedPath> paths);

/// TDoAs against the first entry: rho[0] = 0, rho[p] = lambda[p] - lambda[0].
std::vector<Toa> tdoa(std::span<const Toa> toas);
std::vector<Toa> tdoa(std::span<const PathObservation> observations);

/// HV-side endpoint of a path given its SV-side leg nu, total length d and the
/// HV heading omega:  nu*u(theta) - (d - nu)*u(phi + omega).
Vec2 path_origin(const PathObservation& obs, double nu, double d, double omega);

}  // namespace hvsense
