// SPDX-License-Identifier: Apache-2.0
#include "hvsense/geometry.hpp"

#include <cmath>
#include <string>

namespace hvsense {

namespace {

// Closer than this a scatterer is treated as sitting on an antenna.
constexpr double kCoincidenceTolerance = 1e-9;

Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

}  // namespace

Toa toa_from_seconds(double seconds) {
  return Toa{static_cast<std::int64_t>(std::llround(seconds * 1e18))};
}

double to_seconds(Toa t) { return static_cast<double>(t.count()) * 1e-18; }

double wrap_angle(double radians) {
  double w = std::fmod(radians, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2*pi
  if (w >= kTwoPi) w = 0.0;
  return w;
}

double angle_difference(double a, double b) {
  double d = wrap_angle(a - b);
  if (d >= std::numbers::pi) d -= kTwoPi;
  return d;
}

int cluster_index(Cluster c) { return static_cast<int>(c); }

Cluster cluster_from_index(int index) {
  if (index < 0 || index > 4)
    throw SensingError(ErrorKind::configuration,
                       "cluster label must be 0 (single) or 1..4, got " + std::to_string(index));
  return static_cast<Cluster>(index);
}

Pose::Pose(Vec2 position_, double heading_) : position(position_), heading(wrap_angle(heading_)) {
  if (!position.allFinite() || !std::isfinite(heading_))
    throw SensingError(ErrorKind::configuration, "pose must be finite");
}

Vec2 cluster_offset(double omega, double length, double width, Cluster k) {
  const double c = std::cos(omega);
  const double s = std::sin(omega);
  switch (k) {
    case Cluster::single:
    case Cluster::k1: return {0.0, 0.0};
    case Cluster::k2: return {length * c, length * s};
    case Cluster::k3: return {length * c - width * s, length * s + width * c};
    case Cluster::k4: return {-width * s, width * c};
  }
  return {0.0, 0.0};
}

ClusterLayout ClusterLayout::single() { return ClusterLayout(true, 0.0, 0.0); }

ClusterLayout ClusterLayout::rectangle(double length, double width) {
  if (!(length > 0.0) || !(width > 0.0) || !std::isfinite(length) || !std::isfinite(width))
    throw SensingError(ErrorKind::configuration, "cluster rectangle needs positive length and width");
  return ClusterLayout(false, length, width);
}

Vec2 ClusterLayout::vertex(const Pose& pose, Cluster k) const {
  if (single_) return pose.position;
  if (k == Cluster::single)
    throw SensingError(ErrorKind::configuration, "four-cluster layout needs a cluster label 1..4");
  return pose.position - cluster_offset(pose.heading, length_, width_, k);
}

std::vector<Vec2> Scene::vertices() const {
  std::vector<Vec2> out;
  for (int k = 1; k <= 4; ++k) out.push_back(layout.vertex(hv_pose, cluster_from_index(k)));
  return out;
}

std::vector<ObservedPath> forward_observe(const Scene& scene) {
  std::vector<ObservedPath> out;
  out.reserve(scene.scatterers.size());
  const double omega = scene.hv_pose.heading;
  for (std::size_t i = 0; i < scene.scatterers.size(); ++i) {
    const Scatterer& s = scene.scatterers[i];
    const Vec2 q = scene.layout.vertex(scene.hv_pose, s.cluster);
    const Vec2 leg = s.position - q;
    const double nu = s.position.norm();
    const double tail = leg.norm();
    if (nu < kCoincidenceTolerance || tail < kCoincidenceTolerance)
      throw SensingError(ErrorKind::degenerate_geometry,
                         "scatterer " + std::to_string(i) + " coincides with an antenna");

    ObservedPath path;
    path.geometry.nu = nu;
    path.geometry.d = nu + tail;
    path.geometry.origin = q;
    path.observation.aoa = wrap_angle(std::atan2(s.position.y(), s.position.x()));
    // The departure direction points from the cluster towards the scatterer.
    path.observation.aod = wrap_angle(std::atan2(leg.y(), leg.x()) - omega);
    path.observation.toa = toa_from_seconds(path.geometry.d / scene.c) + scene.clock_gap;
    path.observation.cluster = s.cluster;
    out.push_back(path);
  }
  return out;
}

std::vector<PathObservation> observations_of(std::span<const ObservedPath> paths) {
  std::vector<PathObservation> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(p.observation);
  return out;
}

std::vector<Toa> tdoa(std::span<const Toa> toas) {
  std::vector<Toa> rho;
  rho.reserve(toas.size());
  for (const Toa t : toas) rho.push_back(t - toas.front());
  return rho;
}

std::vector<Toa> tdoa(std::span<const PathObservation> observations) {
  std::vector<Toa> toas;
  toas.reserve(observations.size());
  for (const auto& o : observations) toas.push_back(o.toa);
  return tdoa(toas);
}

Vec2 path_origin(const PathObservation& obs, double nu, double d, double omega) {
  return nu * unit(obs.aoa) - (d - nu) * unit(obs.aod + omega);
}

}  // namespace hvsense
