// SPDX-License-Identifier: Apache-2.0
//
// Test-only generators of random ground-truth scenes. Observations produced
// from these through forward_observe are the oracle for every solver test.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "hvsense/geometry.hpp"

namespace hvsense::testing {

struct OracleSceneSpec {
  std::size_t paths = 6;
  double distance = 50.0;
  bool four_cluster = false;
  double length = 3.0;
  double width = 6.0;
  double road_half_width = 25.0;
  double gamma_seconds = 0.0;
  // four_cluster only: every cluster gets at least this many paths
  std::size_t min_per_cluster = 0;
};

inline Scene random_oracle_scene(std::mt19937_64& rng, const OracleSceneSpec& spec) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scene scene;
  const double bearing = (unit(rng) - 0.5) * 0.6;
  scene.hv_pose = Pose(spec.distance * Vec2(std::cos(bearing), std::sin(bearing)), kTwoPi * unit(rng));
  scene.layout = spec.four_cluster ? ClusterLayout::rectangle(spec.length, spec.width)
                                   : ClusterLayout::single();
  scene.clock_gap = toa_from_seconds(spec.gamma_seconds);

  const std::vector<Vec2> vertices = scene.vertices();
  for (std::size_t i = 0; i < spec.paths; ++i) {
    Scatterer s;
    if (spec.four_cluster) {
      const std::size_t forced = spec.min_per_cluster * 4;
      const int k = i < forced ? static_cast<int>(i % 4) + 1
                               : std::uniform_int_distribution<int>(1, 4)(rng);
      s.cluster = cluster_from_index(k);
    }
    // Keep scatterers a few meters away from both vehicles.
    const Vec2 q = vertices[static_cast<std::size_t>(std::max(cluster_index(s.cluster), 1) - 1)];
    do {
      s.position = Vec2(-15.0 + (spec.distance + 30.0) * unit(rng),
                        spec.road_half_width * (2.0 * unit(rng) - 1.0));
    } while (s.position.norm() < 3.0 || (s.position - q).norm() < 3.0);
    scene.scatterers.push_back(s);
  }
  return scene;
}

}  // namespace hvsense::testing
