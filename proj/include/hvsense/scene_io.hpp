// SPDX-License-Identifier: Apache-2.0
//
// JSON fixtures for scenes and observation lists.
//
// Scene:
//   { "hv_pose":    { "position": [x, y], "heading": rad },
//     "layout":     { "type": "single" } | { "type": "rectangle", "length": L, "width": W },
//     "scatterers": [ { "position": [x, y], "cluster": 0..4 }, ... ],
//     "gamma": seconds,            (or "gamma_as": integer attoseconds)
//     "c": m/s }                   (optional, default speed of light)
//
// Observations:
//   { "c": m/s,
//     "observations": [ { "aoa": rad, "aod": rad, "toa_as": int, "cluster": 0..4 }, ... ] }
//   "toa" in seconds is accepted in place of "toa_as".
#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "hvsense/geometry.hpp"

namespace hvsense::io {

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

struct ObservationSet {
  double c = kSpeedOfLight;
  std::vector<PathObservation> observations;
};

nlohmann::json observations_to_json(const ObservationSet& set);
ObservationSet observations_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace hvsense::io
