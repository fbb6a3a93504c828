// SPDX-License-Identifier: Apache-2.0
#include "hvsense/scene_io.hpp"

#include <fstream>
#include <string>

namespace hvsense::io {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw SensingError(ErrorKind::configuration, path + ": " + what);
}

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) bad(path + "." + key, "missing");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

Vec2 point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    bad(path, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Cluster cluster(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer cluster label 0..4");
  try {
    return cluster_from_index(j.get<int>());
  } catch (const SensingError& e) {
    bad(path, e.what());
  }
}

}  // namespace

json scene_to_json(const Scene& scene) {
  json j;
  j["hv_pose"] = {{"position", {scene.hv_pose.position.x(), scene.hv_pose.position.y()}},
                  {"heading", scene.hv_pose.heading}};
  if (scene.layout.is_single())
    j["layout"] = {{"type", "single"}};
  else
    j["layout"] = {{"type", "rectangle"},
                   {"length", scene.layout.length()},
                   {"width", scene.layout.width()}};
  j["scatterers"] = json::array();
  for (const auto& s : scene.scatterers)
    j["scatterers"].push_back(
        {{"position", {s.position.x(), s.position.y()}}, {"cluster", cluster_index(s.cluster)}});
  j["gamma_as"] = scene.clock_gap.count();
  j["c"] = scene.c;
  return j;
}

Scene scene_from_json(const json& j) {
  Scene scene;
  const json& pose = field(j, "hv_pose", "scene");
  scene.hv_pose = Pose(point(field(pose, "position", "scene.hv_pose"), "scene.hv_pose.position"),
                       number(field(pose, "heading", "scene.hv_pose"), "scene.hv_pose.heading"));

  const json& layout = field(j, "layout", "scene");
  const json& type = field(layout, "type", "scene.layout");
  if (type == "single") {
    scene.layout = ClusterLayout::single();
  } else if (type == "rectangle") {
    try {
      scene.layout = ClusterLayout::rectangle(
          number(field(layout, "length", "scene.layout"), "scene.layout.length"),
          number(field(layout, "width", "scene.layout"), "scene.layout.width"));
    } catch (const SensingError& e) {
      bad("scene.layout", e.what());
    }
  } else {
    bad("scene.layout.type", "expected \"single\" or \"rectangle\"");
  }

  const json& scatterers = field(j, "scatterers", "scene");
  if (!scatterers.is_array()) bad("scene.scatterers", "expected an array");
  for (std::size_t i = 0; i < scatterers.size(); ++i) {
    const std::string path = "scene.scatterers[" + std::to_string(i) + "]";
    Scatterer s;
    s.position = point(field(scatterers[i], "position", path), path + ".position");
    s.cluster = scatterers[i].contains("cluster")
                    ? cluster(scatterers[i]["cluster"], path + ".cluster")
                    : Cluster::single;
    scene.scatterers.push_back(s);
  }

  if (j.contains("gamma_as")) {
    if (!j["gamma_as"].is_number_integer()) bad("scene.gamma_as", "expected an integer");
    scene.clock_gap = Toa{j["gamma_as"].get<std::int64_t>()};
  } else if (j.contains("gamma")) {
    scene.clock_gap = toa_from_seconds(number(j["gamma"], "scene.gamma"));
  }
  if (j.contains("c")) scene.c = number(j["c"], "scene.c");
  if (!(scene.c > 0.0)) bad("scene.c", "must be positive");
  return scene;
}

json observations_to_json(const ObservationSet& set) {
  json j;
  j["c"] = set.c;
  j["observations"] = json::array();
  for (const auto& o : set.observations)
    j["observations"].push_back({{"aoa", o.aoa},
                                 {"aod", o.aod},
                                 {"toa_as", o.toa.count()},
                                 {"cluster", cluster_index(o.cluster)}});
  return j;
}

ObservationSet observations_from_json(const json& j) {
  ObservationSet set;
  if (j.contains("c")) set.c = number(j["c"], "observations.c");
  const json& list = field(j, "observations", "observations");
  if (!list.is_array()) bad("observations.observations", "expected an array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "observations[" + std::to_string(i) + "]";
    PathObservation o;
    o.aoa = wrap_angle(number(field(list[i], "aoa", path), path + ".aoa"));
    o.aod = wrap_angle(number(field(list[i], "aod", path), path + ".aod"));
    if (list[i].contains("toa_as")) {
      if (!list[i]["toa_as"].is_number_integer()) bad(path + ".toa_as", "expected an integer");
      o.toa = Toa{list[i]["toa_as"].get<std::int64_t>()};
    } else {
      o.toa = toa_from_seconds(number(field(list[i], "toa", path), path + ".toa"));
    }
    o.cluster = list[i].contains("cluster") ? cluster(list[i]["cluster"], path + ".cluster")
                                            : Cluster::single;
    set.observations.push_back(o);
  }
  return set;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SensingError(ErrorKind::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SensingError(ErrorKind::configuration, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw SensingError(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace hvsense::io
