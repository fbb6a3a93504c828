// SPDX-License-Identifier: Apache-2.0
//
// hvsense: Monte Carlo sweeps, config validation, one-shot sensing and noise
// calibration. Exit codes: 0 success, 2 configuration error, 3 runtime failure.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "hvsense/experiment.hpp"
#include "hvsense/scene_io.hpp"
#include "hvsense/solver_multi.hpp"
#include "hvsense/solver_single.hpp"

using namespace hvsense;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int fail(const SensingError& e) {
  std::cerr << "error: " << e.what() << "\n";
  return e.kind() == ErrorKind::configuration ? kConfigError : kRuntimeError;
}

std::string read_text(const std::string& path) {
  if (path.empty()) return {};
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw SensingError(ErrorKind::io, "cannot open config " + path);
  std::string text;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, f)) > 0;) text.append(buf, n);
  std::fclose(f);
  return text;
}

json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }

int run(const std::string& config_path, const std::string& out_dir, unsigned jobs, int verbosity) {
  exp::ExperimentConfig config;
  {
    const auto r = exp::validate_config(read_text(config_path));
    if (!r.config) {
      std::cerr << "invalid config" << (config_path.empty() ? "" : " " + config_path) << ":\n";
      for (const auto& e : r.errors) std::cerr << "  " << e << "\n";
      return kConfigError;
    }
    config = *r.config;
  }
  if (!out_dir.empty()) config.output = out_dir;
  exp::prepare_output(config.output);

  exp::RunOptions options;
  options.threads = jobs ? jobs : std::max(1u, std::thread::hardware_concurrency());
  std::size_t last_percent = 101;
  if (verbosity > 0)
    options.progress = [&](std::size_t done, std::size_t total) {
      const std::size_t percent = 100 * done / total;
      if (percent != last_percent && (percent % 10 == 0 || verbosity > 1)) {
        std::cerr << "\r" << done << "/" << total << " trials" << (done == total ? "\n" : "") << std::flush;
        last_percent = percent;
      }
    };
  const auto result = exp::run_experiment(config, options);
  exp::write_outputs(result, config.output);
  if (verbosity >= 0) std::cout << exp::summary_text(result) << "\nwrote " << config.output << "/\n";
  return 0;
}

int validate(const std::string& config_path) {
  const auto r = exp::validate_config(read_text(config_path));
  if (!r.config) {
    for (const auto& e : r.errors) std::cerr << e << "\n";
    return kConfigError;
  }
  std::cout << exp::config_to_json(*r.config).dump(2) << "\n";
  return 0;
}

int sense(const std::string& path, const std::string& mode) {
  const json input = io::read_json(path);
  io::ObservationSet set;
  std::optional<Scene> scene;
  if (input.contains("observations")) {
    set = io::observations_from_json(input);
  } else {
    scene = io::scene_from_json(input);
    set.c = scene->c;
    const auto paths = forward_observe(*scene);
    set.observations = observations_of(paths);
  }
  bool multi = mode == "multi";
  if (mode == "auto")
    for (const auto& o : set.observations) multi = multi || cluster_index(o.cluster) > 0;

  json out = {{"paths", set.observations.size()}, {"mode", multi ? "multi" : "single"}};
  if (multi) {
    multi::Options opt;
    opt.c = set.c;
    const auto est = multi::sense_multi(set.observations, opt);
    out["omega"] = est.omega;
    out["vertices"] = json::array();
    for (const auto& v : est.vertices) out["vertices"].push_back(vec(v));
    out["centroid"] = vec(est.centroid);
    out["length"] = est.length;
    out["width"] = est.width;
    out["residual"] = est.residual;
    out["ambiguous"] = est.ambiguous;
    out["nonphysical"] = est.nonphysical;
  } else {
    single::Options opt;
    opt.c = set.c;
    const auto est = single::sense(set.observations, opt);
    out["omega"] = est.omega;
    out["position"] = vec(est.position);
    out["residual"] = est.residual;
    out["ambiguous"] = est.ambiguous;
    out["nonphysical"] = est.nonphysical;
  }
  if (scene) {
    out["truth"] = {{"omega", scene->hv_pose.heading}, {"vertices", json::array()}};
    for (const auto& v : scene->vertices()) out["truth"]["vertices"].push_back(vec(v));
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int calibrate(const std::string& scenario, double distance, std::size_t trials, std::uint64_t seed) {
  const auto profile = sim::ScenarioProfile::named(scenario);
  const auto cal = sim::calibrate_noise(profile, sim::RadioConfig{}, distance, trials, seed);
  json bins = json::array();
  for (const auto& b : cal.bins)
    bins.push_back({{"sinr_lo_db", b.sinr_lo_db}, {"paths", b.paths}, {"detected", b.detected},
                    {"rms_angle_deg", b.rms_angle_deg}});
  const json out = {{"noise",
                     {{"angle_floor_deg", cal.noise.angle_floor_deg},
                      {"angle_deg_at_0db", cal.noise.angle_deg_at_0db},
                      {"toa_sigma_s", cal.noise.toa_sigma_s},
                      {"detection_sinr_db", cal.noise.detection_sinr_db}}},
                    {"paths", cal.paths},
                    {"matched", cal.matched},
                    {"spurious", cal.spurious},
                    {"bins", bins}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden-vehicle sensing from multipath: experiments and tools"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  unsigned jobs = 1;
  int verbose = 0;
  bool quiet = false;
  auto* run_cmd = app.add_subcommand("run", "Run a Monte Carlo sweep and write CSV outputs");
  run_cmd->add_option("config", config_path, "Experiment config (JSON); omitted means all defaults")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--output", out_dir, "Output directory (overrides the config's output)");
  run_cmd->add_option("-j,--jobs", jobs, "Worker threads (0 = hardware concurrency)");
  run_cmd->add_flag("-v,--verbose", verbose, "Report progress on stderr (repeat for more)");
  run_cmd->add_flag("-q,--quiet", quiet, "Do not print the summary");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config and print the effective values");
  validate_cmd->add_option("config", validate_path, "Experiment config (JSON)")->check(CLI::ExistingFile);

  std::string sense_path, sense_mode = "auto";
  auto* sense_cmd = app.add_subcommand("sense", "Estimate the hidden vehicle from a scene or observation file");
  sense_cmd->add_option("file", sense_path, "Scene or observations JSON")->required()->check(CLI::ExistingFile);
  sense_cmd->add_option("--mode", sense_mode, "single, multi or auto (from cluster labels)")
      ->check(CLI::IsMember({"auto", "single", "multi"}));

  std::string scenario = "highway";
  double distance = 50.0;
  std::size_t trials = 100;
  std::uint64_t seed = 7;
  auto* cal_cmd = app.add_subcommand("calibrate", "Fit the geometric noise model to full-signal estimates");
  cal_cmd->add_option("--scenario", scenario, "highway or rural")->check(CLI::IsMember({"highway", "rural"}));
  cal_cmd->add_option("--distance", distance, "SV-HV distance, meters")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--trials", trials, "Scenes to synthesize")->check(CLI::Range(1, 100000));
  cal_cmd->add_option("--seed", seed, "Base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) return run(config_path, out_dir, jobs, quiet ? -1 : verbose);
    if (*validate_cmd) return validate(validate_path);
    if (*sense_cmd) return sense(sense_path, sense_mode);
    if (*cal_cmd) return calibrate(scenario, distance, trials, seed);
  } catch (const SensingError& e) {
    return fail(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
