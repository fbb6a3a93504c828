// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo sweeps over path count or SV-HV distance, configured from JSON.
//
// Config schema (every key optional; see README for defaults):
//   sweep:       {variable: "P" | "distance", values: [numbers]}
//   trials:      trials per (scenario, sweep value), >= 1
//   scenarios:   list of "highway" | "rural" | profile objects (see profile_from_json)
//   mode:        "single" | "multi"
//   pipeline:    "geometric" | "full-signal"
//   base_seed:   unsigned integer
//   output:      output directory
//   distance_m:  SV-HV distance when sweeping P
//   paths:       target P when sweeping distance (null keeps every usable path)
//   noiseless:   bool
//   tx_power_dbm, layout {length_m, width_m},
//   radio {carrier_hz, bandwidth_hz, rx_antennas, tx_antennas, waveform_length},
//   solver {grid_step_deg, refine_tol, ambiguity_ratio, zero_residual, residual_floor}
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hvsense/channel_sim.hpp"

namespace hvsense::exp {

enum class SweepVariable { paths, distance };

struct ExperimentConfig {
  SweepVariable sweep = SweepVariable::paths;
  std::vector<double> values{4, 5, 6, 7, 8, 9, 10};
  std::size_t trials = 100;
  std::vector<sim::ScenarioProfile> scenarios{sim::ScenarioProfile::highway(),
                                              sim::ScenarioProfile::rural()};
  sim::Mode mode = sim::Mode::single;
  sim::Pipeline pipeline = sim::Pipeline::geometric;
  std::uint64_t base_seed = 1;
  std::string output = "results";
  double distance = 50.0;
  std::optional<std::size_t> paths;
  bool noiseless = false;
  double tx_power_dbm = 23.0;  // applied to every scenario
  double length = 3.0;
  double width = 6.0;
  sim::RadioConfig radio;
  SearchOptions search;
};

struct ConfigResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  // each names its key path
};

/// Parses JSON text; empty or whitespace-only text yields all defaults.
/// Collects every unknown-key, type and range error instead of stopping at
/// the first.
ConfigResult validate_config(std::string_view text);

/// validate_config, throwing SensingError(configuration) listing all errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Effective configuration with scenario profiles fully expanded;
/// validate_config(config_to_json(c).dump()) reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Trial options for one sweep point.
sim::TrialOptions trial_options(const ExperimentConfig& config, double sweep_value);

/// Trial i of every sweep point uses seed base_seed + i, so points share
/// scene draws wherever their redraw conditions agree.
std::uint64_t trial_seed(const ExperimentConfig& config, std::size_t trial);

struct PointSummary {
  std::string scenario;
  double value = 0.0;
  std::size_t trials = 0;
  std::size_t failed = 0;
  double mean_paths = 0.0;  // over non-failed trials
  // Over non-failed trials; NaN when every trial failed.
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
  double std_error = 0.0;
  std::string top_failure;  // most frequent failure reason

  double failure_rate() const { return trials ? static_cast<double>(failed) / trials : 0.0; }
};

PointSummary summarize(std::string scenario, double value, const std::vector<sim::TrialResult>& trials);

/// Welch statistic (mean_a - mean_b) / sqrt(se_a^2 + se_b^2).
double welch_z(const PointSummary& a, const PointSummary& b);

struct ExperimentResult {
  ExperimentConfig config;
  // Indexed [scenario][sweep value][trial], in config order.
  std::vector<std::vector<std::vector<sim::TrialResult>>> trials;
  std::vector<std::vector<PointSummary>> summary;
};

struct RunOptions {
  unsigned threads = 1;
  // Called after each finished trial with (done, total); serialized.
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Runs every trial. Results do not depend on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

std::string trials_csv(const ExperimentResult& result);
std::string summary_csv(const ExperimentResult& result);
/// Fixed-width table plus per-scenario trend flags.
std::string summary_text(const ExperimentResult& result);

/// Creates the output directory and checks it is writable; throws
/// SensingError(io) otherwise. Called before any trial runs.
void prepare_output(const std::string& directory);

/// Writes trials.csv, summary.csv, summary.txt and config.json.
void write_outputs(const ExperimentResult& result, const std::string& directory);

}  // namespace hvsense::exp
