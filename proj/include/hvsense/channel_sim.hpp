// SPDX-License-Identifier: Apache-2.0
//
// Random highway/rural scenes and single Monte Carlo trials.
//
// Scatterers are a Poisson field over a road strip centered between the two
// vehicles; each (scatterer, cluster) pair is visible independently. Path
// power follows a log-distance law on the total path length plus a fixed
// reflection loss. The profile numbers are illustrative defaults, not
// measured channel parameters.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hvsense/geometry.hpp"
#include "hvsense/orientation_search.hpp"
#include "hvsense/signal.hpp"

namespace hvsense::sim {

/// Deterministic 64-bit stream splitting (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Estimator errors injected in geometric mode, driven by each path's
// per-coefficient SINR (see path_sinr_db). Angle error standard deviation is
// sqrt(floor^2 + (at_0db * 10^(-sinr/20))^2); paths below detection_sinr_db
// are not observed.
struct MeasurementNoise {
  double angle_floor_deg = 0.0;
  double angle_deg_at_0db = 0.0;
  double toa_sigma_s = 0.0;
  double detection_sinr_db = 0.0;

  double angle_sigma_rad(double sinr_db) const;
};

struct ScenarioProfile {
  std::string name = "custom";
  double scatterer_density = 0.004;  // per square meter
  double region_length = 120.0;      // along the SV-HV axis, centered on the midpoint
  double region_half_width = 20.0;
  double clearance = 2.0;            // minimum scatterer distance to either vehicle
  double visibility = 0.4;           // per (scatterer, cluster)
  double path_loss_exponent = 2.7;
  double reference_loss_db = 47.8;   // at 1 m
  double reflection_loss_db = 10.0;
  double noise_figure_db = 9.0;
  double tx_power_dbm = 23.0;        // per antenna
  MeasurementNoise noise;

  static ScenarioProfile highway();
  static ScenarioProfile rural();
  /// "highway" or "rural"; throws configuration otherwise.
  static ScenarioProfile named(std::string_view name);

  /// Throws SensingError(configuration) naming the first offending field.
  void validate() const;
};

nlohmann::json profile_to_json(const ScenarioProfile& profile);
/// Starts from the named built-in (key "base", default "highway") and applies
/// the remaining keys. Unknown keys and bad values throw configuration errors
/// naming the key path.
ScenarioProfile profile_from_json(const nlohmann::json& j);

struct RadioConfig {
  double carrier = 5.9e9;
  double bandwidth = 100e6;
  int rx_antennas = 20;
  int tx_antennas = 20;
  int waveform_length = 1024;

  double sample_rate() const { return 2.0 * bandwidth; }
};

/// Thermal noise over the sample bandwidth 2*B_s, dBm.
double noise_floor_dbm(const ScenarioProfile& profile, const RadioConfig& radio);

/// Per-coefficient matched-filter SNR in dB of a path of the given total
/// length (unit-energy waveforms carry N samples of the per-antenna power).
double path_snr_db(double total_distance, const ScenarioProfile& profile, const RadioConfig& radio);

/// Matched-filter SINR of each path: thermal noise plus the nonzero-lag
/// leakage of every other path, which for random orthogonal waveforms adds
/// M_t/N of that path's power per coefficient.
std::vector<double> path_sinr_db(std::span<const double> snr_db, const RadioConfig& radio);

/// Complex gain in sqrt(mW): log-distance magnitude, uniform phase.
signal::Complex path_gain(double total_distance, const ScenarioProfile& profile, std::uint64_t seed);

/// HV at `distance` from the SV with a small lateral offset and uniform
/// heading. Retries empty draws and throws empty_scene after 100.
Scene sample_scene(const ScenarioProfile& profile, double distance, const ClusterLayout& layout,
                   std::uint64_t seed);

enum class Mode { single, multi };
enum class Pipeline { geometric, full_signal };

std::string_view to_string(Mode m);
std::string_view to_string(Pipeline p);
Mode parse_mode(std::string_view s);
Pipeline parse_pipeline(std::string_view s);

struct TrialOptions {
  Mode mode = Mode::single;
  Pipeline pipeline = Pipeline::geometric;
  double distance = 50.0;
  // When set, scenes are redrawn until at least this many usable paths exist
  // and a random subset of exactly this size is kept (covering all four
  // clusters in multi mode when possible).
  std::optional<std::size_t> target_paths;
  double length = 3.0;
  double width = 6.0;
  bool noiseless = false;
  RadioConfig radio;
  SearchOptions search;
  int max_redraws = 200;
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::string scenario;
  Mode mode = Mode::single;
  Pipeline pipeline = Pipeline::geometric;
  double distance = 0.0;
  std::size_t paths = 0;
  std::array<std::size_t, 4> partition{};  // paths per cluster label 1..4 (single mode: all in 1)
  std::optional<double> error_m2;          // present iff not failed
  bool failed = false;
  std::string reason;
  bool ambiguous = false;
  std::array<Vec2, 4> truth{};
  std::array<Vec2, 4> estimate{};
};

/// (1/4) sum_k |estimate_k - truth_k|^2.
double positioning_error(const std::array<Vec2, 4>& estimate, const std::array<Vec2, 4>& truth);

/// Never throws for solver or scene failures; they come back as failed trials.
TrialResult run_trial(const ScenarioProfile& profile, const TrialOptions& options, std::uint64_t seed);

struct CalibrationBin {
  double sinr_lo_db = 0.0;  // bin covers [sinr_lo_db, sinr_lo_db + 2)
  std::size_t paths = 0;
  std::size_t detected = 0;
  double rms_angle_deg = 0.0;  // over detected paths, AoA and AoD pooled
};

struct Calibration {
  MeasurementNoise noise;
  std::vector<CalibrationBin> bins;
  std::size_t paths = 0;     // true paths synthesized
  std::size_t matched = 0;   // detections attributed to a true path
  std::size_t spurious = 0;  // detections with no true path nearby
};

/// Runs full-signal captures of single-cluster scenes and fits the geometric
/// noise model to the estimator's errors: angle variance regressed on
/// 1/SINR, ToA spread as RMS, detection SINR as the lowest 2 dB bin detecting
/// at least half of its paths.
Calibration calibrate_noise(const ScenarioProfile& profile, const RadioConfig& radio,
                            double distance, std::size_t trials, std::uint64_t seed);

std::string csv_header();
std::string csv_row(const TrialResult& r);

}  // namespace hvsense::sim
