// SPDX-License-Identifier: Apache-2.0
#include "hvsense/channel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/QR>

#include "hvsense/solver_multi.hpp"
#include "hvsense/solver_single.hpp"

namespace hvsense::sim {

using nlohmann::json;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double MeasurementNoise::angle_sigma_rad(double sinr_db) const {
  const double term = angle_deg_at_0db * std::pow(10.0, -sinr_db / 20.0);
  return std::hypot(angle_floor_deg, term) * signal::kDegree;
}

ScenarioProfile ScenarioProfile::highway() {
  ScenarioProfile p;
  p.name = "highway";
  p.scatterer_density = 0.002;
  p.region_half_width = 35.0;
  p.visibility = 0.5;
  p.path_loss_exponent = 3.0;
  p.reflection_loss_db = 10.0;
  p.noise = {0.07, 0.55, 1.35e-9, 0.0};
  return p;
}

ScenarioProfile ScenarioProfile::rural() {
  ScenarioProfile p = highway();
  p.name = "rural";
  p.scatterer_density = 0.005;
  p.region_half_width = 20.0;
  p.path_loss_exponent = 2.7;
  p.reflection_loss_db = 8.0;
  return p;
}

ScenarioProfile ScenarioProfile::named(std::string_view name) {
  if (name == "highway") return highway();
  if (name == "rural") return rural();
  throw SensingError(ErrorKind::configuration,
                     "unknown scenario \"" + std::string(name) + "\" (expected highway or rural)");
}

void ScenarioProfile::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw SensingError(ErrorKind::configuration, std::string(field) + ": " + what);
  };
  require(scatterer_density > 0.0, "scatterer_density", "must be positive");
  require(region_length > 0.0, "region_length", "must be positive");
  require(region_half_width > 0.0, "region_half_width", "must be positive");
  require(clearance > 0.0, "clearance", "must be positive");
  require(visibility > 0.0 && visibility <= 1.0, "visibility", "must be in (0, 1]");
  require(path_loss_exponent > 0.0, "path_loss_exponent", "must be positive");
  require(reference_loss_db > 0.0, "reference_loss_db", "must be positive");
  require(reflection_loss_db >= 0.0, "reflection_loss_db", "must be nonnegative");
  require(noise_figure_db >= 0.0, "noise_figure_db", "must be nonnegative");
  require(std::isfinite(tx_power_dbm), "tx_power_dbm", "must be finite");
  require(noise.angle_floor_deg >= 0.0, "noise.angle_floor_deg", "must be nonnegative");
  require(noise.angle_deg_at_0db >= 0.0, "noise.angle_deg_at_0db", "must be nonnegative");
  require(noise.toa_sigma_s >= 0.0, "noise.toa_sigma_s", "must be nonnegative");
  require(std::isfinite(noise.detection_sinr_db), "noise.detection_sinr_db", "must be finite");
}

json profile_to_json(const ScenarioProfile& p) {
  return {{"name", p.name},
          {"scatterer_density", p.scatterer_density},
          {"region_length", p.region_length},
          {"region_half_width", p.region_half_width},
          {"clearance", p.clearance},
          {"visibility", p.visibility},
          {"path_loss_exponent", p.path_loss_exponent},
          {"reference_loss_db", p.reference_loss_db},
          {"reflection_loss_db", p.reflection_loss_db},
          {"noise_figure_db", p.noise_figure_db},
          {"tx_power_dbm", p.tx_power_dbm},
          {"noise",
           {{"angle_floor_deg", p.noise.angle_floor_deg},
            {"angle_deg_at_0db", p.noise.angle_deg_at_0db},
            {"toa_sigma_s", p.noise.toa_sigma_s},
            {"detection_sinr_db", p.noise.detection_sinr_db}}}};
}

ScenarioProfile profile_from_json(const json& j) {
  auto bad = [](const std::string& key, const std::string& what) -> SensingError {
    return {ErrorKind::configuration, (key.empty() ? "profile" : "profile." + key) + ": " + what};
  };
  if (!j.is_object()) throw bad("", "expected an object");
  ScenarioProfile p = ScenarioProfile::highway();
  if (const auto it = j.find("base"); it != j.end()) {
    if (!it->is_string()) throw bad("base", "expected a string");
    p = ScenarioProfile::named(it->get<std::string>());
  }
  const std::pair<const char*, double*> numbers[] = {
      {"scatterer_density", &p.scatterer_density},
      {"region_length", &p.region_length},
      {"region_half_width", &p.region_half_width},
      {"clearance", &p.clearance},
      {"visibility", &p.visibility},
      {"path_loss_exponent", &p.path_loss_exponent},
      {"reference_loss_db", &p.reference_loss_db},
      {"reflection_loss_db", &p.reflection_loss_db},
      {"noise_figure_db", &p.noise_figure_db},
      {"tx_power_dbm", &p.tx_power_dbm}};
  const std::pair<const char*, double*> noise_numbers[] = {
      {"angle_floor_deg", &p.noise.angle_floor_deg},
      {"angle_deg_at_0db", &p.noise.angle_deg_at_0db},
      {"toa_sigma_s", &p.noise.toa_sigma_s},
      {"detection_sinr_db", &p.noise.detection_sinr_db}};

  for (const auto& [key, value] : j.items()) {
    if (key == "base") continue;
    if (key == "name") {
      if (!value.is_string()) throw bad(key, "expected a string");
      p.name = value.get<std::string>();
      continue;
    }
    if (key == "noise") {
      if (!value.is_object()) throw bad(key, "expected an object");
      for (const auto& [nk, nv] : value.items()) {
        const auto hit = std::find_if(std::begin(noise_numbers), std::end(noise_numbers),
                                      [&](const auto& e) { return nk == e.first; });
        if (hit == std::end(noise_numbers)) throw bad("noise." + nk, "unknown key");
        if (!nv.is_number()) throw bad("noise." + nk, "expected a number");
        *hit->second = nv.get<double>();
      }
      continue;
    }
    const auto hit = std::find_if(std::begin(numbers), std::end(numbers),
                                  [&](const auto& e) { return key == e.first; });
    if (hit == std::end(numbers)) throw bad(key, "unknown key");
    if (!value.is_number()) throw bad(key, "expected a number");
    *hit->second = value.get<double>();
  }
  try {
    p.validate();
  } catch (const SensingError& e) {
    throw bad("", e.what());
  }
  return p;
}

double noise_floor_dbm(const ScenarioProfile& profile, const RadioConfig& radio) {
  return -174.0 + 10.0 * std::log10(radio.sample_rate()) + profile.noise_figure_db;
}

namespace {

double received_power_dbm(double total_distance, const ScenarioProfile& p) {
  if (!(total_distance > 0.0))
    throw SensingError(ErrorKind::configuration, "path length must be positive");
  return p.tx_power_dbm - p.reference_loss_db -
         10.0 * p.path_loss_exponent * std::log10(total_distance) - p.reflection_loss_db;
}

}  // namespace

double path_snr_db(double total_distance, const ScenarioProfile& profile, const RadioConfig& radio) {
  return received_power_dbm(total_distance, profile) - noise_floor_dbm(profile, radio) +
         10.0 * std::log10(static_cast<double>(radio.waveform_length));
}

std::vector<double> path_sinr_db(std::span<const double> snr_db, const RadioConfig& radio) {
  const double leak = static_cast<double>(radio.tx_antennas) / radio.waveform_length;
  double total = 0.0;
  for (double s : snr_db) total += std::pow(10.0, s / 10.0);
  std::vector<double> out;
  for (double s : snr_db) {
    const double p = std::pow(10.0, s / 10.0);
    out.push_back(10.0 * std::log10(p / (1.0 + leak * (total - p))));
  }
  return out;
}

signal::Complex path_gain(double total_distance, const ScenarioProfile& profile, std::uint64_t seed) {
  const double magnitude = std::pow(10.0, received_power_dbm(total_distance, profile) / 20.0);
  std::mt19937_64 rng(seed);
  return std::polar(magnitude, std::uniform_real_distribution<double>(0.0, kTwoPi)(rng));
}

Scene sample_scene(const ScenarioProfile& profile, double distance, const ClusterLayout& layout,
                   std::uint64_t seed) {
  if (!(distance > 0.0)) throw SensingError(ErrorKind::configuration, "distance must be positive");
  profile.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scene scene;
  scene.layout = layout;
  const double lateral = std::min(3.5, 0.5 * distance) * (2.0 * unit(rng) - 1.0);
  scene.hv_pose = Pose(Vec2(std::sqrt(distance * distance - lateral * lateral), lateral),
                       kTwoPi * unit(rng));
  scene.clock_gap = toa_from_seconds(2e-6 * (2.0 * unit(rng) - 1.0));
  const auto vertices = scene.vertices();

  const double area = profile.region_length * 2.0 * profile.region_half_width;
  std::poisson_distribution<int> count(profile.scatterer_density * area);
  const double x0 = 0.5 * distance - 0.5 * profile.region_length;
  const std::vector<Cluster> labels =
      layout.is_single() ? std::vector<Cluster>{Cluster::single}
                         : std::vector<Cluster>{Cluster::k1, Cluster::k2, Cluster::k3, Cluster::k4};

  for (int attempt = 0; attempt < 100; ++attempt) {
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const Vec2 q(x0 + profile.region_length * unit(rng),
                   profile.region_half_width * (2.0 * unit(rng) - 1.0));
      bool clear = q.norm() >= profile.clearance;
      for (const auto& v : vertices) clear = clear && (q - v).norm() >= profile.clearance;
      // Visibility draws happen regardless so the stream layout is fixed.
      for (Cluster k : labels)
        if (unit(rng) < profile.visibility && clear) scene.scatterers.push_back({q, k});
    }
    if (!scene.scatterers.empty()) return scene;
  }
  throw SensingError(ErrorKind::empty_scene, "no visible scatterers after 100 draws");
}

std::string_view to_string(Mode m) { return m == Mode::single ? "single" : "multi"; }
std::string_view to_string(Pipeline p) {
  return p == Pipeline::geometric ? "geometric" : "full-signal";
}

Mode parse_mode(std::string_view s) {
  if (s == "single") return Mode::single;
  if (s == "multi") return Mode::multi;
  throw SensingError(ErrorKind::configuration, "unknown mode \"" + std::string(s) + "\"");
}

Pipeline parse_pipeline(std::string_view s) {
  if (s == "geometric") return Pipeline::geometric;
  if (s == "full-signal" || s == "full_signal") return Pipeline::full_signal;
  throw SensingError(ErrorKind::configuration, "unknown pipeline \"" + std::string(s) + "\"");
}

double positioning_error(const std::array<Vec2, 4>& estimate, const std::array<Vec2, 4>& truth) {
  double sum = 0.0;
  for (std::size_t k = 0; k < 4; ++k) sum += (estimate[k] - truth[k]).squaredNorm();
  return sum / 4.0;
}

namespace {

struct Candidate {
  ObservedPath path;
  double snr_db;
  double sinr_db;
};

void assign_sinr(std::vector<Candidate>& paths, const RadioConfig& radio) {
  std::vector<double> snr;
  for (const auto& c : paths) snr.push_back(c.snr_db);
  const auto sinr = path_sinr_db(snr, radio);
  for (std::size_t i = 0; i < paths.size(); ++i) paths[i].sinr_db = sinr[i];
}

std::vector<Candidate> usable_paths(const Scene& scene, const ScenarioProfile& profile,
                                    const TrialOptions& opt) {
  std::vector<Candidate> out;
  for (const auto& p : forward_observe(scene))
    out.push_back({p, path_snr_db(p.geometry.d, profile, opt.radio), 0.0});
  assign_sinr(out, opt.radio);
  if (opt.noiseless || opt.pipeline == Pipeline::full_signal) return out;
  std::erase_if(out, [&](const Candidate& c) { return c.sinr_db < profile.noise.detection_sinr_db; });
  return out;
}

// Random subset of `n`, first covering every populated cluster label.
std::vector<Candidate> choose(std::vector<Candidate> pool, std::size_t n, std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  std::stable_partition(pool.begin(), pool.end(), [seen = std::array<bool, 5>{}](const Candidate& c) mutable {
    auto& s = seen[static_cast<std::size_t>(cluster_index(c.path.observation.cluster))];
    const bool first = !s;
    s = true;
    return first;
  });
  pool.resize(n);
  std::shuffle(pool.begin(), pool.end(), rng);
  return pool;
}

std::size_t populated(const std::vector<Candidate>& pool) {
  std::array<bool, 5> seen{};
  for (const auto& c : pool) seen[static_cast<std::size_t>(cluster_index(c.path.observation.cluster))] = true;
  return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));
}

std::vector<PathObservation> observe_geometric(std::vector<Candidate> paths,
                                               const ScenarioProfile& profile,
                                               const TrialOptions& opt, std::uint64_t seed) {
  // Only the received paths interfere with each other.
  assign_sinr(paths, opt.radio);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<PathObservation> obs;
  for (const auto& c : paths) {
    PathObservation o = c.path.observation;
    if (!opt.noiseless) {
      const double sa = profile.noise.angle_sigma_rad(c.sinr_db);
      o.aoa = wrap_angle(o.aoa + sa * g(rng));
      o.aod = wrap_angle(o.aod + sa * g(rng));
      o.toa += toa_from_seconds(profile.noise.toa_sigma_s * g(rng));
    }
    obs.push_back(o);
  }
  return obs;
}

std::vector<PathObservation> observe_signal(const std::vector<Candidate>& paths,
                                            const TrialOptions& opt, std::uint64_t seed) {
  const auto& radio = opt.radio;
  const std::vector<Cluster> labels =
      opt.mode == Mode::single
          ? std::vector<Cluster>{Cluster::single}
          : std::vector<Cluster>{Cluster::k1, Cluster::k2, Cluster::k3, Cluster::k4};
  const auto sets = signal::generate_waveform_sets(labels, radio.tx_antennas, radio.waveform_length,
                                                   mix_seed(seed, 0), radio.bandwidth);
  const auto rx_array = signal::ArrayManifold::uniform_circular(radio.rx_antennas, radio.carrier);
  const auto tx_array = signal::ArrayManifold::uniform_circular(radio.tx_antennas, radio.carrier);

  // Unit noise per coefficient, so |gain|^2 is the per-coefficient SNR.
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::vector<signal::PathComponent> components;
  Toa first = Toa::max();
  for (const auto& c : paths) {
    const auto& o = c.path.observation;
    components.push_back(
        {o.aoa, o.aod, o.toa, std::polar(std::pow(10.0, c.snr_db / 20.0), phase(rng)), o.cluster});
    first = std::min(first, o.toa);
  }
  signal::SynthesisOptions synth;
  synth.start_time = first - toa_from_seconds(8.0 / radio.sample_rate());
  const auto rx = signal::synthesize_rx(components, sets, rx_array, tx_array,
                                        opt.noiseless ? 0.0 : 1.0, mix_seed(seed, 2), synth);
  return signal::extract_observations(rx, sets, rx_array, tx_array);
}

}  // namespace

TrialResult run_trial(const ScenarioProfile& profile, const TrialOptions& opt, std::uint64_t seed) {
  TrialResult r;
  r.seed = seed;
  r.scenario = profile.name;
  r.mode = opt.mode;
  r.pipeline = opt.pipeline;
  r.distance = opt.distance;
  try {
    const ClusterLayout layout = opt.mode == Mode::single
                                     ? ClusterLayout::single()
                                     : ClusterLayout::rectangle(opt.length, opt.width);
    std::mt19937_64 rng(mix_seed(seed, 1));

    Scene scene;
    std::vector<Candidate> chosen;
    const std::size_t want = opt.target_paths.value_or(0);
    for (int draw = 0;; ++draw) {
      if (draw >= std::max(opt.max_redraws, 1))
        throw SensingError(ErrorKind::empty_scene,
                           "could not realize " + std::to_string(want) + " paths in " +
                               std::to_string(opt.max_redraws) + " scene draws");
      scene = sample_scene(profile, opt.distance, layout, mix_seed(seed, 100 + draw));
      auto pool = usable_paths(scene, profile, opt);
      if (!opt.target_paths) {
        chosen = std::move(pool);
        break;
      }
      const std::size_t coverage = opt.mode == Mode::multi ? std::min<std::size_t>(want, 4) : 1;
      if (pool.size() >= want && populated(pool) >= coverage) {
        chosen = choose(std::move(pool), want, rng);
        break;
      }
    }

    const auto truth = scene.vertices();
    for (std::size_t k = 0; k < 4; ++k) r.truth[k] = truth[k];

    const auto obs = opt.pipeline == Pipeline::geometric
                         ? observe_geometric(chosen, profile, opt, mix_seed(seed, 2))
                         : observe_signal(chosen, opt, mix_seed(seed, 3));
    r.paths = obs.size();
    for (const auto& o : obs) ++r.partition[static_cast<std::size_t>(std::max(cluster_index(o.cluster), 1) - 1)];

    if (opt.mode == Mode::single) {
      single::Options so;
      so.search = opt.search;
      const auto est = single::sense(obs, so);
      r.estimate.fill(est.position);
      r.ambiguous = est.ambiguous;
    } else {
      multi::Options mo;
      mo.search = opt.search;
      const auto est = multi::sense_multi(obs, mo);
      for (std::size_t k = 0; k < 4; ++k) r.estimate[k] = est.vertices[k];
      r.ambiguous = est.ambiguous;
    }
    r.error_m2 = positioning_error(r.estimate, r.truth);
  } catch (const SensingError& e) {
    r.failed = true;
    r.reason = e.what();
  } catch (const std::exception& e) {
    r.failed = true;
    r.reason = std::string("error: ") + e.what();
  }
  return r;
}

Calibration calibrate_noise(const ScenarioProfile& profile, const RadioConfig& radio,
                            double distance, std::size_t trials, std::uint64_t seed) {
  TrialOptions opt;
  opt.pipeline = Pipeline::full_signal;
  opt.distance = distance;
  opt.radio = radio;

  struct Sample {
    double sinr_db, angle_sq, toa_s;
  };
  std::vector<Sample> samples;
  std::vector<std::pair<double, bool>> detected;  // per true path: (sinr, found)
  Calibration cal;
  const double bin = 1.0 / radio.sample_rate();

  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t s = mix_seed(seed, t);
    const Scene scene = sample_scene(profile, distance, ClusterLayout::single(), mix_seed(s, 100));
    const auto pool = usable_paths(scene, profile, opt);
    const auto obs = observe_signal(pool, opt, mix_seed(s, 3));
    cal.paths += pool.size();

    std::vector<bool> found(pool.size(), false);
    for (const auto& o : obs) {
      // Attribute to the true path with the closest ToA whose angles agree.
      std::optional<std::size_t> best;
      double best_dt = 1.5 * bin;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& truth = pool[i].path.observation;
        const double dt = std::abs(to_seconds(o.toa - truth.toa));
        const double da = std::max(std::abs(angle_difference(o.aoa, truth.aoa)),
                                   std::abs(angle_difference(o.aod, truth.aod)));
        if (dt < best_dt && da < 2.0 * signal::kDegree) {
          best_dt = dt;
          best = i;
        }
      }
      if (!best) {
        ++cal.spurious;
        continue;
      }
      ++cal.matched;
      found[*best] = true;
      const auto& truth = pool[*best].path.observation;
      const double ea = angle_difference(o.aoa, truth.aoa);
      const double ed = angle_difference(o.aod, truth.aod);
      samples.push_back({pool[*best].sinr_db, 0.5 * (ea * ea + ed * ed),
                         to_seconds(o.toa - truth.toa)});
    }
    for (std::size_t i = 0; i < pool.size(); ++i) detected.emplace_back(pool[i].sinr_db, found[i]);
  }
  if (samples.size() < 3)
    throw SensingError(ErrorKind::empty_scene, "too few detections to calibrate");

  // angle_sq ~ floor^2 + a^2 * 10^(-sinr/10), least squares in (floor^2, a^2).
  Eigen::MatrixXd design(static_cast<Eigen::Index>(samples.size()), 2);
  Eigen::VectorXd target(design.rows());
  double toa_sq = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    design(r, 0) = 1.0;
    design(r, 1) = std::pow(10.0, -samples[i].sinr_db / 10.0);
    target(r) = samples[i].angle_sq;
    toa_sq += samples[i].toa_s * samples[i].toa_s;
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(target);
  const double deg = signal::kDegree;
  cal.noise.angle_floor_deg = std::sqrt(std::max(coef(0), 0.0)) / deg;
  cal.noise.angle_deg_at_0db = std::sqrt(std::max(coef(1), 0.0)) / deg;
  cal.noise.toa_sigma_s = std::sqrt(toa_sq / static_cast<double>(samples.size()));

  auto bin_of = [](double sinr) { return std::floor(sinr / 2.0) * 2.0; };
  std::map<double, CalibrationBin> bins;
  for (const auto& [sinr, ok] : detected) {
    auto& b = bins[bin_of(sinr)];
    b.sinr_lo_db = bin_of(sinr);
    ++b.paths;
    b.detected += ok;
  }
  for (const auto& smp : samples) bins[bin_of(smp.sinr_db)].rms_angle_deg += smp.angle_sq;
  for (auto& [lo, b] : bins) {
    if (b.detected > 0) b.rms_angle_deg = std::sqrt(b.rms_angle_deg / double(b.detected)) / deg;
    cal.bins.push_back(b);
  }
  cal.noise.detection_sinr_db = cal.bins.empty() ? 0.0 : cal.bins.back().sinr_lo_db;
  for (const auto& b : cal.bins)
    if (b.paths >= 5 && 2 * b.detected >= b.paths) {
      cal.noise.detection_sinr_db = b.sinr_lo_db;
      break;
    }
  return cal;
}

std::string csv_header() {
  return "seed,scenario,mode,pipeline,distance_m,P,p1,p2,p3,p4,error_m2,failed,reason";
}

namespace {

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string number(double v, const char* fmt = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

std::string csv_row(const TrialResult& r) {
  std::string row = std::to_string(r.seed) + "," + quoted(r.scenario) + "," +
                    std::string(to_string(r.mode)) + "," + std::string(to_string(r.pipeline)) +
                    "," + number(r.distance) + "," + std::to_string(r.paths);
  for (auto n : r.partition) row += "," + std::to_string(n);
  row += "," + (r.error_m2 ? number(*r.error_m2, "%.17g") : std::string());
  row += r.failed ? ",1," : ",0,";
  return row + quoted(r.reason);
}

}  // namespace hvsense::sim
