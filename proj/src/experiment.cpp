// SPDX-License-Identifier: Apache-2.0
#include "hvsense/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

namespace hvsense::exp {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string num(double v) { return std::isfinite(v) ? fmt("%.6g", v) : std::string(); }

// Walks one JSON object, recording errors under a dotted key path and
// remembering which keys were consumed so leftovers can be reported.
class Reader {
public:
  Reader(const json& object, std::string path, std::vector<std::string>& errors)
      : j_(object), path_(std::move(path)), errors_(errors) {}

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void error(const std::string& key, const std::string& what) { errors_.push_back(key_path(key) + ": " + what); }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class Check>
  void number(const std::string& key, double& out, Check ok, const char* range) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number()) return error(key, "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x) || !ok(x)) return error(key, std::string("out of range (") + range + ")");
    out = x;
  }

  template <class T>
  void integer(const std::string& key, T& out, std::int64_t lo, std::int64_t hi) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number_integer()) return error(key, "expected an integer");
    const bool huge = v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(hi);
    const std::int64_t x = huge ? hi : v->get<std::int64_t>();
    if (huge || x < lo || x > hi)
      return error(key, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out = static_cast<T>(x);
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_boolean()) return error(key, "expected true or false");
    out = v->get<bool>();
  }

  // Returns a nested object, or nullptr after recording a type error.
  const json* object(const std::string& key) {
    const json* v = find(key);
    if (v && !v->is_object()) {
      error(key, "expected an object");
      return nullptr;
    }
    return v;
  }

  void finish() {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) error(key, "unknown key");
  }

private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void read_sweep(Reader& top, ExperimentConfig& c, std::vector<std::string>& errors) {
  const json* s = top.object("sweep");
  if (!s) return;
  Reader r(*s, "sweep", errors);
  if (const json* v = r.find("variable")) {
    const std::string name = v->is_string() ? v->get<std::string>() : "";
    if (name == "P" || name == "paths")
      c.sweep = SweepVariable::paths;
    else if (name == "distance")
      c.sweep = SweepVariable::distance;
    else
      r.error("variable", "expected \"P\" or \"distance\"");
  }
  if (const json* v = r.find("values")) {
    if (!v->is_array()) {
      r.error("values", "expected an array of numbers");
    } else if (v->empty()) {
      r.error("values", "must not be empty");
    } else {
      std::vector<double> values;
      for (std::size_t i = 0; i < v->size(); ++i) {
        const json& x = (*v)[i];
        const std::string key = "values[" + std::to_string(i) + "]";
        if (!x.is_number()) {
          r.error(key, "expected a number");
          continue;
        }
        values.push_back(x.get<double>());
      }
      if (values.size() == v->size()) c.values = std::move(values);
    }
  }
  r.finish();
}

void check_values(const ExperimentConfig& c, std::vector<std::string>& errors) {
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    const double x = c.values[i];
    const std::string key = "sweep.values[" + std::to_string(i) + "]: ";
    if (c.sweep == SweepVariable::paths) {
      if (!(x >= 1 && x <= 1000 && x == std::floor(x)))
        errors.push_back(key + "path counts must be integers in [1, 1000]");
    } else if (!(std::isfinite(x) && x > 0)) {
      errors.push_back(key + "distances must be positive");
    }
  }
}

void read_scenarios(Reader& top, ExperimentConfig& c, std::vector<std::string>& errors) {
  const json* s = top.find("scenarios");
  if (!s) return;
  if (!s->is_array() || s->empty()) {
    top.error("scenarios", "expected a nonempty array");
    return;
  }
  std::vector<sim::ScenarioProfile> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < s->size(); ++i) {
    const json& item = (*s)[i];
    const std::string key = "scenarios[" + std::to_string(i) + "]";
    try {
      if (item.is_string()) {
        out.push_back(sim::ScenarioProfile::named(item.get<std::string>()));
      } else if (item.is_object()) {
        if (item.contains("tx_power_dbm")) {
          errors.push_back(key + ".tx_power_dbm: set the top-level tx_power_dbm instead");
          continue;
        }
        out.push_back(sim::profile_from_json(item));
      } else {
        errors.push_back(key + ": expected a scenario name or profile object");
        continue;
      }
    } catch (const SensingError& e) {
      errors.push_back(key + ": " + e.what());
      continue;
    }
    if (!names.insert(out.back().name).second)
      errors.push_back(key + ": duplicate scenario name \"" + out.back().name + "\"");
  }
  if (out.size() == s->size()) c.scenarios = std::move(out);
}

}  // namespace

ConfigResult validate_config(std::string_view text) {
  ConfigResult result;
  auto& errors = result.errors;
  ExperimentConfig c;

  json j = json::object();
  if (text.find_first_not_of(" \t\r\n") != std::string_view::npos) {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      errors.push_back(std::string("parse error: ") + e.what());
      return result;
    }
  }
  if (!j.is_object()) {
    errors.push_back("top level: expected an object");
    return result;
  }

  Reader top(j, "", errors);
  read_sweep(top, c, errors);
  check_values(c, errors);
  top.integer("trials", c.trials, 1, 100'000'000);
  read_scenarios(top, c, errors);

  if (const json* v = top.find("mode")) {
    try {
      if (!v->is_string()) throw SensingError(ErrorKind::configuration, "expected a string");
      c.mode = sim::parse_mode(v->get<std::string>());
    } catch (const SensingError& e) {
      top.error("mode", e.what());
    }
  }
  if (const json* v = top.find("pipeline")) {
    try {
      if (!v->is_string()) throw SensingError(ErrorKind::configuration, "expected a string");
      c.pipeline = sim::parse_pipeline(v->get<std::string>());
    } catch (const SensingError& e) {
      top.error("pipeline", e.what());
    }
  }
  if (const json* v = top.find("base_seed")) {
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
      top.error("base_seed", "expected a nonnegative integer");
    else
      c.base_seed = v->get<std::uint64_t>();
  }
  if (const json* v = top.find("output")) {
    if (!v->is_string() || v->get<std::string>().empty())
      top.error("output", "expected a nonempty string");
    else
      c.output = v->get<std::string>();
  }
  top.number("distance_m", c.distance, [](double x) { return x > 0; }, "> 0");
  if (const json* v = top.find("paths")) {
    if (v->is_null()) {
      c.paths.reset();
    } else if (!v->is_number_integer() || v->get<std::int64_t>() < 1 || v->get<std::int64_t>() > 1000) {
      top.error("paths", "expected null or an integer in [1, 1000]");
    } else {
      c.paths = v->get<std::size_t>();
    }
  }
  top.boolean("noiseless", c.noiseless);
  top.number("tx_power_dbm", c.tx_power_dbm, [](double x) { return x > -100 && x < 100; }, "-100 to 100");

  if (const json* v = top.object("layout")) {
    Reader r(*v, "layout", errors);
    r.number("length_m", c.length, [](double x) { return x > 0; }, "> 0");
    r.number("width_m", c.width, [](double x) { return x > 0; }, "> 0");
    r.finish();
  }
  if (const json* v = top.object("radio")) {
    Reader r(*v, "radio", errors);
    r.number("carrier_hz", c.radio.carrier, [](double x) { return x > 0; }, "> 0");
    r.number("bandwidth_hz", c.radio.bandwidth, [](double x) { return x > 0; }, "> 0");
    r.integer("rx_antennas", c.radio.rx_antennas, 1, 256);
    r.integer("tx_antennas", c.radio.tx_antennas, 1, 256);
    r.integer("waveform_length", c.radio.waveform_length, 16, 1 << 20);
    r.finish();
  }
  if (const json* v = top.object("solver")) {
    Reader r(*v, "solver", errors);
    double grid = c.search.grid_step / kDeg;
    r.number("grid_step_deg", grid, [](double x) { return x > 0 && x <= 90; }, "0 to 90");
    c.search.grid_step = grid * kDeg;
    r.number("refine_tol", c.search.refine_tol, [](double x) { return x > 0; }, "> 0");
    r.number("ambiguity_ratio", c.search.ambiguity_ratio, [](double x) { return x >= 1; }, ">= 1");
    r.number("zero_residual", c.search.zero_residual, [](double x) { return x >= 0; }, ">= 0");
    r.number("residual_floor", c.search.residual_floor, [](double x) { return x > 0; }, "> 0");
    r.finish();
  }
  top.finish();

  for (auto& p : c.scenarios) p.tx_power_dbm = c.tx_power_dbm;
  if (c.pipeline == sim::Pipeline::full_signal) {
    const std::size_t need =
        static_cast<std::size_t>(c.radio.tx_antennas) * (c.mode == sim::Mode::multi ? 4 : 1);
    if (static_cast<std::size_t>(c.radio.waveform_length) < need)
      errors.push_back("radio.waveform_length: must be at least " + std::to_string(need) +
                       " for orthogonal waveforms");
  }
  if (errors.empty()) result.config = std::move(c);
  return result;
}

ExperimentConfig parse_config(std::string_view text) {
  auto r = validate_config(text);
  if (r.config) return std::move(*r.config);
  std::string msg = "invalid config:";
  for (const auto& e : r.errors) msg += "\n  " + e;
  throw SensingError(ErrorKind::configuration, msg);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SensingError(ErrorKind::io, "cannot open config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

json config_to_json(const ExperimentConfig& c) {
  json scenarios = json::array();
  for (const auto& p : c.scenarios) {
    json pj = sim::profile_to_json(p);
    pj.erase("tx_power_dbm");
    scenarios.push_back(std::move(pj));
  }
  return {
      {"sweep", {{"variable", c.sweep == SweepVariable::paths ? "P" : "distance"}, {"values", c.values}}},
      {"trials", c.trials},
      {"scenarios", std::move(scenarios)},
      {"mode", sim::to_string(c.mode)},
      {"pipeline", sim::to_string(c.pipeline)},
      {"base_seed", c.base_seed},
      {"output", c.output},
      {"distance_m", c.distance},
      {"paths", c.paths ? json(*c.paths) : json(nullptr)},
      {"noiseless", c.noiseless},
      {"tx_power_dbm", c.tx_power_dbm},
      {"layout", {{"length_m", c.length}, {"width_m", c.width}}},
      {"radio",
       {{"carrier_hz", c.radio.carrier},
        {"bandwidth_hz", c.radio.bandwidth},
        {"rx_antennas", c.radio.rx_antennas},
        {"tx_antennas", c.radio.tx_antennas},
        {"waveform_length", c.radio.waveform_length}}},
      {"solver",
       {{"grid_step_deg", c.search.grid_step / kDeg},
        {"refine_tol", c.search.refine_tol},
        {"ambiguity_ratio", c.search.ambiguity_ratio},
        {"zero_residual", c.search.zero_residual},
        {"residual_floor", c.search.residual_floor}}},
  };
}

sim::TrialOptions trial_options(const ExperimentConfig& c, double value) {
  sim::TrialOptions t;
  t.mode = c.mode;
  t.pipeline = c.pipeline;
  t.distance = c.distance;
  t.target_paths = c.paths;
  if (c.sweep == SweepVariable::paths)
    t.target_paths = static_cast<std::size_t>(value);
  else
    t.distance = value;
  t.length = c.length;
  t.width = c.width;
  t.noiseless = c.noiseless;
  t.radio = c.radio;
  t.search = c.search;
  return t;
}

std::uint64_t trial_seed(const ExperimentConfig& c, std::size_t trial) { return c.base_seed + trial; }

PointSummary summarize(std::string scenario, double value, const std::vector<sim::TrialResult>& trials) {
  PointSummary s;
  s.scenario = std::move(scenario);
  s.value = value;
  s.trials = trials.size();
  std::vector<double> errs;
  double paths = 0.0;
  std::map<std::string, std::size_t> reasons;
  for (const auto& t : trials) {
    if (t.failed) {
      ++s.failed;
      ++reasons[t.reason];
      continue;
    }
    errs.push_back(*t.error_m2);
    paths += static_cast<double>(t.paths);
  }
  if (!reasons.empty())
    s.top_failure = std::max_element(reasons.begin(), reasons.end(), [](const auto& a, const auto& b) {
                      return a.second < b.second;
                    })->first;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (errs.empty()) {
    s.mean_paths = s.mean = s.median = s.stddev = s.std_error = nan;
    return s;
  }
  const double n = static_cast<double>(errs.size());
  s.mean_paths = paths / n;
  double sum = 0.0;
  for (double e : errs) sum += e;
  s.mean = sum / n;
  double ss = 0.0;
  for (double e : errs) ss += (e - s.mean) * (e - s.mean);
  s.stddev = errs.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  s.std_error = s.stddev / std::sqrt(n);
  std::sort(errs.begin(), errs.end());
  const std::size_t m = errs.size() / 2;
  s.median = errs.size() % 2 ? errs[m] : 0.5 * (errs[m - 1] + errs[m]);
  return s;
}

double welch_z(const PointSummary& a, const PointSummary& b) {
  const double se = std::hypot(a.std_error, b.std_error);
  const double diff = a.mean - b.mean;
  if (se == 0.0) return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  return diff / se;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentResult out;
  out.config = config;
  const std::size_t S = config.scenarios.size(), V = config.values.size(), T = config.trials;
  std::vector<sim::ScenarioProfile> profiles = config.scenarios;
  for (auto& p : profiles) {
    p.tx_power_dbm = config.tx_power_dbm;
    p.validate();
  }
  std::vector<sim::TrialOptions> opts;
  for (double v : config.values) opts.push_back(trial_options(config, v));

  out.trials.assign(S, std::vector<std::vector<sim::TrialResult>>(V, std::vector<sim::TrialResult>(T)));
  const std::size_t total = S * V * T;
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;

  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < total;) {
      const std::size_t s = i / (V * T), v = (i / T) % V, t = i % T;
      out.trials[s][v][t] = sim::run_trial(profiles[s], opts[v], trial_seed(config, t));
      if (options.progress) {
        std::lock_guard lock(progress_mutex);
        options.progress(++done, total);
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(total)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  out.summary.resize(S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t v = 0; v < V; ++v)
      out.summary[s].push_back(summarize(profiles[s].name, config.values[v], out.trials[s][v]));
  return out;
}

std::string trials_csv(const ExperimentResult& r) {
  std::string csv = sim::csv_header() + "\n";
  for (const auto& scenario : r.trials)
    for (const auto& point : scenario)
      for (const auto& t : point) csv += sim::csv_row(t) + "\n";
  return csv;
}

std::string summary_csv(const ExperimentResult& r) {
  const auto& c = r.config;
  std::string csv =
      "scenario,mode,pipeline,sweep,value,trials,failed,failure_rate,mean_P,mean_m2,median_m2,std_m2,se_m2\n";
  for (const auto& scenario : r.summary)
    for (const auto& s : scenario) {
      csv += s.scenario + "," + std::string(sim::to_string(c.mode)) + "," +
             std::string(sim::to_string(c.pipeline)) + "," +
             (c.sweep == SweepVariable::paths ? "P" : "distance_m") + "," + num(s.value) + "," +
             std::to_string(s.trials) + "," + std::to_string(s.failed) + "," + num(s.failure_rate()) + "," +
             num(s.mean_paths) + "," + num(s.mean) + "," + num(s.median) + "," + num(s.stddev) + "," +
             num(s.std_error) + "\n";
    }
  return csv;
}

std::string summary_text(const ExperimentResult& r) {
  const auto& c = r.config;
  const bool by_paths = c.sweep == SweepVariable::paths;
  std::string out = "mode " + std::string(sim::to_string(c.mode)) + ", pipeline " +
                    std::string(sim::to_string(c.pipeline)) + ", " + std::to_string(c.trials) +
                    " trials per point, base seed " + std::to_string(c.base_seed) + "\n\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %12s %12s %12s\n", "scenario", by_paths ? "P" : "dist_m",
                "fail%", "mean_P", "mean_m2", "median_m2", "std_m2");
  out += line;
  for (const auto& scenario : r.summary)
    for (const auto& s : scenario) {
      std::snprintf(line, sizeof line, "%-16s %8g %8.1f %8.2f %12.4g %12.4g %12.4g\n", s.scenario.c_str(), s.value,
                    100.0 * s.failure_rate(), s.mean_paths, s.mean, s.median, s.stddev);
      out += line;
      if (s.failed == s.trials && !s.top_failure.empty()) out += "    all failed: " + s.top_failure + "\n";
    }

  // Welch z of each step in the expected direction: error falls with P and
  // grows with distance. z > 1.645 is significant at one-sided 95%.
  out += "\ntrend (" + std::string(by_paths ? "mean error decreasing in P" : "mean error increasing with distance") +
         ", Welch z per step)\n";
  for (const auto& scenario : r.summary) {
    if (scenario.empty()) continue;
    std::string steps;
    bool monotone = true, significant = true;
    for (std::size_t v = 1; v < scenario.size(); ++v) {
      const double z = by_paths ? welch_z(scenario[v - 1], scenario[v]) : welch_z(scenario[v], scenario[v - 1]);
      if (!(z > 0)) monotone = false;
      if (!(z > 1.645)) significant = false;
      steps += " " + fmt("%.2f", z);
    }
    out += "  " + scenario.front().scenario + ": monotone " + (monotone ? "yes" : "no") + ", all steps significant " +
           (significant ? "yes" : "no") + ";" + (steps.empty() ? " (single point)" : steps) + "\n";
  }
  return out;
}

void prepare_output(const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw SensingError(ErrorKind::io, "cannot create output directory " + directory + ": " + ec.message());
  const fs::path probe = fs::path(directory) / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f || !(f << "ok") || !f.flush())
      throw SensingError(ErrorKind::io, "output directory " + directory + " is not writable");
  }
  fs::remove(probe, ec);
}

void write_outputs(const ExperimentResult& r, const std::string& directory) {
  namespace fs = std::filesystem;
  auto write = [&](const char* name, const std::string& content) {
    const fs::path path = fs::path(directory) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << content) || !f.flush()) throw SensingError(ErrorKind::io, "cannot write " + path.string());
  };
  write("trials.csv", trials_csv(r));
  write("summary.csv", summary_csv(r));
  write("summary.txt", summary_text(r));
  write("config.json", config_to_json(r.config).dump(2) + "\n");
}

}  // namespace hvsense::exp
