// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hvsense/channel_sim.hpp"

using namespace hvsense;
using namespace hvsense::sim;

TEST_CASE("sample_scene: deterministic, NLoS only, consistent layout") {
  const auto layout = ClusterLayout::rectangle(3.0, 6.0);
  const auto a = sample_scene(ScenarioProfile::highway(), 50.0, layout, 42);
  const auto b = sample_scene(ScenarioProfile::highway(), 50.0, layout, 42);
  REQUIRE(a.scatterers.size() == b.scatterers.size());
  for (std::size_t i = 0; i < a.scatterers.size(); ++i) {
    CHECK(a.scatterers[i].position == b.scatterers[i].position);
    CHECK(a.scatterers[i].cluster == b.scatterers[i].cluster);
  }
  CHECK(a.hv_pose.position == b.hv_pose.position);
  CHECK(a.clock_gap == b.clock_gap);
  CHECK(a.hv_pose.position.norm() == doctest::Approx(50.0).epsilon(1e-12));

  const auto v = a.vertices();
  CHECK((v[0] - v[1]).norm() == doctest::Approx(3.0));
  CHECK((v[0] - v[3]).norm() == doctest::Approx(6.0));
  CHECK((v[2] - (v[1] + v[3] - v[0])).norm() < 1e-12);
  for (const auto& s : a.scatterers) {
    CHECK(cluster_index(s.cluster) >= 1);
    CHECK(s.position.norm() >= ScenarioProfile::highway().clearance);
  }
  // Every emitted path bounces once; the forward model accepts all of them.
  CHECK(forward_observe(a).size() == a.scatterers.size());
}

TEST_CASE("sample_scene: rural realizes more paths than highway at 50 m") {
  double highway = 0.0, rural = 0.0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    highway += static_cast<double>(
        sample_scene(ScenarioProfile::highway(), 50.0, ClusterLayout::single(), s).scatterers.size());
    rural += static_cast<double>(
        sample_scene(ScenarioProfile::rural(), 50.0, ClusterLayout::single(), s).scatterers.size());
  }
  MESSAGE("mean visible paths: highway " << highway / 1000 << ", rural " << rural / 1000);
  CHECK(rural > highway);
}

TEST_CASE("sample_scene: errors") {
  ScenarioProfile sparse = ScenarioProfile::highway();
  sparse.scatterer_density = 1e-9;
  try {
    sample_scene(sparse, 50.0, ClusterLayout::single(), 1);
    FAIL("expected empty scene");
  } catch (const SensingError& e) {
    CHECK(e.kind() == ErrorKind::empty_scene);
  }
  CHECK_THROWS_AS(sample_scene(ScenarioProfile::rural(), 0.0, ClusterLayout::single(), 1), SensingError);
}

TEST_CASE("path_gain: log-distance law, deterministic phase") {
  ScenarioProfile p = ScenarioProfile::highway();
  p.path_loss_exponent = 2.0;
  const auto near = path_gain(100.0, p, 5);
  const auto far = path_gain(200.0, p, 5);
  CHECK(std::abs(far) / std::abs(near) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::arg(far) == doctest::Approx(std::arg(near)));
  CHECK(path_gain(100.0, p, 5) == near);
  CHECK(path_gain(100.0, p, 6) != near);
  CHECK(path_snr_db(100.0, p, {}) - path_snr_db(200.0, p, {}) == doctest::Approx(20 * std::log10(2.0)));
}

TEST_CASE("path_sinr: leakage from other paths lowers SINR below SNR") {
  RadioConfig radio;
  const double snr[] = {30.0, 10.0};
  const auto sinr = path_sinr_db(snr, radio);
  CHECK(sinr[0] < 30.0);
  CHECK(sinr[1] < 10.0);
  // Weak path: 10 dB over unit noise plus 20/1024 of a 30 dB path.
  CHECK(sinr[1] == doctest::Approx(10.0 - 10 * std::log10(1.0 + 1000.0 * 20.0 / 1024.0)));
  const double alone[] = {10.0};
  CHECK(path_sinr_db(alone, radio)[0] == doctest::Approx(10.0));
}

TEST_CASE("full-signal detection succeeds at 50 m under the default profiles") {
  for (const auto& profile : {ScenarioProfile::highway(), ScenarioProfile::rural()}) {
    TrialOptions opt;
    opt.pipeline = Pipeline::full_signal;
    int enough = 0;
    const int trials = 40;
    for (int s = 0; s < trials; ++s) enough += run_trial(profile, opt, 7000 + s).paths >= 4;
    MESSAGE(profile.name << ": " << enough << "/" << trials << " trials with >= 4 detections");
    CHECK(enough >= 0.9 * trials);
  }
}

TEST_CASE("positioning_error metric") {
  std::array<Vec2, 4> truth{Vec2(1, 2), Vec2(3, 4), Vec2(5, 6), Vec2(7, 8)};
  CHECK(positioning_error(truth, truth) == 0.0);
  auto moved = truth;
  moved[2] += Vec2(0.6, -0.8);
  CHECK(positioning_error(moved, truth) == doctest::Approx(0.25));
}

TEST_CASE("run_trial: noiseless geometric multi is exact") {
  TrialOptions opt;
  opt.mode = Mode::multi;
  opt.noiseless = true;
  opt.target_paths = 8;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto r = run_trial(ScenarioProfile::rural(), opt, s);
    REQUIRE_MESSAGE(!r.failed, r.reason);
    CHECK(r.paths == 8);
    CHECK(*r.error_m2 <= 1e-6);
    CHECK(std::accumulate(r.partition.begin(), r.partition.end(), std::size_t{0}) == 8);
    for (auto n : r.partition) CHECK(n >= 1);
  }
}

TEST_CASE("run_trial: seed determinism and failure reporting") {
  TrialOptions opt;
  opt.mode = Mode::multi;
  const auto a = run_trial(ScenarioProfile::highway(), opt, 99);
  const auto b = run_trial(ScenarioProfile::highway(), opt, 99);
  CHECK(csv_row(a) == csv_row(b));
  for (std::size_t k = 0; k < 4; ++k) CHECK(a.estimate[k] == b.estimate[k]);

  opt.target_paths = 5;
  const auto f = run_trial(ScenarioProfile::highway(), opt, 3);
  CHECK(f.failed);
  CHECK(!f.error_m2);
  CHECK(f.reason.rfind("infeasible: P<6", 0) == 0);

  opt.mode = Mode::single;
  opt.target_paths = 3;
  const auto g = run_trial(ScenarioProfile::highway(), opt, 3);
  CHECK(g.failed);
  CHECK(g.reason.rfind("infeasible: P<4", 0) == 0);

  // Error present iff not failed.
  opt.target_paths.reset();
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto r = run_trial(ScenarioProfile::highway(), opt, s);
    CHECK(r.failed == !r.error_m2.has_value());
  }
}

TEST_CASE("run_trial: noiseless full-signal single cluster") {
  TrialOptions opt;
  opt.pipeline = Pipeline::full_signal;
  opt.noiseless = true;
  opt.target_paths = 8;
  std::vector<double> errs;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto r = run_trial(ScenarioProfile::highway(), opt, s);
    if (!r.failed) errs.push_back(*r.error_m2);
  }
  REQUIRE(errs.size() >= 8);
  std::sort(errs.begin(), errs.end());
  MESSAGE("median noiseless full-signal error " << errs[errs.size() / 2] << " m^2");
  CHECK(errs[errs.size() / 2] < 50.0);
}

TEST_CASE("profile json round-trip and validation") {
  const auto rural = ScenarioProfile::rural();
  const auto back = profile_from_json(profile_to_json(rural));
  CHECK(profile_to_json(back) == profile_to_json(rural));

  const auto custom = profile_from_json({{"base", "rural"}, {"name", "dense"}, {"scatterer_density", 0.01},
                                         {"noise", {{"toa_sigma_s", 2e-9}}}});
  CHECK(custom.name == "dense");
  CHECK(custom.scatterer_density == 0.01);
  CHECK(custom.noise.toa_sigma_s == 2e-9);
  CHECK(custom.path_loss_exponent == rural.path_loss_exponent);

  auto message = [](const nlohmann::json& j) {
    try {
      profile_from_json(j);
    } catch (const SensingError& e) {
      CHECK(e.kind() == ErrorKind::configuration);
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message({{"foo", 1}}).find("profile.foo") != std::string::npos);
  CHECK(message({{"noise", {{"bar", 1}}}}).find("profile.noise.bar") != std::string::npos);
  CHECK(message({{"visibility", 1.5}}).find("visibility") != std::string::npos);
  CHECK(message({{"visibility", "high"}}).find("profile.visibility") != std::string::npos);
  CHECK(message({{"base", "urban"}}).find("urban") != std::string::npos);

  CHECK(ScenarioProfile::rural().scatterer_density >= ScenarioProfile::highway().scatterer_density);
}

TEST_CASE("csv rows") {
  TrialResult r;
  r.seed = 12;
  r.scenario = "highway";
  r.mode = Mode::multi;
  r.distance = 50;
  r.paths = 5;
  r.partition = {2, 1, 1, 1};
  r.failed = true;
  r.reason = "infeasible: P<6 (5 paths, \"four\" clusters)";
  const std::string row = csv_row(r);
  CHECK(row == "12,highway,multi,geometric,50,5,2,1,1,1,,1,\"infeasible: P<6 (5 paths, \"\"four\"\" clusters)\"");
  const std::string header = csv_header();
  CHECK(std::count(header.begin(), header.end(), ',') == 12);
  CHECK(std::count(row.begin(), row.end(), ',') >= 12);
}

TEST_CASE("calibration reproduces the default geometric noise model") {
  const auto cal = calibrate_noise(ScenarioProfile::highway(), RadioConfig{}, 50.0, 40, 11);
  const auto& d = ScenarioProfile::highway().noise;
  MESSAGE("floor " << cal.noise.angle_floor_deg << " deg, at 0 dB " << cal.noise.angle_deg_at_0db
                   << " deg, toa " << cal.noise.toa_sigma_s << " s, detection "
                   << cal.noise.detection_sinr_db << " dB");
  CHECK(cal.matched > 0.6 * static_cast<double>(cal.paths));
  CHECK(cal.noise.angle_deg_at_0db == doctest::Approx(d.angle_deg_at_0db).epsilon(0.5));
  CHECK(cal.noise.toa_sigma_s == doctest::Approx(d.toa_sigma_s).epsilon(0.25));
  CHECK(std::abs(cal.noise.detection_sinr_db - d.detection_sinr_db) <= 4.0);
}
