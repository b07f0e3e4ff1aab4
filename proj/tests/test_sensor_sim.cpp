#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "sid/isp.hpp"
#include "sid/metrics.hpp"
#include "sid/sensor_sim.hpp"

using namespace sid;

namespace {

double linearize(double v) { return std::pow(v, 2.2); }

}  // namespace

TEST_SUITE("sensor_sim") {

TEST_CASE("render_scene is deterministic and seed dependent") {
  const RgbImage a = sim::render_scene(11, 48, 36);
  CHECK(a == sim::render_scene(11, 48, 36));
  CHECK_FALSE(a == sim::render_scene(12, 48, 36));
  for (float v : a.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("rendered histogram spans [0.05, 0.95]") {
  for (std::uint64_t seed : {1u, 2u, 3u, 77u}) {
    const RgbImage img = sim::render_scene(seed, 64, 64);
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    CHECK(*lo <= 0.05f);
    CHECK(*hi >= 0.95f);
  }
}

TEST_CASE("noiseless limit recovers the linear mosaic") {
  const RgbImage scene = sim::render_scene(5, 24, 24);
  sim::SimConfig cfg = sim::default_config(Cfa::BayerRggb, 10.0, 9);
  cfg.full_well_photons = 1e9;
  cfg.read_noise_dn = 0.0;
  cfg.sensor.black_level = 0;
  cfg.sensor.white_level = 65535;
  const auto pair = sim::simulate_pair(scene, cfg);
  const Mosaic n = raw::normalize(pair.input);
  const Mosaic lin = sim::linear_mosaic(scene, cfg.sensor);
  double worst = 0.0;
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) {
      const int c = raw::cfa_color(Cfa::BayerRggb, y, x);
      const double gains[3] = {cfg.sensor.wb.r, cfg.sensor.wb.g, cfg.sensor.wb.b};
      const double expect = linearize(scene.at(c, y, x)) / gains[c];
      CHECK(double(lin.at(y, x)) == doctest::Approx(expect).epsilon(1e-6));
      worst = std::max(worst, std::abs(double(n.at(y, x)) * cfg.ratio - expect));
    }
  CHECK(worst < 1e-3);
}

TEST_CASE("ratio 1 without noise matches within half a DN") {
  const RgbImage scene = sim::render_scene(6, 12, 12);
  sim::SimConfig cfg = sim::default_config(Cfa::XTrans, 1.0, 3);
  cfg.full_well_photons = 1e13;
  cfg.read_noise_dn = 0.0;
  const auto pair = sim::simulate_pair(scene, cfg);
  const Mosaic n = raw::normalize(pair.input);
  const Mosaic lin = sim::linear_mosaic(scene, cfg.sensor);
  const double dn = 1.0 / (cfg.sensor.white_level - cfg.sensor.black_level);
  for (std::size_t i = 0; i < n.data.size(); ++i)
    CHECK(std::abs(double(n.data[i]) - double(lin.data[i])) <= 0.51 * dn);
}

TEST_CASE("shot noise variance on a constant patch") {
  const RgbImage scene = testing::constant_image(128, 128, 0.5f, 0.5f, 0.5f);
  sim::SimConfig cfg = sim::default_config(Cfa::BayerRggb, 10.0, 21);
  cfg.read_noise_dn = 0.0;
  cfg.sensor.wb = {1.0, 1.0, 1.0};
  const auto pair = sim::simulate_pair(scene, cfg);
  const Mosaic n = raw::normalize(pair.input);
  double mean = 0.0, var = 0.0;
  for (float v : n.data) mean += v;
  mean /= double(n.data.size());
  for (float v : n.data) var += (v - mean) * (v - mean);
  var /= double(n.data.size() - 1);
  const double lin = linearize(0.5);
  const double expected = lin / (cfg.ratio * cfg.full_well_photons);
  CHECK(var == doctest::Approx(expected).epsilon(0.2));
}

TEST_CASE("expected normalized input times ratio equals the clean mosaic") {
  // Includes read noise; black level keeps values away from the clip.
  const RgbImage scene = testing::constant_image(96, 96, 0.6f, 0.45f, 0.3f);
  const sim::SimConfig cfg = sim::default_config(Cfa::BayerRggb, 100.0, 4);
  const auto pair = sim::simulate_pair(scene, cfg);
  const Mosaic n = raw::normalize(pair.input);
  const Mosaic lin = sim::linear_mosaic(scene, cfg.sensor);
  for (int color = 0; color < 3; ++color) {
    double sum = 0.0, sum2 = 0.0, clean = 0.0;
    int count = 0;
    for (int y = 0; y < 96; ++y)
      for (int x = 0; x < 96; ++x) {
        if (raw::cfa_color(Cfa::BayerRggb, y, x) != color) continue;
        const double v = double(n.at(y, x)) * cfg.ratio;
        sum += v;
        sum2 += v * v;
        clean = lin.at(y, x);
        ++count;
      }
    const double mean = sum / count;
    const double se = std::sqrt((sum2 / count - mean * mean) / count);
    CAPTURE(color);
    CHECK(std::abs(mean - clean) <= 3.0 * se);
  }
}

TEST_CASE("simulation is deterministic and noise grows with the ratio") {
  const RgbImage scene = sim::render_scene(8, 48, 48);
  const auto cfg = sim::default_config(Cfa::BayerRggb, 100.0, 5);
  const auto a = sim::simulate_pair(scene, cfg);
  const auto b = sim::simulate_pair(scene, cfg);
  CHECK(a.input == b.input);
  CHECK(a.reference == scene);

  double prev_snr = 1e9;
  for (double ratio : {10.0, 50.0, 100.0, 300.0}) {
    double snr = 0.0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto pair = sim::simulate_pair(scene, sim::default_config(Cfa::BayerRggb, ratio, seed));
      const Mosaic lin = sim::linear_mosaic(scene, pair.input.meta);
      const Mosaic n = raw::normalize(pair.input);
      double sig = 0.0, err = 0.0;
      for (std::size_t i = 0; i < n.data.size(); ++i) {
        const double d = double(n.data[i]) * ratio - lin.data[i];
        sig += double(lin.data[i]) * lin.data[i];
        err += d * d;
      }
      snr += 10.0 * std::log10(sig / err);
    }
    CAPTURE(ratio);
    CHECK(snr < prev_snr);
    prev_snr = snr;
  }
}

TEST_CASE("config validation") {
  sim::SimConfig cfg = sim::default_config(Cfa::BayerRggb);
  CHECK(cfg.sensor.black_level == 512);
  CHECK(cfg.sensor.white_level == 16383);
  CHECK(cfg.full_well_photons == 5000.0);
  CHECK(cfg.read_noise_dn == 4.0);
  cfg.full_well_photons = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = sim::default_config(Cfa::BayerRggb);
  cfg.read_noise_dn = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(sim::simulate_pair(sim::render_scene(1, 10, 10), sim::default_config(Cfa::XTrans)),
                  Error);
}

}  // TEST_SUITE
