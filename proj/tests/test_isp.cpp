#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "sid/isp.hpp"
#include "sid/metrics.hpp"
#include "sid/sensor_sim.hpp"

using namespace sid;

namespace {

RawMosaic to_raw(const Mosaic& m, const SensorMeta& meta) {
  RawMosaic r;
  r.meta = meta;
  r.pixels = Plane2D<std::uint16_t>(m.width, m.height);
  const double range = meta.white_level - meta.black_level;
  for (std::size_t i = 0; i < m.data.size(); ++i)
    r.pixels.data[i] = std::uint16_t(std::lround(meta.black_level + m.data[i] * range));
  return r;
}

double channel_mean(const RgbImage& img, int c) {
  double s = 0.0;
  for (std::size_t i = 0; i < img.plane_size(); ++i) s += img.plane(c)[i];
  return s / double(img.plane_size());
}

}  // namespace

TEST_SUITE("isp") {

TEST_CASE("demosaic of a constant is constant") {
  for (Cfa cfa : {Cfa::BayerRggb, Cfa::XTrans}) {
    const RgbImage out = isp::demosaic_bilinear(Mosaic(12, 12, 0.4f), cfa);
    for (float v : out.data) CHECK(v == doctest::Approx(0.4f));
  }
}

TEST_CASE("demosaic keeps native samples") {
  for (Cfa cfa : {Cfa::BayerRggb, Cfa::XTrans}) {
    const Mosaic m = testing::random_mosaic(18, 12, 4);
    const RgbImage out = isp::demosaic_bilinear(m, cfa);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 18; ++x) CHECK(out.at(raw::cfa_color(cfa, y, x), y, x) == m.at(y, x));
  }
}

TEST_CASE("bilinear demosaic reproduces a horizontal ramp away from borders") {
  const int w = 40, h = 20;
  Mosaic m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(y, x) = 0.1f + 0.02f * float(x);
  const RgbImage out = isp::demosaic_bilinear(m, Cfa::BayerRggb);
  double worst = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 2; y < h - 2; ++y)
      for (int x = 2; x < w - 2; ++x)
        worst = std::max(worst, std::abs(double(out.at(c, y, x)) - (0.1 + 0.02 * x)));
  CHECK(worst < 1.0 / 255.0);
}

TEST_CASE("demosaic rejects incompatible dimensions") {
  CHECK_THROWS_AS(isp::demosaic_bilinear(Mosaic(5, 4), Cfa::BayerRggb), Error);
  CHECK_THROWS_AS(isp::demosaic_bilinear(Mosaic(12, 8), Cfa::XTrans), Error);
}

TEST_CASE("white balance examples") {
  const RgbImage img = testing::random_image(4, 4, 2);
  CHECK(isp::white_balance(img, {1, 1, 1}) == img);
  const RgbImage px = isp::white_balance(testing::constant_image(1, 1, 0.1f, 0.2f, 0.2f), {2, 1, 1.5});
  CHECK(px.at(0, 0, 0) == doctest::Approx(0.2));
  CHECK(px.at(1, 0, 0) == doctest::Approx(0.2));
  CHECK(px.at(2, 0, 0) == doctest::Approx(0.3));
  const RgbImage sat = isp::white_balance(img, {1e9, 1e9, 1e9});
  for (std::size_t i = 0; i < img.data.size(); ++i)
    if (img.data[i] > 0.0f) CHECK(sat.data[i] == 1.0f);
  CHECK_THROWS_AS(isp::white_balance(img, {0, 1, 1}), Error);
}

TEST_CASE("gamma encode") {
  RgbImage img(3, 1);
  img.data = {0.0f, 1.0f, 0.5f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f};
  const RgbImage g = isp::gamma_encode(img, 2.2);
  CHECK(g.data[0] == 0.0f);
  CHECK(g.data[1] == 1.0f);
  CHECK(std::abs(g.data[2] - 0.7297) < 1e-4);
  const RgbImage src = testing::random_image(16, 16, 8);
  const RgbImage enc = isp::gamma_encode(src);
  for (std::size_t i = 0; i < src.data.size(); ++i)
    for (std::size_t j = 0; j < 8; ++j)
      if (src.data[i] <= src.data[j]) CHECK(enc.data[i] <= enc.data[j]);
}

TEST_CASE("classic pipeline beats a nearest-cell upsample on a noiseless pair") {
  const RgbImage scene = sim::render_scene(3, 64, 64);
  sim::SimConfig cfg = sim::default_config(Cfa::BayerRggb, 1.0, 1);
  cfg.full_well_photons = 1e12;
  cfg.read_noise_dn = 0.0;
  const auto pair = sim::simulate_pair(scene, cfg);
  const isp::IspParams params{cfg.sensor.wb};
  const RgbImage classic = isp::classic_pipeline(pair.input, AmplificationRatio(1.0), params);

  // Naive: each 2x2 cell's R, G1, B samples replicated over the cell.
  const Mosaic n = raw::normalize(pair.input);
  RgbImage naive(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const int cy = y & ~1, cx = x & ~1;
      naive.at(0, y, x) = n.at(cy, cx);
      naive.at(1, y, x) = n.at(cy, cx + 1);
      naive.at(2, y, x) = n.at(cy + 1, cx + 1);
    }
  const RgbImage naive_out = isp::gamma_encode(isp::white_balance(naive, cfg.sensor.wb));
  const double p_classic = metrics::psnr(classic, scene);
  const double p_naive = metrics::psnr(naive_out, scene);
  CHECK(std::isfinite(p_classic));
  CHECK(p_classic > p_naive);
  CHECK(classic == isp::classic_pipeline(pair.input, AmplificationRatio(1.0), params));
}

TEST_CASE("classic pipeline edge cases") {
  SensorMeta meta;
  meta.black_level = 512;
  meta.white_level = 16383;
  RawMosaic black;
  black.meta = meta;
  black.pixels = Plane2D<std::uint16_t>(8, 8, 512);
  const RgbImage out = isp::classic_pipeline(black, AmplificationRatio(300.0), {meta.wb});
  for (float v : out.data) CHECK(v == 0.0f);

  const RawMosaic noisy = to_raw(testing::random_mosaic(12, 12, 9), meta);
  const RgbImage hot = isp::classic_pipeline(noisy, AmplificationRatio(300.0), {{2.0, 1.0, 1.5}});
  for (float v : hot.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("match_channel_means") {
  const RgbImage ref = testing::random_image(10, 10, 12);
  const RgbImage same = isp::match_channel_means(ref, ref);
  for (std::size_t i = 0; i < ref.data.size(); ++i) CHECK(same.data[i] == doctest::Approx(ref.data[i]));
  RgbImage half = ref;
  for (float& v : half.data) v *= 0.5f;
  const RgbImage m = isp::match_channel_means(half, ref);
  for (int c = 0; c < 3; ++c) CHECK(channel_mean(m, c) == doctest::Approx(channel_mean(ref, c)).epsilon(1e-6));
  RgbImage dark = ref;
  std::fill(dark.plane(1), dark.plane(1) + dark.plane_size(), 0.0f);
  const RgbImage d = isp::match_channel_means(dark, ref);
  for (std::size_t i = 0; i < d.plane_size(); ++i) CHECK(d.plane(1)[i] == 0.0f);
}

TEST_CASE("burst median order statistics") {
  const RgbImage f = testing::random_image(6, 6, 5);
  std::vector<RgbImage> same(8, f);
  CHECK(isp::burst_median(same) == f);

  std::vector<RgbImage> frames = {testing::constant_image(1, 1, 0, 0, 0), testing::constant_image(1, 1, 0, 0, 0),
                                  testing::constant_image(1, 1, 0, 0, 0), testing::constant_image(1, 1, 1, 1, 1)};
  CHECK(isp::burst_median(frames).data[0] == 0.0f);

  std::vector<RgbImage> many;
  for (std::uint64_t s = 0; s < 7; ++s) many.push_back(testing::random_image(5, 5, 40 + s));
  const RgbImage med = isp::burst_median(many);
  std::reverse(many.begin(), many.end());
  std::swap(many[1], many[4]);
  CHECK(isp::burst_median(many) == med);
  std::vector<RgbImage> two = {testing::constant_image(1, 1, 0.2f, 0.2f, 0.2f),
                               testing::constant_image(1, 1, 0.6f, 0.6f, 0.6f)};
  CHECK(isp::burst_median(two).data[0] == doctest::Approx(0.4));
  CHECK_THROWS_AS(isp::burst_median(std::vector<RgbImage>{}), Error);
}

TEST_CASE("burst median reduces error on simulated frames") {
  const RgbImage scene = sim::render_scene(17, 36, 36);
  double med_sum = 0.0, single_sum = 0.0;
  for (std::uint64_t trial = 0; trial < 4; ++trial) {
    const sim::SimConfig base = sim::default_config(Cfa::BayerRggb, 100.0, trial * 100);
    const RgbImage clean = isp::demosaic_bilinear(sim::linear_mosaic(scene, base.sensor), Cfa::BayerRggb);
    std::vector<RgbImage> frames;
    double single = 0.0;
    for (std::uint64_t k = 0; k < 8; ++k) {
      sim::SimConfig cfg = base;
      cfg.seed = trial * 100 + k;
      const auto pair = sim::simulate_pair(scene, cfg);
      frames.push_back(isp::demosaic_bilinear(raw::amplify(raw::normalize(pair.input), AmplificationRatio(cfg.ratio)),
                                              Cfa::BayerRggb));
      single += metrics::mse(frames.back(), clean);
    }
    single_sum += single / 8.0;
    med_sum += metrics::mse(isp::burst_median(frames), clean);
  }
  CHECK(med_sum < 0.5 * single_sum);
}

TEST_CASE("histogram stretch") {
  const RgbImage flat = testing::constant_image(8, 8, 0.3f, 0.3f, 0.3f);
  CHECK(isp::histogram_stretch(flat) == flat);

  // Dense gray ramp spanning [0, 1].
  RgbImage ramp(256, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 256; ++x)
      for (int c = 0; c < 3; ++c) ramp.at(c, y, x) = float(x) / 255.0f;
  const RgbImage s = isp::histogram_stretch(ramp);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.data.size(); ++i)
    worst = std::max(worst, std::abs(double(s.data[i]) - ramp.data[i]));
  CHECK(worst < 0.02);

  const RgbImage img = sim::render_scene(9, 48, 48);
  const RgbImage once = isp::histogram_stretch(img);
  const RgbImage twice = isp::histogram_stretch(once);
  for (std::size_t i = 0; i < once.data.size(); ++i) CHECK(std::abs(twice.data[i] - once.data[i]) <= 1e-6f);
  // Ordering is preserved within a channel.
  for (std::size_t i = 1; i < img.plane_size(); ++i)
    if (img.data[i - 1] < img.data[i]) CHECK(once.data[i - 1] <= once.data[i]);
}

}  // TEST_SUITE
