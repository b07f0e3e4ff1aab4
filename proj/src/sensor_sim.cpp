#include "sid/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sid/error.hpp"

namespace sid::sim {
namespace {

double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

struct Shape {
  bool disk;
  double cx, cy, rx, ry;
  float color[3];
};

bool inside(const Shape& s, double x, double y) {
  const double dx = (x - s.cx) / s.rx;
  const double dy = (y - s.cy) / s.ry;
  return s.disk ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
}

}  // namespace

void SimConfig::validate() const {
  sensor.validate();
  require(std::isfinite(ratio) && ratio >= 1.0, "simulation ratio must be >= 1");
  require(std::isfinite(full_well_photons) && full_well_photons > 0.0,
          "full_well_photons must be positive");
  require(std::isfinite(read_noise_dn) && read_noise_dn >= 0.0,
          "read_noise_dn must be non-negative");
}

SimConfig default_config(Cfa cfa, double ratio, std::uint64_t seed) {
  SimConfig cfg;
  cfg.ratio = ratio;
  cfg.full_well_photons = 5000.0;
  cfg.read_noise_dn = 4.0;
  cfg.sensor.cfa = cfa;
  cfg.sensor.black_level = 512;
  cfg.sensor.white_level = 16383;
  cfg.sensor.exposure_s = 10.0 / ratio;
  cfg.sensor.wb = {2.0, 1.0, 1.5};
  cfg.seed = seed;
  return cfg;
}

RgbImage render_scene(std::uint64_t seed, int width, int height) {
  require(width > 0 && height > 0, "render_scene: empty size");
  std::mt19937_64 rng(seed ^ 0x5c3e5eedULL);

  // Background: per-channel planar gradient kept inside [0.1, 0.9].
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = uniform(rng, 0.25, 0.75);
    const double span = std::min(base[c] - 0.1, 0.9 - base[c]);
    gx[c] = uniform(rng, -span, span);
    gy[c] = uniform(rng, -span, span) * 0.5;
  }
  const double freq = uniform(rng, 2.0, 6.0);
  const double phase = uniform(rng, 0.0, 6.283185307179586);

  std::vector<Shape> shapes;
  const int count = 3 + int(rng() % 4);
  for (int i = 0; i < count; ++i) {
    Shape s{};
    s.disk = (rng() & 1) != 0;
    s.cx = uniform(rng, 0.0, width);
    s.cy = uniform(rng, 0.0, height);
    s.rx = uniform(rng, 0.08, 0.25) * width;
    s.ry = uniform(rng, 0.08, 0.25) * height;
    for (float& v : s.color) v = float(uniform(rng, 0.15, 0.85));
    shapes.push_back(s);
  }
  // Near-black and near-white patches, drawn last so they always survive.
  for (int i = 0; i < 2; ++i) {
    Shape s{};
    s.disk = false;
    s.rx = 0.05 * width + 1.0;
    s.ry = 0.05 * height + 1.0;
    s.cx = uniform(rng, s.rx, width - s.rx);
    s.cy = uniform(rng, s.ry, height - s.ry);
    const float v = i == 0 ? 0.02f : 0.98f;
    for (float& c : s.color) c = v;
    shapes.push_back(s);
  }

  RgbImage img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = width > 1 ? double(x) / (width - 1) : 0.0;
      const double v = height > 1 ? double(y) / (height - 1) : 0.0;
      const double ripple = 0.08 * std::sin(freq * 6.283185307179586 * u + phase) *
                            std::cos(0.5 * freq * 6.283185307179586 * v);
      float px[3];
      for (int c = 0; c < 3; ++c)
        px[c] = float(std::clamp(base[c] + gx[c] * (u - 0.5) * 2.0 + gy[c] * (v - 0.5) * 2.0 +
                                     (c == 1 ? ripple : 0.0),
                                 0.0, 1.0));
      for (const Shape& s : shapes)
        if (inside(s, x + 0.5, y + 0.5))
          for (int c = 0; c < 3; ++c) px[c] = s.color[c];
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = px[c];
    }
  return img;
}

Mosaic linear_mosaic(const RgbImage& scene, const SensorMeta& sensor) {
  const double gains[3] = {sensor.wb.r, sensor.wb.g, sensor.wb.b};
  Mosaic out(scene.width, scene.height);
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x) {
      const int c = raw::cfa_color(sensor.cfa, y, x);
      const double v = std::clamp(double(scene.at(c, y, x)), 0.0, 1.0);
      out.at(y, x) = float(std::pow(v, kReferenceGamma) / gains[c]);
    }
  return out;
}

ScenePair simulate_pair(const RgbImage& scene, const SimConfig& cfg) {
  cfg.validate();
  const int period = cfg.sensor.cfa_period();
  require(scene.width % period == 0 && scene.height % period == 0,
          "simulate_pair: scene dimensions must be divisible by the CFA period");

  const Mosaic lin = linear_mosaic(scene, cfg.sensor);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> read_noise(0.0, 1.0);
  const double range = double(cfg.sensor.white_level - cfg.sensor.black_level);

  ScenePair pair;
  pair.reference = scene;
  pair.ratio = cfg.ratio;
  pair.input.meta = cfg.sensor;
  pair.input.pixels = Plane2D<std::uint16_t>(scene.width, scene.height);
  for (std::size_t i = 0; i < lin.data.size(); ++i) {
    const double expected = double(lin.data[i]) / cfg.ratio * cfg.full_well_photons;
    double photons = 0.0;
    if (expected > 0.0) {
      std::poisson_distribution<long long> shot(expected);
      photons = double(shot(rng));
    }
    double dn = cfg.sensor.black_level + photons / cfg.full_well_photons * range;
    if (cfg.read_noise_dn > 0.0) dn += cfg.read_noise_dn * read_noise(rng);
    dn = std::clamp(std::nearbyint(dn), 0.0, double(cfg.sensor.white_level));
    pair.input.pixels.data[i] = static_cast<std::uint16_t>(dn);
  }
  return pair;
}

}  // namespace sid::sim
