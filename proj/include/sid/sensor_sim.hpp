#pragma once

// Synthetic paired data: a clean display-referred scene stands in for the
// long-exposure reference, and a sensor forward model (Poisson shot noise,
// Gaussian read noise, quantization) produces the short-exposure raw input.

#include <cstdint>

#include "sid/image.hpp"
#include "sid/raw.hpp"

namespace sid::sim {

// Display gamma of the reference rendering; the simulator linearizes with it.
inline constexpr double kReferenceGamma = 2.2;

struct SimConfig {
  double ratio = 100.0;
  // Photons collected at DN = white_level for the reference exposure.
  double full_well_photons = 5000.0;
  double read_noise_dn = 4.0;
  SensorMeta sensor;
  std::uint64_t seed = 0;

  void validate() const;
};

// Desk defaults: 14-bit sensor, black level 512, camera-native color cast
// undone by white-balance gains (2.0, 1.0, 1.5).
SimConfig default_config(Cfa cfa, double ratio = 100.0, std::uint64_t seed = 0);

struct ScenePair {
  RgbImage reference;
  RawMosaic input;
  double ratio = 1.0;
};

// Deterministic per seed; smooth gradients, hard edges and colored patches,
// with guaranteed near-black and near-white regions.
RgbImage render_scene(std::uint64_t seed, int width, int height);

// Linear camera-space mosaic the sensor sees at the reference exposure:
// scene^gamma divided by the white-balance gain of each site's color.
Mosaic linear_mosaic(const RgbImage& scene, const SensorMeta& sensor);

ScenePair simulate_pair(const RgbImage& scene, const SimConfig& cfg);

}  // namespace sid::sim
