#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sid/image.hpp"
#include "sid/raw.hpp"

namespace testing {

inline std::vector<float> random_floats(std::size_t n, std::uint64_t seed, float lo = -1.0f,
                                        float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline sid::Plane2D<float> random_mosaic(int w, int h, std::uint64_t seed) {
  sid::Plane2D<float> m(w, h);
  m.data = random_floats(m.data.size(), seed, 0.0f, 1.0f);
  return m;
}

inline sid::RgbImage random_image(int w, int h, std::uint64_t seed) {
  sid::RgbImage img(w, h);
  img.data = random_floats(img.data.size(), seed, 0.0f, 1.0f);
  return img;
}

inline sid::RgbImage constant_image(int w, int h, float r, float g, float b) {
  sid::RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(0, y, x) = r;
      img.at(1, y, x) = g;
      img.at(2, y, x) = b;
    }
  return img;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sid_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
