#pragma once

#include <cstddef>
#include <vector>

namespace sid {

// Single-channel row-major grid.
template <typename T>
struct Plane2D {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Plane2D() = default;
  Plane2D(int w, int h, T fill = T{}) : width(w), height(h), data(std::size_t(w) * h, fill) {}

  T& at(int y, int x) { return data[std::size_t(y) * width + x]; }
  const T& at(int y, int x) const { return data[std::size_t(y) * width + x]; }

  bool operator==(const Plane2D&) const = default;
};

// Floating mosaic in normalized units.
using Mosaic = Plane2D<float>;

// Three-channel floating image stored planar (R plane, G plane, B plane).
// Linear or display-referred depending on where it sits in a pipeline; values
// are nominally in [0,1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  RgbImage() = default;
  RgbImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(std::size_t(3) * w * h, fill) {}

  std::size_t plane_size() const { return std::size_t(width) * height; }
  float& at(int c, int y, int x) { return data[c * plane_size() + std::size_t(y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[c * plane_size() + std::size_t(y) * width + x];
  }
  float* plane(int c) { return data.data() + c * plane_size(); }
  const float* plane(int c) const { return data.data() + c * plane_size(); }

  bool operator==(const RgbImage&) const = default;
};

}  // namespace sid
