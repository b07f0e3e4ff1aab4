#pragma once

// Raw sensor data model and the learned pipeline's front end: black-level
// normalization, amplification and CFA-aware packing.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sid/error.hpp"
#include "sid/image.hpp"

namespace sid {

enum class Cfa { BayerRggb, XTrans };

// Bayer phases accepted at ingest; everything but RGGB is cropped to RGGB.
enum class BayerPhase { Rggb, Grbg, Gbrg, Bggr };

struct WhiteBalance {
  double r = 1.0;
  double g = 1.0;
  double b = 1.0;
  bool operator==(const WhiteBalance&) const = default;
};

struct SensorMeta {
  Cfa cfa = Cfa::BayerRggb;
  int black_level = 0;
  int white_level = 65535;
  double exposure_s = 0.1;
  WhiteBalance wb;

  void validate() const;
  // Smallest tile the mosaic dimensions must be a multiple of.
  int cfa_period() const { return cfa == Cfa::BayerRggb ? 2 : 6; }
  bool operator==(const SensorMeta&) const = default;
};

struct RawMosaic {
  Plane2D<std::uint16_t> pixels;
  SensorMeta meta;

  int width() const { return pixels.width; }
  int height() const { return pixels.height; }
  void validate() const;
  bool operator==(const RawMosaic&) const = default;
};

// Exposure ratio between reference and input, applied as a brightness gain.
class AmplificationRatio {
 public:
  explicit AmplificationRatio(double value);
  double value() const { return value_; }

 private:
  double value_;
};

enum class Arrangement { BayerPacked4, BayerMasked, XTrans9, XTrans36 };

std::string_view arrangement_name(Arrangement a);
Arrangement parse_arrangement(std::string_view name);
Cfa arrangement_cfa(Arrangement a);
int arrangement_channels(Arrangement a);
// Full-resolution pixels per packed pixel along each axis (1 for masked).
int arrangement_cell(Arrangement a);

std::string_view cfa_name(Cfa cfa);
Cfa parse_cfa(std::string_view name);

template <typename T>
struct BasicPackedPlanes {
  Arrangement arrangement = Arrangement::BayerPacked4;
  int channels = 0;
  int width = 0;
  int height = 0;
  std::vector<T> data;  // channel-major

  T& at(int c, int y, int x) {
    return data[(std::size_t(c) * height + y) * width + x];
  }
  const T& at(int c, int y, int x) const {
    return data[(std::size_t(c) * height + y) * width + x];
  }
  bool operator==(const BasicPackedPlanes&) const = default;
};

using PackedPlanes = BasicPackedPlanes<float>;

namespace raw {

// 0 = red, 1 = green, 2 = blue.
int cfa_color(Cfa cfa, int y, int x);

// Canonical X-Trans 6x6 layout at phase (0,0).
extern const std::array<std::array<int, 6>, 6> kXTransPattern;

// Exchange table for 9-channel X-Trans packing: pairs of 4-adjacent positions
// (row, col) inside a 6x6 tile. Swapping each pair turns the tile into the
// 3x3 pattern of its top-left block repeated 2x2. The mapping is an involution.
struct TileSwap {
  int y0, x0, y1, x1;
};
extern const std::array<TileSwap, 4> kXTransExchange;

// max(dn - black, 0) / (white - black)
Mosaic normalize(const RawMosaic& raw);
float normalize_value(std::uint16_t dn, const SensorMeta& meta);

// min(ratio * v, 1)
Mosaic amplify(const Mosaic& mosaic, AmplificationRatio ratio);

// Crops one row and/or column so the mosaic starts on an R site, then trims
// to even dimensions.
RawMosaic crop_to_rggb(const RawMosaic& raw, BayerPhase phase);

template <typename T>
BasicPackedPlanes<T> pack_bayer(const Plane2D<T>& mosaic, Cfa cfa = Cfa::BayerRggb);
template <typename T>
Plane2D<T> unpack_bayer(const BasicPackedPlanes<T>& planes);

template <typename T>
BasicPackedPlanes<T> mask_bayer(const Plane2D<T>& mosaic, Cfa cfa = Cfa::BayerRggb);
template <typename T>
Plane2D<T> unmask_bayer(const BasicPackedPlanes<T>& planes);

// Applies kXTransExchange to every 6x6 tile (its own inverse).
template <typename T>
Plane2D<T> xtrans_exchange(const Plane2D<T>& mosaic);

template <typename T>
BasicPackedPlanes<T> pack_xtrans9(const Plane2D<T>& mosaic, Cfa cfa = Cfa::XTrans);
template <typename T>
Plane2D<T> unpack_xtrans9(const BasicPackedPlanes<T>& planes);

template <typename T>
BasicPackedPlanes<T> pack_xtrans36(const Plane2D<T>& mosaic, Cfa cfa = Cfa::XTrans);
template <typename T>
Plane2D<T> unpack_xtrans36(const BasicPackedPlanes<T>& planes);

// Dispatch on arrangement; validates that the CFA matches.
template <typename T>
BasicPackedPlanes<T> pack(const Plane2D<T>& mosaic, Cfa cfa, Arrangement arrangement);
template <typename T>
Plane2D<T> unpack(const BasicPackedPlanes<T>& planes);

// Color (0/1/2) carried by each packed channel.
std::vector<int> channel_colors(Arrangement arrangement);

}  // namespace raw
}  // namespace sid
