#include "sid/raw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sid {

void SensorMeta::validate() const {
  require(black_level >= 0 && black_level < white_level && white_level <= 65535,
          "sensor metadata: need 0 <= black_level < white_level <= 65535 (got black=" +
              std::to_string(black_level) + ", white=" + std::to_string(white_level) + ")");
  require(std::isfinite(exposure_s) && exposure_s > 0.0,
          "sensor metadata: exposure_s must be positive");
  require(wb.r > 0.0 && wb.g > 0.0 && wb.b > 0.0 && std::isfinite(wb.r) && std::isfinite(wb.g) &&
              std::isfinite(wb.b),
          "sensor metadata: white-balance gains must be positive");
}

void RawMosaic::validate() const {
  meta.validate();
  const int period = meta.cfa_period();
  require(pixels.width > 0 && pixels.height > 0, "raw mosaic is empty");
  require(pixels.width % period == 0 && pixels.height % period == 0,
          "raw mosaic dimensions " + std::to_string(pixels.width) + "x" +
              std::to_string(pixels.height) + " are not divisible by the CFA period " +
              std::to_string(period));
  require(pixels.data.size() == std::size_t(pixels.width) * pixels.height,
          "raw mosaic data length does not match its dimensions");
  const auto max_dn = *std::max_element(pixels.data.begin(), pixels.data.end());
  require(max_dn <= meta.white_level, "raw mosaic holds values above white_level");
}

AmplificationRatio::AmplificationRatio(double value) : value_(value) {
  require(std::isfinite(value) && value >= 1.0,
          "amplification ratio must be finite and >= 1 (got " + std::to_string(value) + ")");
}

std::string_view arrangement_name(Arrangement a) {
  switch (a) {
    case Arrangement::BayerPacked4:
      return "bayer4";
    case Arrangement::BayerMasked:
      return "masked";
    case Arrangement::XTrans9:
      return "xtrans9";
    case Arrangement::XTrans36:
      return "xtrans36";
  }
  return "?";
}

Arrangement parse_arrangement(std::string_view name) {
  if (name == "bayer4") return Arrangement::BayerPacked4;
  if (name == "masked") return Arrangement::BayerMasked;
  if (name == "xtrans9") return Arrangement::XTrans9;
  if (name == "xtrans36") return Arrangement::XTrans36;
  throw Error(ErrorCode::InvalidArgument, "unknown arrangement '" + std::string(name) + "'");
}

Cfa arrangement_cfa(Arrangement a) {
  return (a == Arrangement::XTrans9 || a == Arrangement::XTrans36) ? Cfa::XTrans
                                                                   : Cfa::BayerRggb;
}

int arrangement_channels(Arrangement a) {
  switch (a) {
    case Arrangement::BayerPacked4:
    case Arrangement::BayerMasked:
      return 4;
    case Arrangement::XTrans9:
      return 9;
    case Arrangement::XTrans36:
      return 36;
  }
  return 0;
}

int arrangement_cell(Arrangement a) {
  switch (a) {
    case Arrangement::BayerPacked4:
      return 2;
    case Arrangement::BayerMasked:
      return 1;
    case Arrangement::XTrans9:
      return 3;
    case Arrangement::XTrans36:
      return 6;
  }
  return 0;
}

std::string_view cfa_name(Cfa cfa) { return cfa == Cfa::BayerRggb ? "bayer" : "xtrans"; }

Cfa parse_cfa(std::string_view name) {
  if (name == "bayer" || name == "bayer_rggb") return Cfa::BayerRggb;
  if (name == "xtrans") return Cfa::XTrans;
  throw Error(ErrorCode::Format, "unknown CFA '" + std::string(name) + "'");
}

namespace raw {

const std::array<std::array<int, 6>, 6> kXTransPattern = {{
    {1, 1, 0, 1, 1, 2},
    {1, 1, 2, 1, 1, 0},
    {2, 0, 1, 0, 2, 1},
    {1, 1, 2, 1, 1, 0},
    {1, 1, 0, 1, 1, 2},
    {0, 2, 1, 2, 0, 1},
}};

// The top-right and bottom-left 3x3 blocks are the top-left block with red
// and blue exchanged; one vertical and one horizontal swap in each fixes that.
const std::array<TileSwap, 4> kXTransExchange = {{
    {0, 5, 1, 5},
    {2, 3, 2, 4},
    {3, 2, 4, 2},
    {5, 0, 5, 1},
}};

int cfa_color(Cfa cfa, int y, int x) {
  if (cfa == Cfa::BayerRggb) {
    const int dy = y & 1, dx = x & 1;
    if (dy == 0 && dx == 0) return 0;
    if (dy == 1 && dx == 1) return 2;
    return 1;
  }
  return kXTransPattern[y % 6][x % 6];
}

float normalize_value(std::uint16_t dn, const SensorMeta& meta) {
  const int shifted = std::max(int(dn) - meta.black_level, 0);
  return float(double(shifted) / double(meta.white_level - meta.black_level));
}

Mosaic normalize(const RawMosaic& raw) {
  raw.validate();
  Mosaic out(raw.width(), raw.height());
  const double range = double(raw.meta.white_level - raw.meta.black_level);
  const int black = raw.meta.black_level;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const int shifted = std::max(int(raw.pixels.data[i]) - black, 0);
    out.data[i] = float(double(shifted) / range);
  }
  return out;
}

Mosaic amplify(const Mosaic& mosaic, AmplificationRatio ratio) {
  Mosaic out(mosaic.width, mosaic.height);
  const float r = float(ratio.value());
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const float v = mosaic.data[i];
    require(v >= 0.0f && v <= 1.0f, "amplify expects a normalized mosaic in [0,1]");
    out.data[i] = std::min(r * v, 1.0f);
  }
  return out;
}

RawMosaic crop_to_rggb(const RawMosaic& raw, BayerPhase phase) {
  require(raw.meta.cfa == Cfa::BayerRggb, "crop_to_rggb needs a Bayer mosaic");
  int oy = 0, ox = 0;
  switch (phase) {
    case BayerPhase::Rggb:
      break;
    case BayerPhase::Grbg:
      ox = 1;
      break;
    case BayerPhase::Gbrg:
      oy = 1;
      break;
    case BayerPhase::Bggr:
      oy = 1;
      ox = 1;
      break;
  }
  const int w = ((raw.width() - ox) / 2) * 2;
  const int h = ((raw.height() - oy) / 2) * 2;
  require(w > 0 && h > 0, "mosaic too small to crop to RGGB");
  RawMosaic out{Plane2D<std::uint16_t>(w, h), raw.meta};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.pixels.at(y, x) = raw.pixels.at(y + oy, x + ox);
  return out;
}

namespace {

void check_cfa(Cfa actual, Cfa wanted, const char* op) {
  require(actual == wanted, std::string(op) + ": mosaic has CFA '" +
                                std::string(cfa_name(actual)) + "', expected '" +
                                std::string(cfa_name(wanted)) + "'",
          ErrorCode::Mismatch);
}

template <typename T>
void check_dims(const Plane2D<T>& m, int period, const char* op) {
  require(m.width > 0 && m.height > 0 && m.width % period == 0 && m.height % period == 0,
          std::string(op) + ": dimensions " + std::to_string(m.width) + "x" +
              std::to_string(m.height) + " are not divisible by " + std::to_string(period));
  require(m.data.size() == std::size_t(m.width) * m.height,
          std::string(op) + ": data length does not match dimensions");
}

template <typename T>
void check_planes(const BasicPackedPlanes<T>& p, Arrangement want, const char* op) {
  require(p.arrangement == want,
          std::string(op) + ": planes are arranged as '" +
              std::string(arrangement_name(p.arrangement)) + "'",
          ErrorCode::Mismatch);
  require(p.channels == arrangement_channels(want) &&
              p.data.size() == std::size_t(p.channels) * p.width * p.height,
          std::string(op) + ": malformed planes");
}

// Cell-based packing: channel = cell_y * cell + cell_x.
template <typename T>
BasicPackedPlanes<T> pack_cells(const Plane2D<T>& m, int cell, Arrangement arrangement) {
  BasicPackedPlanes<T> out;
  out.arrangement = arrangement;
  out.channels = cell * cell;
  out.width = m.width / cell;
  out.height = m.height / cell;
  out.data.resize(std::size_t(out.channels) * out.width * out.height);
  for (int dy = 0; dy < cell; ++dy)
    for (int dx = 0; dx < cell; ++dx) {
      const int c = dy * cell + dx;
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(c, y, x) = m.at(y * cell + dy, x * cell + dx);
    }
  return out;
}

template <typename T>
Plane2D<T> unpack_cells(const BasicPackedPlanes<T>& p, int cell) {
  Plane2D<T> out(p.width * cell, p.height * cell);
  for (int dy = 0; dy < cell; ++dy)
    for (int dx = 0; dx < cell; ++dx) {
      const int c = dy * cell + dx;
      for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) out.at(y * cell + dy, x * cell + dx) = p.at(c, y, x);
    }
  return out;
}

}  // namespace

template <typename T>
BasicPackedPlanes<T> pack_bayer(const Plane2D<T>& mosaic, Cfa cfa) {
  check_cfa(cfa, Cfa::BayerRggb, "pack_bayer");
  check_dims(mosaic, 2, "pack_bayer");
  return pack_cells(mosaic, 2, Arrangement::BayerPacked4);
}

template <typename T>
Plane2D<T> unpack_bayer(const BasicPackedPlanes<T>& planes) {
  check_planes(planes, Arrangement::BayerPacked4, "unpack_bayer");
  return unpack_cells(planes, 2);
}

template <typename T>
BasicPackedPlanes<T> mask_bayer(const Plane2D<T>& mosaic, Cfa cfa) {
  check_cfa(cfa, Cfa::BayerRggb, "mask_bayer");
  check_dims(mosaic, 2, "mask_bayer");
  BasicPackedPlanes<T> out;
  out.arrangement = Arrangement::BayerMasked;
  out.channels = 4;
  out.width = mosaic.width;
  out.height = mosaic.height;
  out.data.assign(std::size_t(4) * mosaic.width * mosaic.height, T{});
  for (int y = 0; y < mosaic.height; ++y)
    for (int x = 0; x < mosaic.width; ++x) out.at((y & 1) * 2 + (x & 1), y, x) = mosaic.at(y, x);
  return out;
}

template <typename T>
Plane2D<T> unmask_bayer(const BasicPackedPlanes<T>& planes) {
  check_planes(planes, Arrangement::BayerMasked, "unmask_bayer");
  Plane2D<T> out(planes.width, planes.height);
  for (int y = 0; y < planes.height; ++y)
    for (int x = 0; x < planes.width; ++x) out.at(y, x) = planes.at((y & 1) * 2 + (x & 1), y, x);
  return out;
}

template <typename T>
Plane2D<T> xtrans_exchange(const Plane2D<T>& mosaic) {
  check_dims(mosaic, 6, "xtrans_exchange");
  Plane2D<T> out = mosaic;
  for (int ty = 0; ty < mosaic.height; ty += 6)
    for (int tx = 0; tx < mosaic.width; tx += 6)
      for (const auto& s : kXTransExchange)
        std::swap(out.at(ty + s.y0, tx + s.x0), out.at(ty + s.y1, tx + s.x1));
  return out;
}

template <typename T>
BasicPackedPlanes<T> pack_xtrans9(const Plane2D<T>& mosaic, Cfa cfa) {
  check_cfa(cfa, Cfa::XTrans, "pack_xtrans9");
  check_dims(mosaic, 6, "pack_xtrans9");
  return pack_cells(xtrans_exchange(mosaic), 3, Arrangement::XTrans9);
}

template <typename T>
Plane2D<T> unpack_xtrans9(const BasicPackedPlanes<T>& planes) {
  check_planes(planes, Arrangement::XTrans9, "unpack_xtrans9");
  require(planes.width % 2 == 0 && planes.height % 2 == 0,
          "unpack_xtrans9: packed dimensions must be even");
  return xtrans_exchange(unpack_cells(planes, 3));
}

template <typename T>
BasicPackedPlanes<T> pack_xtrans36(const Plane2D<T>& mosaic, Cfa cfa) {
  check_cfa(cfa, Cfa::XTrans, "pack_xtrans36");
  check_dims(mosaic, 6, "pack_xtrans36");
  return pack_cells(mosaic, 6, Arrangement::XTrans36);
}

template <typename T>
Plane2D<T> unpack_xtrans36(const BasicPackedPlanes<T>& planes) {
  check_planes(planes, Arrangement::XTrans36, "unpack_xtrans36");
  return unpack_cells(planes, 6);
}

template <typename T>
BasicPackedPlanes<T> pack(const Plane2D<T>& mosaic, Cfa cfa, Arrangement arrangement) {
  switch (arrangement) {
    case Arrangement::BayerPacked4:
      return pack_bayer(mosaic, cfa);
    case Arrangement::BayerMasked:
      return mask_bayer(mosaic, cfa);
    case Arrangement::XTrans9:
      return pack_xtrans9(mosaic, cfa);
    case Arrangement::XTrans36:
      return pack_xtrans36(mosaic, cfa);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown arrangement");
}

template <typename T>
Plane2D<T> unpack(const BasicPackedPlanes<T>& planes) {
  switch (planes.arrangement) {
    case Arrangement::BayerPacked4:
      return unpack_bayer(planes);
    case Arrangement::BayerMasked:
      return unmask_bayer(planes);
    case Arrangement::XTrans9:
      return unpack_xtrans9(planes);
    case Arrangement::XTrans36:
      return unpack_xtrans36(planes);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown arrangement");
}

std::vector<int> channel_colors(Arrangement arrangement) {
  switch (arrangement) {
    case Arrangement::BayerPacked4:
    case Arrangement::BayerMasked:
      return {0, 1, 1, 2};
    case Arrangement::XTrans9: {
      std::vector<int> colors;
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) colors.push_back(kXTransPattern[y][x]);
      return colors;
    }
    case Arrangement::XTrans36: {
      std::vector<int> colors;
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) colors.push_back(kXTransPattern[y][x]);
      return colors;
    }
  }
  return {};
}

#define SID_INSTANTIATE_PACKING(T)                                                   \
  template BasicPackedPlanes<T> pack_bayer(const Plane2D<T>&, Cfa);                  \
  template Plane2D<T> unpack_bayer(const BasicPackedPlanes<T>&);                     \
  template BasicPackedPlanes<T> mask_bayer(const Plane2D<T>&, Cfa);                  \
  template Plane2D<T> unmask_bayer(const BasicPackedPlanes<T>&);                     \
  template Plane2D<T> xtrans_exchange(const Plane2D<T>&);                            \
  template BasicPackedPlanes<T> pack_xtrans9(const Plane2D<T>&, Cfa);                \
  template Plane2D<T> unpack_xtrans9(const BasicPackedPlanes<T>&);                   \
  template BasicPackedPlanes<T> pack_xtrans36(const Plane2D<T>&, Cfa);               \
  template Plane2D<T> unpack_xtrans36(const BasicPackedPlanes<T>&);                  \
  template BasicPackedPlanes<T> pack(const Plane2D<T>&, Cfa, Arrangement);           \
  template Plane2D<T> unpack(const BasicPackedPlanes<T>&);

SID_INSTANTIATE_PACKING(float)
SID_INSTANTIATE_PACKING(std::uint16_t)

#undef SID_INSTANTIATE_PACKING

}  // namespace raw
}  // namespace sid
