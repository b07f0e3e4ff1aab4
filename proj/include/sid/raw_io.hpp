#pragma once

// File formats:
//   *.pgm   binary PGM (P5), 16-bit samples, most significant byte first
//   *.meta  sidecar with key=value lines: cfa, black_level, white_level,
//           exposure_s, ratio, wb_r, wb_g, wb_b
//   *.ppm   binary PPM (P6), 8-bit RGB

#include <filesystem>
#include <string>

#include "sid/image.hpp"
#include "sid/raw.hpp"

namespace sid::io {

// A raw capture together with the amplification ratio it was paired with.
struct RawCapture {
  RawMosaic raw;
  double ratio = 1.0;
  bool operator==(const RawCapture&) const = default;
};

void write_pgm16(const std::filesystem::path& path, const Plane2D<std::uint16_t>& pixels);
Plane2D<std::uint16_t> read_pgm16(const std::filesystem::path& path);

std::string format_sidecar(const SensorMeta& meta, double ratio);
// Returns the metadata and ratio; Bayer phases other than RGGB are reported
// through `phase` so the caller can crop.
void parse_sidecar(const std::string& text, SensorMeta& meta, double& ratio, BayerPhase& phase);

void write_raw(const std::filesystem::path& pgm_path, const std::filesystem::path& meta_path,
               const RawCapture& capture);
// Reads a PGM + sidecar pair; non-RGGB Bayer data is cropped to RGGB.
RawCapture read_raw(const std::filesystem::path& pgm_path, const std::filesystem::path& meta_path);

// Values are clamped to [0,1] and rounded to 8 bits.
void write_ppm8(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm8(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sid::io
