#include "sid/raw_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace sid::io {
namespace {

[[noreturn]] void format_error(const std::filesystem::path& path, const std::string& what) {
  throw Error(ErrorCode::Format, path.string() + ": " + what);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

// Netpbm header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(char(ch));
  }
  if (tok.empty()) format_error(path, "truncated netpbm header");
  return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = next_token(in, path);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || value <= 0)
    format_error(path, "bad netpbm header field '" + tok + "'");
  return value;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error(ErrorCode::Format, "sidecar: '" + key + "' is not a number: '" + s + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::Format, "sidecar: '" + key + "' is not an integer: '" + s + "'");
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_pgm16(const std::filesystem::path& path, const Plane2D<std::uint16_t>& pixels) {
  auto out = open_out(path);
  out << "P5\n" << pixels.width << ' ' << pixels.height << "\n65535\n";
  std::vector<unsigned char> bytes(pixels.data.size() * 2);
  for (std::size_t i = 0; i < pixels.data.size(); ++i) {
    bytes[2 * i] = static_cast<unsigned char>(pixels.data[i] >> 8);
    bytes[2 * i + 1] = static_cast<unsigned char>(pixels.data[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

Plane2D<std::uint16_t> read_pgm16(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (next_token(in, path) != "P5") format_error(path, "not a binary PGM (P5) file");
  const int w = header_int(in, path);
  const int h = header_int(in, path);
  const int maxval = header_int(in, path);
  if (maxval > 65535) format_error(path, "PGM maxval above 65535");
  Plane2D<std::uint16_t> pixels(w, h);
  const std::size_t n = pixels.data.size();
  if (maxval < 256) {
    std::vector<unsigned char> bytes(n);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(n));
    if (std::size_t(in.gcount()) != n) format_error(path, "truncated PGM data");
    for (std::size_t i = 0; i < n; ++i) pixels.data[i] = bytes[i];
  } else {
    std::vector<unsigned char> bytes(2 * n);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(2 * n));
    if (std::size_t(in.gcount()) != 2 * n) format_error(path, "truncated PGM data");
    for (std::size_t i = 0; i < n; ++i)
      pixels.data[i] = std::uint16_t((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  }
  return pixels;
}

std::string format_sidecar(const SensorMeta& meta, double ratio) {
  std::ostringstream os;
  os << "cfa=" << cfa_name(meta.cfa) << '\n'
     << "black_level=" << meta.black_level << '\n'
     << "white_level=" << meta.white_level << '\n'
     << "exposure_s=" << format_double(meta.exposure_s) << '\n'
     << "ratio=" << format_double(ratio) << '\n'
     << "wb_r=" << format_double(meta.wb.r) << '\n'
     << "wb_g=" << format_double(meta.wb.g) << '\n'
     << "wb_b=" << format_double(meta.wb.b) << '\n';
  return os.str();
}

void parse_sidecar(const std::string& text, SensorMeta& meta, double& ratio, BayerPhase& phase) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Format,
                  "sidecar line " + std::to_string(lineno) + " is not key=value: '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  static const char* kRequired[] = {"cfa",   "black_level", "white_level", "exposure_s",
                                    "ratio", "wb_r",        "wb_g",        "wb_b"};
  for (const char* key : kRequired)
    if (!kv.count(key))
      throw Error(ErrorCode::Format, std::string("sidecar is missing key '") + key + "'");

  const std::string& cfa = kv["cfa"];
  phase = BayerPhase::Rggb;
  if (cfa == "bayer_grbg")
    phase = BayerPhase::Grbg;
  else if (cfa == "bayer_gbrg")
    phase = BayerPhase::Gbrg;
  else if (cfa == "bayer_bggr")
    phase = BayerPhase::Bggr;
  meta.cfa = phase == BayerPhase::Rggb ? parse_cfa(cfa) : Cfa::BayerRggb;
  meta.black_level = parse_int("black_level", kv["black_level"]);
  meta.white_level = parse_int("white_level", kv["white_level"]);
  meta.exposure_s = parse_double("exposure_s", kv["exposure_s"]);
  meta.wb.r = parse_double("wb_r", kv["wb_r"]);
  meta.wb.g = parse_double("wb_g", kv["wb_g"]);
  meta.wb.b = parse_double("wb_b", kv["wb_b"]);
  ratio = parse_double("ratio", kv["ratio"]);
  try {
    meta.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Format, e.what());
  }
}

void write_raw(const std::filesystem::path& pgm_path, const std::filesystem::path& meta_path,
               const RawCapture& capture) {
  capture.raw.validate();
  write_pgm16(pgm_path, capture.raw.pixels);
  write_text(meta_path, format_sidecar(capture.raw.meta, capture.ratio));
}

RawCapture read_raw(const std::filesystem::path& pgm_path,
                    const std::filesystem::path& meta_path) {
  RawCapture capture;
  BayerPhase phase{};
  try {
    parse_sidecar(read_text(meta_path), capture.raw.meta, capture.ratio, phase);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Format)
      throw Error(ErrorCode::Format, meta_path.string() + ": " + e.what());
    throw;
  }
  capture.raw.pixels = read_pgm16(pgm_path);
  if (phase != BayerPhase::Rggb) capture.raw = raw::crop_to_rggb(capture.raw, phase);
  try {
    capture.raw.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Format, pgm_path.string() + ": " + e.what());
  }
  return capture;
}

void write_ppm8(const std::filesystem::path& path, const RgbImage& image) {
  auto out = open_out(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.plane_size() * 3);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        bytes[(std::size_t(y) * image.width + x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

RgbImage read_ppm8(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (next_token(in, path) != "P6") format_error(path, "not a binary PPM (P6) file");
  const int w = header_int(in, path);
  const int h = header_int(in, path);
  const int maxval = header_int(in, path);
  if (maxval != 255) format_error(path, "only 8-bit PPM is supported");
  RgbImage image(w, h);
  std::vector<unsigned char> bytes(image.plane_size() * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (std::size_t(in.gcount()) != bytes.size()) format_error(path, "truncated PPM data");
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        image.at(c, y, x) = float(bytes[(std::size_t(y) * w + x) * 3 + c]) / 255.0f;
  return image;
}

std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

}  // namespace sid::io
