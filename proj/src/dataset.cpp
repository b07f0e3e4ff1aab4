#include "sid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "sid/error.hpp"

namespace sid::data {
namespace fs = std::filesystem;

namespace {

// splitmix64 finalizer; combines seed components into independent streams.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix(mix(mix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ull));
}

std::string burst_name(std::size_t k) { return fmt::format("burst_{:02d}.pgm", k); }

}  // namespace

std::string scene_id(int index) { return fmt::format("{:04d}", index); }

std::string write_scene(const fs::path& root, const std::string& id, const sim::ScenePair& pair,
                        const std::vector<RawMosaic>& burst) {
  const fs::path rel = fs::path("scenes") / id;
  const fs::path dir = root / rel;
  fs::create_directories(dir);
  io::write_raw(dir / "input.pgm", dir / "input.meta", io::RawCapture{pair.input, pair.ratio});
  io::write_ppm8(dir / "ref.ppm", pair.reference);
  for (std::size_t k = 0; k < burst.size(); ++k) io::write_pgm16(dir / burst_name(k), burst[k].pixels);
  return fmt::format("{} {} {} {}", id, (rel / "input.pgm").generic_string(),
                     (rel / "input.meta").generic_string(), (rel / "ref.ppm").generic_string());
}

void write_manifest(const fs::path& root, const std::vector<std::string>& lines) {
  std::string text = "# id input meta reference\n";
  for (const auto& l : lines) text += l + "\n";
  io::write_text(root / "manifest.txt", text);
}

Dataset load_dataset(const fs::path& root, bool with_burst) {
  const fs::path manifest = root / "manifest.txt";
  require(fs::exists(manifest), fmt::format("no manifest.txt in dataset {}", root.string()),
          ErrorCode::Io);
  Dataset ds;
  ds.root = root;
  std::istringstream in(io::read_text(manifest));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id, pgm, meta, ref;
    require(bool(ls >> id >> pgm >> meta >> ref),
            fmt::format("{}:{}: expected 'id input meta reference'", manifest.string(), lineno),
            ErrorCode::Format);
    Scene s;
    s.id = id;
    s.capture = io::read_raw(root / pgm, root / meta);
    s.reference = io::read_ppm8(root / ref);
    require(s.reference.width == s.capture.raw.width() &&
                s.reference.height == s.capture.raw.height(),
            fmt::format("scene {}: reference {}x{} does not match raw {}x{}", id,
                        s.reference.width, s.reference.height, s.capture.raw.width(),
                        s.capture.raw.height()),
            ErrorCode::Mismatch);
    if (with_burst) {
      const fs::path dir = (root / pgm).parent_path();
      for (std::size_t k = 0; fs::exists(dir / burst_name(k)); ++k) {
        RawMosaic frame;
        frame.pixels = io::read_pgm16(dir / burst_name(k));
        frame.meta = s.capture.raw.meta;
        require(frame.pixels.width == s.capture.raw.width() &&
                    frame.pixels.height == s.capture.raw.height(),
                fmt::format("scene {}: burst frame {} has the wrong size", id, k),
                ErrorCode::Mismatch);
        s.burst.push_back(std::move(frame));
      }
    }
    ds.scenes.push_back(std::move(s));
  }
  require(!ds.scenes.empty(), fmt::format("dataset {} lists no scenes", root.string()));
  return ds;
}

Dataset simulate_dataset(const SimulateOptions& opt) {
  require(opt.scenes >= 1, "need at least one scene");
  require(opt.burst_frames >= 0, "burst frame count must be non-negative");
  Dataset ds;
  for (int i = 0; i < opt.scenes; ++i) {
    const RgbImage scene = sim::render_scene(derive(opt.seed, std::uint64_t(i)), opt.width, opt.height);
    sim::SimConfig cfg = sim::default_config(opt.cfa, opt.ratio, derive(opt.seed, i, 1));
    const sim::ScenePair pair = sim::simulate_pair(scene, cfg);
    Scene s;
    s.id = scene_id(i);
    s.capture = io::RawCapture{pair.input, pair.ratio};
    // Store what a reader will see: 8-bit quantized references.
    s.reference = pair.reference;
    for (float& v : s.reference.data) v = float(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
    for (int k = 0; k < opt.burst_frames; ++k) {
      cfg.seed = derive(opt.seed, i, std::uint64_t(k) + 2);
      s.burst.push_back(sim::simulate_pair(scene, cfg).input);
    }
    ds.scenes.push_back(std::move(s));
  }
  return ds;
}

void write_dataset(const fs::path& root, const Dataset& ds) {
  std::vector<std::string> lines;
  for (const auto& s : ds.scenes)
    lines.push_back(write_scene(root, s.id, sim::ScenePair{s.reference, s.capture.raw, s.capture.ratio}, s.burst));
  write_manifest(root, lines);
}

}  // namespace sid::data
