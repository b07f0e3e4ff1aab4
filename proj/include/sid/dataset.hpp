#pragma once

// On-disk dataset:
//   DIR/manifest.txt                 one line per pair: id input.pgm input.meta ref.ppm
//   DIR/scenes/NNNN/input.pgm        short-exposure raw
//   DIR/scenes/NNNN/input.meta       sidecar (includes the ratio)
//   DIR/scenes/NNNN/ref.ppm          long-exposure reference
//   DIR/scenes/NNNN/burst_KK.pgm     optional extra short exposures

#include <filesystem>
#include <string>
#include <vector>

#include "sid/image.hpp"
#include "sid/raw_io.hpp"
#include "sid/sensor_sim.hpp"

namespace sid::data {

struct Scene {
  std::string id;
  io::RawCapture capture;
  RgbImage reference;
  std::vector<RawMosaic> burst;  // empty unless requested at load time
};

struct Dataset {
  std::filesystem::path root;
  std::vector<Scene> scenes;
};

std::string scene_id(int index);  // "0007"

// Writes one pair plus optional burst frames and returns its manifest line.
std::string write_scene(const std::filesystem::path& root, const std::string& id,
                        const sim::ScenePair& pair, const std::vector<RawMosaic>& burst = {});
void write_manifest(const std::filesystem::path& root, const std::vector<std::string>& lines);

Dataset load_dataset(const std::filesystem::path& root, bool with_burst = false);

struct SimulateOptions {
  int scenes = 16;
  int width = 64;
  int height = 64;
  double ratio = 100.0;
  Cfa cfa = Cfa::BayerRggb;
  std::uint64_t seed = 0;
  int burst_frames = 0;
};

// Scene i uses render seed (seed, i) and noise seed (seed, i, frame), so the
// output is a pure function of the options.
Dataset simulate_dataset(const SimulateOptions& opt);
void write_dataset(const std::filesystem::path& root, const Dataset& ds);

}  // namespace sid::data
