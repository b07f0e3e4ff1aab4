// sid: simulate data, train and evaluate the learned low-light pipeline,
// run the classic baselines, the ablation table, gradient checks and timing.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "sid/dataset.hpp"
#include "sid/isp.hpp"
#include "sid/metrics.hpp"
#include "sid/models.hpp"
#include "sid/nn/gradcheck.hpp"
#include "sid/simd/kernels.hpp"
#include "sid/train.hpp"
#include "sid/weights_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sid;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return 3;
    case ErrorCode::Io: return 4;
    case ErrorCode::Format: return 5;
    case ErrorCode::Mismatch: return 6;
    case ErrorCode::Numeric: return 7;
  }
  return kExitFailure;
}

struct Global {
  std::uint64_t seed = 0;
  std::string preset = "desk";
  std::string isa = "auto";
  bool force = false;
};

struct Size {
  int width = 0, height = 0;
};

Size parse_size(const std::string& s) {
  Size out;
  char x = 0;
  std::istringstream in(s);
  require(bool(in >> out.width >> x >> out.height) && x == 'x' && in.peek() == EOF &&
              out.width > 0 && out.height > 0,
          fmt::format("size must look like 64x64, got '{}'", s));
  return out;
}

// Creates the directory; an existing non-empty one needs --force.
void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    require(fs::is_directory(dir), fmt::format("{} exists and is not a directory", dir.string()),
            ErrorCode::Io);
    require(force || fs::is_empty(dir),
            fmt::format("output directory {} is not empty (pass --force to overwrite)",
                        dir.string()),
            ErrorCode::Io);
  }
  fs::create_directories(dir);
}

void prepare_out_file(const fs::path& file, bool force) {
  require(force || !fs::exists(file),
          fmt::format("{} exists (pass --force to overwrite)", file.string()), ErrorCode::Io);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

json base_config(const std::string& command, const Global& g) {
  return json{{"command", command},
              {"seed", g.seed},
              {"preset", g.preset},
              {"isa", std::string(simd::isa_name(simd::active_isa()))}};
}

void echo_config(const fs::path& dir, const json& cfg) {
  io::write_text(dir / "config.json", cfg.dump(2) + "\n");
}

json spec_json(const models::ModelSpec& s) {
  return json{{"kind", std::string(models::kind_name(s.kind))},
              {"input", std::string(models::input_name(s.input))},
              {"in_channels", s.in_channels},
              {"base_width", s.base_width},
              {"depth", s.depth},
              {"preset", std::string(models::preset_name(s.preset))}};
}

json train_json(const train::TrainConfig& c) {
  return json{{"crop", c.crop},
              {"epochs", c.epochs},
              {"lr_initial", c.lr_initial},
              {"lr_after", c.lr_after},
              {"lr_switch_epoch", c.lr_switch_epoch},
              {"loss", std::string(train::loss_name(c.loss))},
              {"augment", c.augment},
              {"seed", c.seed},
              {"preset", std::string(models::preset_name(c.preset))},
              {"stretch_targets", c.stretch_targets}};
}

// Flags shared by commands that train.
struct TrainFlags {
  std::optional<int> crop, epochs, lr_switch_epoch;
  std::optional<double> lr, lr_after;
  std::string loss = "l1";
  bool no_augment = false;
  bool stretch_targets = false;

  void add(CLI::App* c) {
    c->add_option("--crop", crop, "training crop size in raw pixels");
    c->add_option("--epochs", epochs, "epochs (one crop per scene per epoch)");
    c->add_option("--lr", lr, "initial learning rate");
    c->add_option("--lr-after", lr_after, "learning rate after the switch epoch");
    c->add_option("--lr-switch-epoch", lr_switch_epoch, "epoch at which the rate drops");
    c->add_option("--loss", loss, "l1|l2|ssim")->check(CLI::IsMember({"l1", "l2", "ssim"}));
    c->add_flag("--no-augment", no_augment, "disable flip/rotation augmentation");
    c->add_flag("--stretch-targets", stretch_targets, "histogram-stretch reference images");
  }

  train::TrainConfig resolve(const Global& g) const {
    train::TrainConfig c = train::default_config(models::parse_preset(g.preset));
    c.seed = g.seed;
    if (crop) c.crop = *crop;
    if (epochs) c.epochs = *epochs;
    if (lr) c.lr_initial = *lr;
    if (lr_after) c.lr_after = *lr_after;
    if (lr_switch_epoch) c.lr_switch_epoch = *lr_switch_epoch;
    c.loss = train::parse_loss(loss);
    c.augment = !no_augment;
    c.stretch_targets = stretch_targets;
    c.validate();
    return c;
  }
};

struct ModelFlags {
  std::string model = "unet";
  std::string input = "bayer4";
  std::optional<int> width, depth;

  void add(CLI::App* c) {
    c->add_option("--model", model, "unet|can")->check(CLI::IsMember({"unet", "can"}));
    c->add_option("--input", input, "bayer4|masked|xtrans9|xtrans36|srgb")
        ->check(CLI::IsMember({"bayer4", "masked", "xtrans9", "xtrans36", "srgb"}));
    c->add_option("--width", width, "override the preset base width");
    c->add_option("--depth", depth, "override the preset depth");
  }

  models::ModelSpec resolve(const Global& g) const {
    models::ModelSpec s = models::make_spec(models::parse_kind(model), models::parse_input(input),
                                            models::parse_preset(g.preset));
    if (width) s.base_width = *width;
    if (depth) s.depth = *depth;
    s.validate();
    return s;
  }
};

void print_loss(const train::LossPoint& p, int total) {
  if (p.iter % 100 == 0 || p.iter + 1 == total)
    std::cerr << fmt::format("iter {:>6}/{} epoch {:>5} loss {:.5f}\n", p.iter + 1, total, p.epoch,
                             p.loss);
}

// ---- commands ----

struct SimulateArgs {
  int scenes = 16;
  std::string size = "64x64";
  double ratio = 100.0;
  std::string sensor = "bayer";
  std::string out;
  int burst_frames = 0;
};

int cmd_simulate(const SimulateArgs& a, const Global& g) {
  const Size sz = parse_size(a.size);
  data::SimulateOptions o;
  o.scenes = a.scenes;
  o.width = sz.width;
  o.height = sz.height;
  o.ratio = a.ratio;
  o.cfa = parse_cfa(a.sensor);
  o.seed = g.seed;
  o.burst_frames = a.burst_frames;
  prepare_out_dir(a.out, g.force);
  data::write_dataset(a.out, data::simulate_dataset(o));
  json cfg = base_config("simulate", g);
  cfg["scenes"] = a.scenes;
  cfg["size"] = a.size;
  cfg["ratio"] = a.ratio;
  cfg["sensor"] = std::string(cfa_name(o.cfa));
  cfg["burst_frames"] = a.burst_frames;
  cfg["out"] = a.out;
  echo_config(a.out, cfg);
  std::cout << fmt::format("wrote {} scene pairs to {}\n", a.scenes, a.out);
  return 0;
}

struct TrainArgs {
  std::string data, out;
  ModelFlags model;
  TrainFlags train;
};

int cmd_train(const TrainArgs& a, const Global& g) {
  const models::ModelSpec spec = a.model.resolve(g);
  const train::TrainConfig cfg = a.train.resolve(g);
  const data::Dataset ds = data::load_dataset(a.data);
  prepare_out_dir(a.out, g.force);
  json conf = base_config("train", g);
  conf["data"] = a.data;
  conf["out"] = a.out;
  conf["model"] = spec_json(spec);
  conf["train"] = train_json(cfg);
  echo_config(a.out, conf);

  const int total = cfg.epochs * int(ds.scenes.size());
  const auto r = train::train(ds, spec, cfg, [&](const train::LossPoint& p) { print_loss(p, total); });
  io::save_weights(fs::path(a.out) / "weights.sidw", r.weights);
  train::write_loss_csv(fs::path(a.out) / "loss.csv", r.curve);
  const std::string summary = fmt::format(
      "{}\niterations {}\nfirst-epoch loss {:.6f}\nlast-epoch loss {:.6f}\nratio {:.4f}\nseconds {:.1f}\n",
      spec.descriptor(), r.curve.size(), r.first_epoch_loss, r.last_epoch_loss,
      r.last_epoch_loss / r.first_epoch_loss, r.seconds);
  io::write_text(fs::path(a.out) / "train.txt", summary);
  std::cout << summary;
  return 0;
}

struct EvalArgs {
  std::string weights, data, out;
  bool stretch = false;
};

int cmd_eval(const EvalArgs& a, const Global& g) {
  const models::Weights w = io::load_weights(a.weights);
  const data::Dataset ds = data::load_dataset(a.data);
  prepare_out_dir(a.out, g.force);
  json conf = base_config("eval", g);
  conf["weights"] = a.weights;
  conf["data"] = a.data;
  conf["out"] = a.out;
  conf["stretch"] = a.stretch;
  conf["model"] = spec_json(w.spec);
  echo_config(a.out, conf);
  const train::EvalReport r = train::evaluate(w, ds, a.stretch);
  train::write_metrics_csv(fs::path(a.out) / "metrics.csv", r);
  const std::string text = train::format_report(r);
  io::write_text(fs::path(a.out) / "report.txt", text);
  std::cout << text;
  return 0;
}

struct InferArgs {
  std::string weights, raw, meta, out;
  std::optional<double> ratio;
};

int cmd_infer(const InferArgs& a, const Global& g) {
  const models::Weights w = io::load_weights(a.weights);
  const fs::path meta = a.meta.empty() ? fs::path(a.raw).replace_extension(".meta") : fs::path(a.meta);
  const io::RawCapture cap = io::read_raw(a.raw, meta);
  const AmplificationRatio ratio(a.ratio.value_or(cap.ratio));
  prepare_out_file(a.out, g.force);
  const auto t0 = std::chrono::steady_clock::now();
  const RgbImage img = models::forward_pipeline(cap.raw, ratio, w.spec, w);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  io::write_ppm8(a.out, img);
  json conf = base_config("infer", g);
  conf["weights"] = a.weights;
  conf["raw"] = a.raw;
  conf["meta"] = meta.string();
  conf["ratio"] = ratio.value();
  conf["out"] = a.out;
  io::write_text(fs::path(a.out).string() + ".json", conf.dump(2) + "\n");
  std::cout << fmt::format("wrote {} ({}x{}, ratio {}, {:.1f} ms)\n", a.out, img.width, img.height,
                           ratio.value(), ms);
  return 0;
}

struct BaselineArgs {
  std::string method = "classic";
  int frames = 8;
  std::string data, out;
};

int cmd_baseline(const BaselineArgs& a, const Global& g) {
  const bool burst = a.method == "burst";
  const data::Dataset ds = data::load_dataset(a.data, burst);
  prepare_out_dir(a.out, g.force);
  json conf = base_config("baseline", g);
  conf["method"] = a.method;
  conf["frames"] = a.frames;
  conf["data"] = a.data;
  conf["out"] = a.out;
  echo_config(a.out, conf);
  std::vector<RgbImage> outputs;
  for (const auto& s : ds.scenes) {
    RgbImage img;
    if (burst) {
      require(int(s.burst.size()) >= a.frames,
              fmt::format("scene {} has {} burst frames, {} requested", s.id, s.burst.size(), a.frames),
              ErrorCode::Io);
      data::Scene sub = s;
      sub.burst.resize(std::size_t(a.frames));
      img = train::burst_baseline(sub);
    } else {
      img = train::classic_baseline(s);
      if (a.method == "classic+stretch") img = isp::histogram_stretch(img);
    }
    io::write_ppm8(fs::path(a.out) / (s.id + ".ppm"), img);
    outputs.push_back(std::move(img));
  }
  train::EvalReport r = train::evaluate_images(ds, outputs);
  r.config = "baseline " + a.method;
  for (const auto& m : r.rows)
    std::cout << fmt::format("{} {}\n", m.id, metrics::format_pair(m.psnr_db, m.ssim));
  std::cout << fmt::format("mean {}\n", metrics::format_pair(r.mean_psnr, r.mean_ssim));
  train::write_metrics_csv(fs::path(a.out) / "metrics.csv", r);
  io::write_text(fs::path(a.out) / "report.txt", train::format_report(r));
  return 0;
}

struct AblateArgs {
  std::string train, test, xtrans_train, xtrans_test, out;
  TrainFlags train_flags;
};

data::Dataset xtrans_counterpart(const data::Dataset& like, std::uint64_t seed) {
  const auto& raw = like.scenes.front().capture.raw;
  data::SimulateOptions o;
  o.scenes = int(like.scenes.size());
  o.width = (raw.width() + 5) / 6 * 6;
  o.height = (raw.height() + 5) / 6 * 6;
  o.ratio = like.scenes.front().capture.ratio;
  o.cfa = Cfa::XTrans;
  o.seed = seed;
  return data::simulate_dataset(o);
}

int cmd_ablate(const AblateArgs& a, const Global& g) {
  const train::TrainConfig cfg = a.train_flags.resolve(g);
  train::AblationData d;
  d.bayer_train = data::load_dataset(a.train);
  d.bayer_test = data::load_dataset(a.test);
  require(a.xtrans_train.empty() == a.xtrans_test.empty(),
          "--xtrans-train and --xtrans-test go together");
  std::string xsource = "simulated";
  if (!a.xtrans_train.empty()) {
    d.xtrans_train = data::load_dataset(a.xtrans_train);
    d.xtrans_test = data::load_dataset(a.xtrans_test);
    xsource = "loaded";
  } else {
    d.xtrans_train = xtrans_counterpart(d.bayer_train, g.seed ^ 0x1111);
    d.xtrans_test = xtrans_counterpart(d.bayer_test, g.seed ^ 0x2222);
  }
  prepare_out_dir(a.out, g.force);
  json conf = base_config("ablate", g);
  conf["train_data"] = a.train;
  conf["test_data"] = a.test;
  conf["xtrans"] = xsource;
  if (!a.xtrans_train.empty()) {
    conf["xtrans_train"] = a.xtrans_train;
    conf["xtrans_test"] = a.xtrans_test;
  }
  conf["out"] = a.out;
  conf["train"] = train_json(cfg);
  echo_config(a.out, conf);
  const auto rows = train::ablation_suite(d, cfg, [](const std::string& row, const std::string& col) {
    std::cerr << fmt::format("training {} / {}\n", row, col);
  });
  const std::string table = train::format_ablation(rows);
  io::write_text(fs::path(a.out) / "ablation.txt", table);
  train::write_ablation_csv(fs::path(a.out) / "ablation.csv", rows);
  std::cout << table;
  return 0;
}

int cmd_gradcheck(const Global& g) {
  std::cout << base_config("gradcheck", g).dump() << "\n";
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (const auto& e : nn::gradient_suite(g.seed + 7)) {
    const bool pass = e.result.max_rel_error < nn::kGradTolerance;
    ok = ok && pass;
    std::cout << fmt::format("{:<24} max rel err {:.3e} over {:>4} elements  {}\n", e.op,
                             e.result.max_rel_error, e.result.checked, pass ? "ok" : "FAIL");
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << fmt::format("{} in {:.2f} s (threshold {:g})\n", ok ? "all ops pass" : "FAILED", s,
                           nn::kGradTolerance);
  return ok ? 0 : kExitFailure;
}

struct BenchArgs {
  std::string size = "4240x2832";
  ModelFlags model;
  int repeat = 1;
};

int cmd_bench(const BenchArgs& a, const Global& g) {
  const Size sz = parse_size(a.size);
  const models::ModelSpec spec = a.model.resolve(g);
  const models::Weights w = models::init_weights(spec, g.seed);
  RawMosaic raw;
  raw.meta.cfa = models::input_cfa(spec.input);
  const int period = raw.meta.cfa_period();
  require(sz.width % period == 0 && sz.height % period == 0,
          fmt::format("size must be a multiple of the CFA period {}", period));
  raw.meta.black_level = 512;
  raw.meta.white_level = 16383;
  raw.pixels = Plane2D<std::uint16_t>(sz.width, sz.height);
  std::mt19937_64 rng(g.seed);
  for (auto& v : raw.pixels.data) v = std::uint16_t(512 + rng() % 256);
  json conf = base_config("bench", g);
  conf["size"] = a.size;
  conf["model"] = spec_json(spec);
  conf["repeat"] = a.repeat;
  std::cout << conf.dump() << "\n";
  for (int i = 0; i < a.repeat; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const RgbImage out = models::forward_pipeline(raw, AmplificationRatio(100.0), spec, w);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::cout << fmt::format("{}x{} {} forward {:.1f} ms\n", out.width, out.height,
                             spec.descriptor(), ms);
  }
  std::cout << "full-scale reference (GPU): 0.38 s Bayer, 0.66 s X-Trans at full resolution\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned low-light raw processing: simulate, train, evaluate"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--preset", g.preset, "desk|paper")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--isa", g.isa, "kernel set: auto|scalar|avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
  app.add_flag("--force", g.force, "allow writing into existing outputs");

  SimulateArgs sim_a;
  auto* sim = app.add_subcommand("simulate", "write synthetic short/long exposure pairs");
  sim->add_option("--scenes", sim_a.scenes, "number of scenes")->check(CLI::PositiveNumber);
  sim->add_option("--size", sim_a.size, "WxH");
  sim->add_option("--ratio", sim_a.ratio, "exposure ratio (>= 1)");
  sim->add_option("--sensor", sim_a.sensor, "bayer|xtrans")->check(CLI::IsMember({"bayer", "xtrans"}));
  sim->add_option("--out", sim_a.out, "output dataset directory")->required();
  sim->add_option("--burst-frames", sim_a.burst_frames, "extra short exposures per scene")
      ->check(CLI::NonNegativeNumber);

  TrainArgs train_a;
  auto* tr = app.add_subcommand("train", "train a network on a dataset");
  tr->add_option("--data", train_a.data, "dataset directory")->required();
  tr->add_option("--out", train_a.out, "output directory")->required();
  train_a.model.add(tr);
  train_a.train.add(tr);

  EvalArgs eval_a;
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of trained weights on a dataset");
  ev->add_option("--weights", eval_a.weights, "weight file")->required();
  ev->add_option("--data", eval_a.data, "dataset directory")->required();
  ev->add_option("--out", eval_a.out, "output directory")->required();
  ev->add_flag("--stretch", eval_a.stretch, "compare against histogram-stretched references");

  InferArgs infer_a;
  auto* inf = app.add_subcommand("infer", "process one raw file");
  inf->add_option("--weights", infer_a.weights, "weight file")->required();
  inf->add_option("--raw", infer_a.raw, "input PGM")->required();
  inf->add_option("--meta", infer_a.meta, "sidecar (default: raw path with .meta)");
  inf->add_option("--ratio", infer_a.ratio, "amplification ratio (default: from sidecar)");
  inf->add_option("--out", infer_a.out, "output PPM")->required();

  BaselineArgs base_a;
  auto* bl = app.add_subcommand("baseline", "classic pipeline and burst baselines");
  bl->add_option("--method", base_a.method, "classic|classic+stretch|burst")
      ->check(CLI::IsMember({"classic", "classic+stretch", "burst"}));
  bl->add_option("--frames", base_a.frames, "burst frames to combine")->check(CLI::PositiveNumber);
  bl->add_option("--data", base_a.data, "dataset directory")->required();
  bl->add_option("--out", base_a.out, "output directory")->required();

  AblateArgs abl_a;
  auto* ab = app.add_subcommand("ablate", "train and evaluate the eight table conditions");
  ab->add_option("--train", abl_a.train, "Bayer training dataset")->required();
  ab->add_option("--test", abl_a.test, "Bayer test dataset")->required();
  ab->add_option("--xtrans-train", abl_a.xtrans_train, "X-Trans training dataset");
  ab->add_option("--xtrans-test", abl_a.xtrans_test, "X-Trans test dataset");
  ab->add_option("--out", abl_a.out, "output directory")->required();
  abl_a.train_flags.add(ab);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every op");

  BenchArgs bench_a;
  auto* bn = app.add_subcommand("bench", "time one forward pass");
  bn->add_option("--size", bench_a.size, "WxH");
  bn->add_option("--repeat", bench_a.repeat, "number of timed passes")->check(CLI::PositiveNumber);
  bench_a.model.add(bn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (g.isa != "auto") simd::force_isa(simd::parse_isa(g.isa));
    if (*sim) return cmd_simulate(sim_a, g);
    if (*tr) return cmd_train(train_a, g);
    if (*ev) return cmd_eval(eval_a, g);
    if (*inf) return cmd_infer(infer_a, g);
    if (*bl) return cmd_baseline(base_a, g);
    if (*ab) return cmd_ablate(abl_a, g);
    if (*gc) return cmd_gradcheck(g);
    if (*bn) return cmd_bench(bench_a, g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
