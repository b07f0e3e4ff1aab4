// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Usage: acceptance WORKDIR

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sid/dataset.hpp"
#include "sid/isp.hpp"
#include "sid/metrics.hpp"
#include "sid/models.hpp"
#include "sid/nn/adam.hpp"
#include "sid/nn/gradcheck.hpp"
#include "sid/nn/ops.hpp"
#include "sid/raw.hpp"
#include "sid/raw_io.hpp"
#include "sid/sensor_sim.hpp"
#include "sid/train.hpp"
#include "sid/weights_io.hpp"

using namespace sid;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SID_CLI) + " " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<float> random_floats(std::size_t n, std::uint64_t seed, float lo, float hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Mosaic random_mosaic(int w, int h, std::uint64_t seed) {
  Mosaic m(w, h);
  m.data = random_floats(m.data.size(), seed, 0.0f, 1.0f);
  return m;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto suite = nn::gradient_suite();
  const double s = seconds_since(t0);
  double worst = 0.0;
  std::string worst_op;
  bool ok = !suite.empty();
  for (const auto& e : suite) {
    if (e.result.max_rel_error >= worst) {
      worst = e.result.max_rel_error;
      worst_op = e.op;
    }
    ok = ok && e.result.checked > 0 && e.result.max_rel_error < nn::kGradTolerance;
  }
  return {ok && s < 60.0, fmt::format("{} ops, worst {:.2e} ({}), {:.2f} s", suite.size(), worst, worst_op, s)};
}

Outcome permutation_suite() {
  int cases = 0;
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const int w = 12 * int(seed % 4 + 1), h = 6 * int(seed % 5 + 1);
    const Mosaic m = random_mosaic(w, h, seed);
    for (auto a : {Arrangement::BayerPacked4, Arrangement::BayerMasked, Arrangement::XTrans9,
                   Arrangement::XTrans36}) {
      ok = ok && raw::unpack(raw::pack(m, arrangement_cfa(a), a)) == m;
      ++cases;
    }
    for (int r : {2, 3, 6}) {
      const std::size_t c = 3 * std::size_t(r * r);
      const nn::Tensor x = nn::Tensor::from({1, c, 4, 5}, random_floats(c * 20, seed + 100, -1, 1));
      const nn::Tensor y = nn::space_to_depth(nn::pixel_shuffle(x, r), r);
      ok = ok && std::equal(x.data().begin(), x.data().end(), y.data().begin());
      const nn::Tensor z = nn::Tensor::from({1, 3, std::size_t(2 * r), std::size_t(3 * r)},
                                            random_floats(3 * 6 * std::size_t(r * r), seed + 200, -1, 1));
      const nn::Tensor z2 = nn::pixel_shuffle(nn::space_to_depth(z, r), r);
      ok = ok && std::equal(z.data().begin(), z.data().end(), z2.data().begin());
      cases += 2;
    }
  }
  return {ok, fmt::format("{} bit-exact round trips", cases)};
}

Outcome metric_oracles() {
  const double p = metrics::psnr_from_mse(0.01, 1.0);
  RgbImage a(5, 5, 0.5f), b(5, 5, 0.5f);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 16; ++i) b.at(c, i / 5, i % 5) = 0.625f;  // MSE 16/25 * 1/64 = 0.01
  const double p_img = metrics::psnr(a, b);

  RgbImage x(32, 24);
  x.data = random_floats(x.data.size(), 5, 0, 1);
  const double self = metrics::ssim(x, x);

  const float u = 0.5f, v = 0.6f;
  const RgbImage cu(16, 16, u), cv(16, 16, v);
  const double c1 = 0.01 * 0.01;
  const double oracle = (2.0 * u * v + c1) / (double(u) * u + double(v) * v + c1);
  const double s = metrics::ssim(cu, cv);

  const bool ok = std::abs(p - 20.0) <= 1e-9 && std::abs(p_img - 20.0) <= 1e-9 &&
                  std::abs(self - 1.0) <= 1e-9 && std::abs(s - oracle) <= 1e-9;
  return {ok, fmt::format("psnr {:.12f} / {:.12f}, ssim(x,x) {:.12f}, const ssim {:.12f} vs {:.12f}", p,
                          p_img, self, s, oracle)};
}

Outcome adam_oracle() {
  // Minimize (x - 3)^2 from x = 0.
  using D = nn::BasicTensor<double>;
  D p = D::from({1, 1, 1, 1}, {0.0}, true);
  std::vector<D> params{p};
  nn::AdamState<double> st;
  st.lr = 0.1;
  double x = 0.0, m = 0.0, v = 0.0, worst = 0.0;
  for (int t = 1; t <= 5; ++t) {
    p.zero_grad();
    p.mutable_grad()[0] = 2.0 * (p.item() - 3.0);
    nn::adam_step(std::span<D>(params), st);
    const double g = 2.0 * (x - 3.0);
    m = 0.9 * m + (1.0 - 0.9) * g;
    v = 0.999 * v + (1.0 - 0.999) * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    x = x - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    worst = std::max(worst, std::abs(p.item() - x));
  }
  return {worst <= 1e-10, fmt::format("5 steps, max deviation {:.3e}, x = {:.10f}", worst, x)};
}

Outcome desk_training() {
  data::SimulateOptions o;
  o.scenes = 16;
  o.width = o.height = 64;
  o.ratio = 100.0;
  o.seed = 1;
  const data::Dataset train_ds = data::simulate_dataset(o);
  o.scenes = 8;
  o.seed = 2;
  const data::Dataset test_ds = data::simulate_dataset(o);

  const auto spec = models::make_spec(models::ModelKind::UNet, models::InputMode::BayerPacked4);
  const auto cfg = train::default_config(models::Preset::Desk);
  const auto t0 = Clock::now();
  const auto r = train::train(train_ds, spec, cfg);
  const auto learned = train::evaluate(r.weights, test_ds);
  const double seconds = seconds_since(t0);

  std::vector<RgbImage> classic;
  for (const auto& s : test_ds.scenes) classic.push_back(train::classic_baseline(s));
  const auto base = train::evaluate_images(test_ds, classic);

  const double ratio = r.last_epoch_loss / r.first_epoch_loss;
  const double gap = learned.mean_psnr - base.mean_psnr;
  const bool ok = r.curve.size() <= 2000 && ratio <= 0.3 && gap >= 2.0 && seconds <= 900.0;
  return {ok, fmt::format("{} iters, loss {:.4f} -> {:.4f} (ratio {:.3f}), learned {} vs classic {} "
                          "(gap {:+.2f} dB), {:.0f} s",
                          r.curve.size(), r.first_epoch_loss, r.last_epoch_loss, ratio,
                          metrics::format_pair(learned.mean_psnr, learned.mean_ssim),
                          metrics::format_pair(base.mean_psnr, base.mean_ssim), gap, seconds)};
}

Outcome burst_property() {
  const int trials = 24, frames = 8;
  double ratio_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    const RgbImage scene = sim::render_scene(1000 + std::uint64_t(t), 48, 48);
    sim::SimConfig cfg = sim::default_config(Cfa::BayerRggb, 100.0, 0);
    const RgbImage clean = isp::demosaic_bilinear(sim::linear_mosaic(scene, cfg.sensor), Cfa::BayerRggb);
    std::vector<RgbImage> linear;
    double single = 0.0;
    for (int k = 0; k < frames; ++k) {
      cfg.seed = std::uint64_t(t) * 1000 + std::uint64_t(k);
      const auto pair = sim::simulate_pair(scene, cfg);
      linear.push_back(isp::demosaic_bilinear(
          raw::amplify(raw::normalize(pair.input), AmplificationRatio(cfg.ratio)), Cfa::BayerRggb));
      single += metrics::mse(linear.back(), clean);
    }
    single /= frames;
    ratio_sum += metrics::mse(isp::burst_median(linear), clean) / single;
  }
  const double mean_ratio = ratio_sum / trials;
  return {mean_ratio < 0.5, fmt::format("{} trials x {} frames, median/single MSE ratio {:.3f}", trials,
                                        frames, mean_ratio)};
}

Outcome determinism(const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  const std::string data = (dir / "data").string();
  if (run_cli("--seed 3 simulate --scenes 4 --size 64x64 --out " + data, log) != 0)
    return {false, "simulate failed"};
  const std::string args = " train --data " + data + " --epochs 4 --crop 64 --out ";
  if (run_cli("--seed 9" + args + (dir / "a").string(), log) != 0 ||
      run_cli("--seed 9" + args + (dir / "b").string(), log) != 0)
    return {false, "train failed"};
  const std::string wa = io::read_text(dir / "a" / "weights.sidw");
  const std::string wb = io::read_text(dir / "b" / "weights.sidw");
  const bool same_runs = wa == wb && !wa.empty();

  const models::Weights w = io::load_weights(dir / "a" / "weights.sidw");
  const bool reserialized = io::serialize_weights(w) == wa;
  io::save_weights(dir / "copy.sidw", w);
  const bool round_trip = models::identical(io::load_weights(dir / "copy.sidw"), w) &&
                          io::read_text(dir / "copy.sidw") == wa;
  return {same_runs && reserialized && round_trip,
          fmt::format("two runs {} ({} bytes), re-serialization {}, file round trip {}",
                      same_runs ? "identical" : "DIFFER", wa.size(), reserialized ? "exact" : "DIFFERS",
                      round_trip ? "exact" : "DIFFERS")};
}

Outcome ablation(const fs::path& work) {
  const fs::path dir = work / "ablation";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  const std::string tr = (dir / "train").string(), te = (dir / "test").string();
  if (run_cli("--seed 1 simulate --scenes 8 --size 64x64 --out " + tr, log) != 0 ||
      run_cli("--seed 2 simulate --scenes 4 --size 64x64 --out " + te, log) != 0)
    return {false, "simulate failed"};
  const auto t0 = Clock::now();
  if (run_cli("ablate --train " + tr + " --test " + te + " --epochs 8 --out " + (dir / "out").string(), log) != 0)
    return {false, "ablate exited nonzero, see " + log.string()};
  const double s = seconds_since(t0);

  std::istringstream csv(io::read_text(dir / "out" / "ablation.csv"));
  std::string line;
  std::getline(csv, line);
  std::set<std::string> conditions;
  int cells = 0, good = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string tok; std::getline(ls, tok, ',');) f.push_back(tok);
    if (f.size() < 5) continue;
    ++cells;
    conditions.insert(f[0]);
    if (f[4] == "ok" && std::isfinite(std::stod(f[2])) && std::isfinite(std::stod(f[3]))) ++good;
  }
  const bool has_text = fs::exists(dir / "out" / "ablation.txt");
  return {conditions.size() == 8 && cells == good && cells >= 8 && has_text,
          fmt::format("{} conditions, {}/{} cells finite, {:.0f} s", conditions.size(), good, cells, s)};
}

Outcome shape_contract() {
  using models::InputMode;
  struct Case {
    InputMode input;
    Cfa cfa;
  };
  const std::vector<std::pair<int, int>> sizes = {{48, 36}, {66, 54}, {96, 30}};
  int checked = 0;
  bool ok = true;
  std::string bad;
  for (const Case c : {Case{InputMode::BayerPacked4, Cfa::BayerRggb}, Case{InputMode::XTrans9, Cfa::XTrans},
                       Case{InputMode::XTrans36, Cfa::XTrans}, Case{InputMode::BayerMasked, Cfa::BayerRggb},
                       Case{InputMode::Srgb, Cfa::BayerRggb}}) {
    const auto spec = models::make_spec(models::ModelKind::UNet, c.input);
    const auto w = models::init_weights(spec, 17);
    const int head = models::forward_network(w, nn::Tensor::zeros({1, std::size_t(spec.in_channels), 8, 8})).shape().c;
    const int expected_head = c.input == InputMode::BayerPacked4 ? 12
                              : c.input == InputMode::XTrans9    ? 27
                              : c.input == InputMode::XTrans36   ? 108
                                                                 : 3;
    if (head != expected_head) {
      ok = false;
      bad += fmt::format(" {} head {}", models::input_name(c.input), head);
    }
    for (auto [wd, ht] : sizes) {
      const RgbImage scene = sim::render_scene(std::uint64_t(wd * ht), wd, ht);
      const auto pair = sim::simulate_pair(scene, sim::default_config(c.cfa, 100.0, 4));
      const RgbImage out = models::forward_pipeline(pair.input, AmplificationRatio(100.0), spec, w);
      bool in_range = true;
      for (float v : out.data) in_range = in_range && v >= 0.0f && v <= 1.0f;
      if (out.width != wd || out.height != ht || out.data.size() != std::size_t(3 * wd * ht) || !in_range) {
        ok = false;
        bad += fmt::format(" {}@{}x{}", models::input_name(c.input), wd, ht);
      }
      ++checked;
    }
  }
  return {ok, fmt::format("{} input/size combinations{}", checked, bad.empty() ? "" : ", failed:" + bad)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "sid_acceptance";
  fs::create_directories(work);

  struct Item {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Item> items = {
      {1, "gradient suite", gradient_suite},
      {2, "permutation suite", permutation_suite},
      {3, "metric oracles", metric_oracles},
      {4, "adam oracle", adam_oracle},
      {5, "desk training experiment", desk_training},
      {6, "burst median property", burst_property},
      {7, "determinism", [&] { return determinism(work); }},
      {8, "ablation harness", [&] { return ablation(work); }},
      {9, "shape contract", shape_contract},
  };
  int failed = 0;
  for (const auto& it : items) {
    Outcome o;
    try {
      o = it.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << fmt::format("{} {}: {} ({})\n", o.pass ? "PASS" : "FAIL", it.id, it.name, o.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", int(items.size()) - failed, items.size());
  return failed == 0 ? 0 : 1;
}
