#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "helpers.hpp"
#include "sid/isp.hpp"
#include "sid/metrics.hpp"
#include "sid/nn/ops.hpp"
#include "sid/train.hpp"

using namespace sid;
using models::InputMode;
using models::ModelKind;
using nn::Shape;
using nn::Tensor;

namespace {

data::Dataset small_dataset(int scenes, int size, Cfa cfa, std::uint64_t seed) {
  data::SimulateOptions o;
  o.scenes = scenes;
  o.width = o.height = size;
  o.cfa = cfa;
  o.seed = seed;
  return data::simulate_dataset(o);
}

train::TrainConfig quick_config(int crop, int epochs) {
  train::TrainConfig c = train::default_config(models::Preset::Desk);
  c.crop = crop;
  c.epochs = epochs;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("learning rate schedules") {
  const auto paper = train::default_config(models::Preset::Paper);
  CHECK(paper.crop == 512);
  CHECK(paper.epochs == 4000);
  CHECK(paper.lr_at(0) == 1e-4);
  CHECK(paper.lr_at(1999) == 1e-4);
  CHECK(paper.lr_at(2000) == 1e-5);
  const auto desk = train::default_config(models::Preset::Desk);
  CHECK(desk.crop == 64);
  CHECK(desk.epochs * 16 == 2000);
  CHECK(desk.lr_at(desk.lr_switch_epoch - 1) == desk.lr_initial);
  CHECK(desk.lr_at(desk.lr_switch_epoch) == desk.lr_after);
}

TEST_CASE("config validation and loss names") {
  auto c = train::default_config(models::Preset::Desk);
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = train::default_config(models::Preset::Desk);
  c.lr_after = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  for (auto k : {train::LossKind::L1, train::LossKind::L2, train::LossKind::Ssim})
    CHECK(train::parse_loss(train::loss_name(k)) == k);
  CHECK_THROWS_AS(train::parse_loss("gan"), Error);
}

TEST_CASE("metric oracles") {
  CHECK(std::abs(metrics::psnr_from_mse(0.01) - 20.0) <= 1e-9);
  // 16 of 25 pixels off by 0.125 in every channel: MSE = 16/25 * 1/64 = 0.01.
  RgbImage a(5, 5, 0.5f), b(5, 5, 0.5f);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 16; ++i) b.at(c, i / 5, i % 5) = 0.625f;
  CHECK(metrics::mse(a, b) == 0.01);
  CHECK(std::abs(metrics::psnr(a, b) - 20.0) <= 1e-9);
  CHECK(metrics::psnr(a, b) == metrics::psnr(b, a));
  CHECK(std::isinf(metrics::psnr(a, a)));
  CHECK(metrics::format_pair(28.88, 0.787) == "28.88/0.787");
  CHECK(metrics::format_pair(metrics::kPsnrInfinity, 1.0) == "inf/1.000");
}

TEST_CASE("psnr falls as noise grows") {
  const RgbImage clean = testing::random_image(32, 32, 1);
  const auto noise = testing::random_floats(clean.data.size(), 2);
  double prev = metrics::kPsnrInfinity;
  for (float amp : {0.01f, 0.02f, 0.05f, 0.1f, 0.2f}) {
    RgbImage n = clean;
    for (std::size_t i = 0; i < n.data.size(); ++i) n.data[i] += amp * noise[i];
    const double p = metrics::psnr(n, clean);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ssim oracles") {
  const RgbImage x = testing::random_image(24, 20, 3), y = testing::random_image(24, 20, 4);
  CHECK(std::abs(metrics::ssim(x, x) - 1.0) <= 1e-9);
  CHECK(metrics::ssim(x, y) == metrics::ssim(y, x));
  CHECK(metrics::ssim(x, y) >= -1.0);
  CHECK(metrics::ssim(x, y) <= 1.0);
  const float u = 0.5f, v = 0.6f;
  const RgbImage cu = testing::constant_image(16, 16, u, u, u), cv = testing::constant_image(16, 16, v, v, v);
  const double mu = u, mv = v, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const double oracle = (2 * mu * mv + c1) / (mu * mu + mv * mv + c1) * (c2 / c2);
  CHECK(std::abs(metrics::ssim(cu, cv) - oracle) <= 1e-9);
  CHECK_THROWS_AS(metrics::ssim(cu, testing::constant_image(15, 16, u, u, u)), Error);
}

TEST_CASE("augment is a D4 action") {
  const Tensor x = Tensor::from({1, 4, 6, 6}, testing::random_floats(144, 5));
  std::set<std::vector<float>> seen;
  for (int k = 0; k < 8; ++k) {
    const Tensor y = train::augment(x, k, InputMode::Srgb);
    seen.insert(std::vector<float>(y.data().begin(), y.data().end()));
    if (k < 4) {
      const Tensor back = train::augment(y, k, InputMode::Srgb);
      CHECK(std::equal(back.data().begin(), back.data().end(), x.data().begin()));
    }
  }
  CHECK(seen.size() == 8);
  const Tensor id = train::augment(x, 0, InputMode::BayerPacked4);
  CHECK(std::equal(id.data().begin(), id.data().end(), x.data().begin()));

  // Transpose swaps the two green planes of Bayer data.
  const Tensor t = train::augment(x, 4, InputMode::BayerPacked4);
  const auto xd = x.data(), td = t.data();
  for (std::size_t yy = 0; yy < 6; ++yy)
    for (std::size_t xx = 0; xx < 6; ++xx) {
      CHECK(td[0 * 36 + yy * 6 + xx] == xd[0 * 36 + xx * 6 + yy]);
      CHECK(td[1 * 36 + yy * 6 + xx] == xd[2 * 36 + xx * 6 + yy]);
      CHECK(td[2 * 36 + yy * 6 + xx] == xd[1 * 36 + xx * 6 + yy]);
    }
  CHECK_THROWS_AS(train::augment(Tensor::zeros({1, 3, 4, 6}), 4, InputMode::Srgb), Error);
  CHECK_THROWS_AS(train::augment(x, 8, InputMode::Srgb), Error);
}

TEST_CASE("augmentation commutes with a symmetric all-conv model") {
  models::ModelSpec s = models::make_spec(ModelKind::Can, InputMode::Srgb);
  s.depth = 2;
  s.base_width = 4;
  models::Weights w = models::init_weights(s, 4);
  // Give every 3x3 kernel slice D4 symmetry: corners, edges and centre.
  for (std::size_t i = 0; i < w.params.size(); ++i) {
    if (w.params[i].shape().h != 3) continue;
    auto d = w.params[i].mutable_data();
    for (std::size_t base = 0; base < d.size(); base += 9) {
      const float corner = d[base], edge = d[base + 1], centre = d[base + 4];
      for (int k : {0, 2, 6, 8}) d[base + k] = corner;
      for (int k : {1, 3, 5, 7}) d[base + k] = edge;
      d[base + 4] = centre;
    }
  }
  const Tensor x = Tensor::from({1, 3, 16, 16}, testing::random_floats(3 * 256, 6, 0, 1));
  const Tensor y = models::forward(w, x);
  for (int k = 1; k < 8; ++k) {
    const Tensor a = models::forward(w, train::augment(x, k, InputMode::Srgb));
    const Tensor b = train::augment(y, k, InputMode::Srgb);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, double(std::abs(a.data()[i] - b.data()[i])));
    CAPTURE(k);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("training is deterministic and reports a loss curve") {
  const auto ds = small_dataset(3, 32, Cfa::BayerRggb, 1);
  const auto spec = models::make_spec(ModelKind::UNet, InputMode::BayerPacked4);
  const auto cfg = quick_config(16, 2);
  int calls = 0;
  const auto a = train::train(ds, spec, cfg, [&](const train::LossPoint&) { ++calls; });
  const auto b = train::train(ds, spec, cfg);
  CHECK(models::identical(a.weights, b.weights));
  CHECK(a.curve.size() == 6);
  CHECK(calls == 6);
  CHECK(a.curve.back().iter == 5);
  CHECK(a.curve.back().epoch == 1);
  for (const auto& p : a.curve) CHECK(std::isfinite(p.loss));
  CHECK_FALSE(models::identical(a.weights, models::init_weights(spec, cfg.seed)));
  auto other = cfg;
  other.seed = 4;
  CHECK_FALSE(models::identical(a.weights, train::train(ds, spec, other).weights));
}

TEST_CASE("training preconditions") {
  const auto ds = small_dataset(2, 32, Cfa::BayerRggb, 2);
  const auto spec = models::make_spec(ModelKind::UNet, InputMode::BayerPacked4);
  CHECK_THROWS_AS(train::train(ds, spec, quick_config(64, 1)), Error);  // crop larger than scenes
  CHECK_THROWS_AS(train::train(ds, spec, quick_config(20, 1)), Error);  // does not pack to 8
  CHECK_THROWS_AS(train::train(data::Dataset{}, spec, quick_config(16, 1)), Error);
  const auto xt = small_dataset(2, 24, Cfa::XTrans, 2);
  CHECK_THROWS_AS(train::train(xt, spec, quick_config(16, 1)), Error);  // 16 is not a multiple of 6
  CHECK_THROWS_AS(train::train(ds, models::make_spec(ModelKind::UNet, InputMode::XTrans9), quick_config(24, 1)),
                  Error);
}

TEST_CASE("x-trans and full-resolution inputs train") {
  const auto xt = small_dataset(2, 24, Cfa::XTrans, 5);
  auto spec = models::make_spec(ModelKind::UNet, InputMode::XTrans9);
  const auto r = train::train(xt, spec, quick_config(24, 1));
  CHECK(r.curve.size() == 2);
  const auto ds = small_dataset(2, 16, Cfa::BayerRggb, 6);
  for (auto input : {InputMode::BayerMasked, InputMode::Srgb}) {
    auto cfg = quick_config(16, 1);
    cfg.loss = train::LossKind::Ssim;
    const auto t = train::train(ds, models::make_spec(ModelKind::Can, input), cfg);
    CHECK(std::isfinite(t.last_epoch_loss));
  }
}

TEST_CASE("evaluation sanity") {
  const auto ds = small_dataset(3, 24, Cfa::BayerRggb, 7);
  std::vector<RgbImage> refs;
  for (const auto& s : ds.scenes) refs.push_back(s.reference);
  const auto r = train::evaluate_images(ds, refs);
  CHECK(r.rows.size() == 3);
  for (const auto& m : r.rows) {
    CHECK(std::isinf(m.psnr_db));
    CHECK(std::abs(m.ssim - 1.0) <= 1e-9);
  }
  std::vector<RgbImage> noisy;
  for (std::size_t i = 0; i < refs.size(); ++i) noisy.push_back(testing::random_image(24, 24, 100 + i));
  const auto n = train::evaluate_images(ds, noisy);
  double p = 0.0, s = 0.0;
  for (const auto& m : n.rows) {
    p += m.psnr_db;
    s += m.ssim;
  }
  CHECK(n.mean_psnr == doctest::Approx(p / 3.0));
  CHECK(n.mean_ssim == doctest::Approx(s / 3.0));
  CHECK_THROWS_AS(train::evaluate_images(ds, {}), Error);

  const auto spec = models::make_spec(ModelKind::UNet, InputMode::BayerPacked4);
  const auto e = train::evaluate(models::init_weights(spec, 1), ds);
  CHECK(e.rows.size() == 3);
  CHECK(e.config == spec.descriptor());
  CHECK(train::format_report(e).find("psnr/ssim") != std::string::npos);

  const auto dir = testing::scratch_dir("metrics_csv");
  train::write_metrics_csv(dir / "m.csv", r);
  const std::string csv = io::read_text(dir / "m.csv");
  CHECK(csv.rfind("scene_id,psnr_db,ssim\n0000,inf,1.000000\n", 0) == 0);
}

TEST_CASE("baselines") {
  data::SimulateOptions o;
  o.scenes = 2;
  o.width = o.height = 24;
  o.seed = 9;
  o.burst_frames = 8;
  const auto ds = data::simulate_dataset(o);
  for (const auto& s : ds.scenes) {
    const RgbImage c = train::classic_baseline(s);
    const RgbImage b = train::burst_baseline(s);
    CHECK(c.width == 24);
    CHECK(b.height == 24);
    CHECK(metrics::psnr(b, s.reference) > metrics::psnr(c, s.reference));
    for (float v : c.data) CHECK((v >= 0.0f && v <= 1.0f));
  }
  data::Scene no_burst = ds.scenes[0];
  no_burst.burst.clear();
  CHECK_THROWS_AS(train::burst_baseline(no_burst), Error);
}

TEST_CASE("dataset simulation and round trip") {
  data::SimulateOptions o;
  o.scenes = 2;
  o.width = 24;
  o.height = 18;
  o.cfa = Cfa::XTrans;
  o.ratio = 250;
  o.seed = 4;
  o.burst_frames = 2;
  const auto a = data::simulate_dataset(o);
  const auto b = data::simulate_dataset(o);
  REQUIRE(a.scenes.size() == 2);
  CHECK(a.scenes[0].capture == b.scenes[0].capture);
  CHECK_FALSE(a.scenes[0].capture.raw == a.scenes[1].capture.raw);
  CHECK(a.scenes[0].capture.ratio == 250.0);
  CHECK(a.scenes[1].burst.size() == 2);

  const auto dir = testing::scratch_dir("dataset");
  data::write_dataset(dir, a);
  CHECK(std::filesystem::exists(dir / "scenes" / "0001" / "burst_01.pgm"));
  const std::string meta = io::read_text(dir / "scenes" / "0000" / "input.meta");
  CHECK(meta.find("ratio=250") != std::string::npos);
  const auto loaded = data::load_dataset(dir, true);
  REQUIRE(loaded.scenes.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(loaded.scenes[i].id == a.scenes[i].id);
    CHECK(loaded.scenes[i].capture == a.scenes[i].capture);
    CHECK(loaded.scenes[i].reference == a.scenes[i].reference);
    CHECK(loaded.scenes[i].burst == a.scenes[i].burst);
  }
  CHECK(data::load_dataset(dir).scenes[0].burst.empty());
  CHECK_THROWS_AS(data::load_dataset(dir / "nope"), Error);
}

TEST_CASE("ablation suite produces eight rows") {
  train::AblationData d;
  d.bayer_train = small_dataset(2, 32, Cfa::BayerRggb, 11);
  d.bayer_test = small_dataset(1, 32, Cfa::BayerRggb, 12);
  d.xtrans_train = small_dataset(2, 48, Cfa::XTrans, 13);
  d.xtrans_test = small_dataset(1, 48, Cfa::XTrans, 14);
  auto cfg = quick_config(16, 1);
  std::vector<std::string> visited;
  const auto rows = train::ablation_suite(d, cfg, [&](const std::string& r, const std::string& c) {
    visited.push_back(r + "/" + c);
  });
  REQUIRE(rows.size() == 8);
  const std::vector<std::string> names = {"Default", "CAN", "sRGB input", "L2 loss", "SSIM loss",
                                          "Masked Bayer", "6x6 packed X-Trans", "Stretched references"};
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(rows[i].name == names[i]);
    for (const auto* cell : {&rows[i].bayer, &rows[i].xtrans}) {
      if (!cell->ran) continue;
      CAPTURE(rows[i].name);
      CAPTURE(cell->error);
      CHECK(cell->ok);
      CHECK(std::isfinite(cell->psnr_db));
      CHECK(std::isfinite(cell->ssim));
    }
    CHECK((rows[i].bayer.ran || rows[i].xtrans.ran));
  }
  CHECK(rows[0].xtrans.ran);
  CHECK(rows[6].xtrans.ran);
  CHECK(rows[0].reference == "28.88/0.787");
  CHECK(visited.size() == 9);
  const std::string table = train::format_ablation(rows);
  CHECK(table.find("Stretched references") != std::string::npos);

  // A failing column is recorded, the rest still runs.
  train::AblationData empty = d;
  empty.xtrans_train.scenes.clear();
  const auto partial = train::ablation_suite(empty, cfg);
  CHECK(partial.size() == 8);
  CHECK(partial[0].bayer.ok);
  CHECK_FALSE(partial[0].xtrans.ok);
  CHECK(train::format_ablation(partial).find("failed") != std::string::npos);
}

}  // TEST_SUITE
