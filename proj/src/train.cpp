#include "sid/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "sid/isp.hpp"
#include "sid/metrics.hpp"
#include "sid/nn/adam.hpp"
#include "sid/nn/ops.hpp"

namespace sid::train {

using models::InputMode;
using models::ModelSpec;
using nn::Shape;
using nn::Tensor;

std::string_view loss_name(LossKind k) {
  switch (k) {
    case LossKind::L1: return "l1";
    case LossKind::L2: return "l2";
    case LossKind::Ssim: return "ssim";
  }
  return "?";
}

LossKind parse_loss(std::string_view s) {
  if (s == "l1") return LossKind::L1;
  if (s == "l2") return LossKind::L2;
  if (s == "ssim") return LossKind::Ssim;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown loss '{}' (l1|l2|ssim)", s));
}

void TrainConfig::validate() const {
  require(crop >= 1, "crop must be positive");
  require(epochs >= 1, "epochs must be >= 1");
  require(lr_initial > 0.0 && lr_after > 0.0 && std::isfinite(lr_initial) && std::isfinite(lr_after),
          "learning rates must be positive");
  require(lr_switch_epoch >= 0, "lr_switch_epoch must be >= 0");
}

double TrainConfig::lr_at(int epoch) const { return epoch < lr_switch_epoch ? lr_initial : lr_after; }

TrainConfig default_config(models::Preset preset) {
  TrainConfig c;
  c.preset = preset;
  if (preset == models::Preset::Desk) {
    c.crop = 64;
    c.epochs = 125;
    c.lr_initial = 2e-3;
    c.lr_after = 2e-4;
    c.lr_switch_epoch = 100;
  } else {
    c.crop = 512;
    c.epochs = 4000;
    c.lr_initial = 1e-4;
    c.lr_after = 1e-5;
    c.lr_switch_epoch = 2000;
  }
  return c;
}

Tensor augment(const Tensor& x, int k, InputMode mode) {
  require(k >= 0 && k < 8, "augment: k must be in [0, 8)");
  const Shape s = x.shape();
  const bool flip_cols = k & 1, flip_rows = k & 2, transpose = k & 4;
  if (transpose) require(s.h == s.w, "augment: transposition needs a square tensor");
  std::vector<std::size_t> perm(s.c);
  std::iota(perm.begin(), perm.end(), std::size_t(0));
  if (transpose && (mode == InputMode::BayerPacked4 || mode == InputMode::BayerMasked))
    std::swap(perm[1], perm[2]);
  std::vector<float> out(s.numel());
  const auto in = x.data();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const float* src = in.data() + (n * s.c + perm[c]) * s.plane();
      float* dst = out.data() + (n * s.c + c) * s.plane();
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t xx = 0; xx < s.w; ++xx) {
          std::size_t yi = transpose ? xx : y, xi = transpose ? y : xx;
          if (flip_rows) yi = s.h - 1 - yi;
          if (flip_cols) xi = s.w - 1 - xi;
          dst[y * s.w + xx] = src[yi * s.w + xi];
        }
    }
  return Tensor::from(s, std::move(out));
}

namespace {

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

Tensor crop(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t size) {
  const Shape s = t.shape();
  require(y0 + size <= s.h && x0 + size <= s.w, "crop outside tensor");
  std::vector<float> out(s.n * s.c * size * size);
  const auto in = t.data();
  for (std::size_t p = 0; p < s.n * s.c; ++p)
    for (std::size_t y = 0; y < size; ++y) {
      const float* src = in.data() + (p * s.h + y0 + y) * s.w + x0;
      std::copy(src, src + size, out.data() + (p * size + y) * size);
    }
  return Tensor::from(Shape{s.n, s.c, size, size}, std::move(out));
}

Tensor compute_loss(LossKind k, const Tensor& pred, const Tensor& target) {
  switch (k) {
    case LossKind::L1: return nn::loss_l1(pred, target);
    case LossKind::L2: return nn::loss_l2(pred, target);
    case LossKind::Ssim: return nn::loss_ssim(pred, target);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown loss");
}

int cell_size(InputMode m) {
  switch (m) {
    case InputMode::BayerPacked4: return 2;
    case InputMode::XTrans9: return 3;
    case InputMode::XTrans36: return 6;
    default: return 1;
  }
}

RgbImage target_image(const data::Scene& s, bool stretch) {
  return stretch ? isp::histogram_stretch(s.reference) : s.reference;
}

}  // namespace

TrainResult train(const data::Dataset& ds, const ModelSpec& spec, const TrainConfig& cfg,
                  const Progress& progress) {
  cfg.validate();
  spec.validate();
  require(!ds.scenes.empty(), "training dataset is empty");
  const auto t0 = std::chrono::steady_clock::now();

  const int period = ds.scenes.front().capture.raw.meta.cfa_period();
  const int cell = cell_size(spec.input);
  require(cfg.crop % period == 0,
          fmt::format("crop {} is not a multiple of the CFA period {}", cfg.crop, period));
  require(cfg.crop % cell == 0 && (cfg.crop / cell) % spec.spatial_multiple() == 0,
          fmt::format("crop {} does not pack to a multiple of {} for input {}", cfg.crop,
                      spec.spatial_multiple(), models::input_name(spec.input)));

  struct Prepared {
    Tensor input, target;
    int width, height;
  };
  std::vector<Prepared> prepared;
  for (const auto& s : ds.scenes) {
    const auto& raw = s.capture.raw;
    require(raw.width() >= cfg.crop && raw.height() >= cfg.crop,
            fmt::format("crop {} is larger than scene {} ({}x{})", cfg.crop, s.id, raw.width(),
                        raw.height()));
    prepared.push_back({models::prepare_input(raw, AmplificationRatio(s.capture.ratio), spec),
                        models::image_to_tensor(target_image(s, cfg.stretch_targets)),
                        raw.width(), raw.height()});
  }

  TrainResult result;
  result.weights = models::init_weights(spec, cfg.seed, true);
  std::mt19937_64 rng(cfg.seed ^ 0x7a11e5c0ffeeULL);
  nn::AdamState<float> adam;
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  const std::size_t c = std::size_t(cfg.crop);

  int iter = 0;
  double epoch_sum = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.lr = float(cfg.lr_at(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[below(rng, i)]);
    epoch_sum = 0.0;
    for (std::size_t idx : order) {
      const Prepared& p = prepared[idx];
      const std::size_t ox = below(rng, std::size_t(p.width - cfg.crop) / period + 1) * period;
      const std::size_t oy = below(rng, std::size_t(p.height - cfg.crop) / period + 1) * period;
      Tensor x = crop(p.input, oy / cell, ox / cell, c / cell);
      Tensor target = crop(p.target, oy, ox, c);
      if (cfg.augment) {
        const int k = int(below(rng, 8));
        x = augment(x, k, spec.input);
        target = augment(target, k, InputMode::Srgb);
      }
      const Tensor loss = compute_loss(cfg.loss, models::forward(result.weights, x), target);
      nn::backward(loss);
      nn::adam_step(std::span<Tensor>(result.weights.params), adam);
      for (auto& w : result.weights.params) w.zero_grad();
      const LossPoint pt{iter++, epoch, double(loss.item())};
      epoch_sum += pt.loss;
      result.curve.push_back(pt);
      if (progress) progress(pt);
    }
    if (epoch == 0) result.first_epoch_loss = epoch_sum / double(order.size());
  }
  result.last_epoch_loss = epoch_sum / double(order.size());
  models::set_requires_grad(result.weights, false);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

EvalReport make_report(std::vector<SceneMetrics> rows, std::string config) {
  EvalReport r;
  r.rows = std::move(rows);
  r.config = std::move(config);
  if (!r.rows.empty()) {
    double p = 0.0, s = 0.0;
    for (const auto& m : r.rows) {
      p += m.psnr_db;
      s += m.ssim;
    }
    r.mean_psnr = p / double(r.rows.size());
    r.mean_ssim = s / double(r.rows.size());
  }
  return r;
}

EvalReport evaluate_images(const data::Dataset& ds, const std::vector<RgbImage>& outputs,
                           bool stretch) {
  require(outputs.size() == ds.scenes.size(), "one output per scene is required");
  std::vector<SceneMetrics> rows;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const RgbImage target = target_image(ds.scenes[i], stretch);
    rows.push_back({ds.scenes[i].id, metrics::psnr(outputs[i], target),
                    metrics::ssim(outputs[i], target)});
  }
  return make_report(std::move(rows));
}

EvalReport evaluate(const models::Weights& w, const data::Dataset& ds, bool stretch) {
  std::vector<RgbImage> outputs;
  for (const auto& s : ds.scenes)
    outputs.push_back(models::forward_pipeline(s.capture.raw, AmplificationRatio(s.capture.ratio),
                                               w.spec, w));
  EvalReport r = evaluate_images(ds, outputs, stretch);
  r.config = w.spec.descriptor();
  return r;
}

RgbImage classic_baseline(const data::Scene& scene) {
  const auto& raw = scene.capture.raw;
  const RgbImage img =
      isp::classic_pipeline(raw, AmplificationRatio(scene.capture.ratio), isp::IspParams{raw.meta.wb});
  return isp::match_channel_means(img, scene.reference);
}

RgbImage burst_baseline(const data::Scene& scene) {
  require(!scene.burst.empty(),
          fmt::format("scene {} has no burst frames (simulate with --burst-frames)", scene.id),
          ErrorCode::Io);
  const AmplificationRatio ratio(scene.capture.ratio);
  std::vector<RgbImage> linear;
  for (const auto& frame : scene.burst)
    linear.push_back(isp::demosaic_bilinear(raw::amplify(raw::normalize(frame), ratio), frame.meta.cfa));
  const RgbImage med = isp::burst_median(linear);
  const RgbImage out = isp::gamma_encode(isp::white_balance(med, scene.capture.raw.meta.wb));
  return isp::match_channel_means(out, scene.reference);
}

namespace {

std::string fmt_num(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.{}f}", v, digits);
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const EvalReport& r) {
  std::string text = "scene_id,psnr_db,ssim\n";
  for (const auto& m : r.rows)
    text += fmt::format("{},{},{}\n", m.id, fmt_num(m.psnr_db, 6), fmt_num(m.ssim, 6));
  io::write_text(path, text);
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossPoint>& curve) {
  std::string text = "iter,loss\n";
  for (const auto& p : curve) text += fmt::format("{},{:.9g}\n", p.iter, p.loss);
  io::write_text(path, text);
}

std::string format_report(const EvalReport& r) {
  std::string out;
  if (!r.config.empty()) out += r.config + "\n";
  out += fmt::format("{:<10} {:>10} {:>8}\n", "scene", "psnr_db", "ssim");
  for (const auto& m : r.rows)
    out += fmt::format("{:<10} {:>10} {:>8}\n", m.id, fmt_num(m.psnr_db, 2), fmt_num(m.ssim, 3));
  out += fmt::format("{:<10} {:>10} {:>8}\n", "mean", fmt_num(r.mean_psnr, 2), fmt_num(r.mean_ssim, 3));
  out += "psnr/ssim " + metrics::format_pair(r.mean_psnr, r.mean_ssim) + "\n";
  return out;
}

namespace {

struct AblationJob {
  models::ModelKind kind = models::ModelKind::UNet;
  InputMode input = InputMode::BayerPacked4;
  LossKind loss = LossKind::L1;
  bool stretch = false;
};

// Largest crop <= cfg.crop that is CFA-aligned and packs to the network's
// spatial multiple.
int fit_crop(int wanted, const ModelSpec& spec, int period, int limit) {
  const int step = std::lcm(period, cell_size(spec.input) * spec.spatial_multiple());
  int c = std::max(step, wanted / step * step);
  require(c <= limit, fmt::format("scenes of size {} are too small for a {} crop", limit, c));
  return c;
}

AblationCell run_cell(const AblationJob& job, const data::Dataset& train_ds,
                      const data::Dataset& test_ds, TrainConfig cfg) {
  AblationCell cell;
  cell.ran = true;
  try {
    require(!train_ds.scenes.empty() && !test_ds.scenes.empty(), "no data for this column");
    const ModelSpec spec = models::make_spec(job.kind, job.input, cfg.preset);
    const auto& raw = train_ds.scenes.front().capture.raw;
    cfg.crop = fit_crop(cfg.crop, spec, raw.meta.cfa_period(), std::min(raw.width(), raw.height()));
    cfg.loss = job.loss;
    cfg.stretch_targets = job.stretch;
    const TrainResult tr = train(train_ds, spec, cfg);
    const EvalReport r = evaluate(tr.weights, test_ds, job.stretch);
    cell.psnr_db = r.mean_psnr;
    cell.ssim = r.mean_ssim;
    cell.ok = std::isfinite(r.mean_psnr) && std::isfinite(r.mean_ssim);
    if (!cell.ok) cell.error = "non-finite metric";
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

std::vector<AblationRow> ablation_suite(const AblationData& d, const TrainConfig& cfg,
                                        const AblationProgress& progress) {
  using models::ModelKind;
  struct Spec {
    const char* name;
    std::optional<AblationJob> bayer, xtrans;
    const char* reference;
  };
  const std::vector<Spec> specs = {
      {"Default", AblationJob{}, AblationJob{ModelKind::UNet, InputMode::XTrans9}, "28.88/0.787"},
      {"CAN", AblationJob{ModelKind::Can}, std::nullopt, ""},
      {"sRGB input", AblationJob{ModelKind::UNet, InputMode::Srgb}, std::nullopt, ""},
      {"L2 loss", AblationJob{ModelKind::UNet, InputMode::BayerPacked4, LossKind::L2}, std::nullopt, ""},
      {"SSIM loss", AblationJob{ModelKind::UNet, InputMode::BayerPacked4, LossKind::Ssim}, std::nullopt, ""},
      {"Masked Bayer", AblationJob{ModelKind::UNet, InputMode::BayerMasked}, std::nullopt, ""},
      {"6x6 packed X-Trans", std::nullopt, AblationJob{ModelKind::UNet, InputMode::XTrans36}, ""},
      {"Stretched references",
       AblationJob{ModelKind::UNet, InputMode::BayerPacked4, LossKind::L1, true}, std::nullopt, ""},
  };
  std::vector<AblationRow> rows;
  for (const auto& s : specs) {
    AblationRow row;
    row.name = s.name;
    row.reference = s.reference;
    if (s.bayer) {
      if (progress) progress(row.name, "bayer");
      row.bayer = run_cell(*s.bayer, d.bayer_train, d.bayer_test, cfg);
    }
    if (s.xtrans) {
      if (progress) progress(row.name, "x-trans");
      row.xtrans = run_cell(*s.xtrans, d.xtrans_train, d.xtrans_test, cfg);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string cell_text(const AblationCell& c) {
  if (!c.ran) return "-";
  if (!c.ok) return "failed";
  return metrics::format_pair(c.psnr_db, c.ssim);
}

}  // namespace

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::string out = fmt::format("{:<22} {:>14} {:>14} {:>22}\n", "condition", "bayer", "x-trans",
                                "full-scale ref (Sony)");
  for (const auto& r : rows)
    out += fmt::format("{:<22} {:>14} {:>14} {:>22}\n", r.name, cell_text(r.bayer),
                       cell_text(r.xtrans), r.reference.empty() ? "-" : r.reference);
  for (const auto& r : rows) {
    if (r.bayer.ran && !r.bayer.ok) out += fmt::format("error {} / bayer: {}\n", r.name, r.bayer.error);
    if (r.xtrans.ran && !r.xtrans.ok) out += fmt::format("error {} / x-trans: {}\n", r.name, r.xtrans.error);
  }
  return out;
}

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  std::string text = "condition,column,psnr_db,ssim,status\n";
  auto add = [&](const std::string& name, const char* col, const AblationCell& c) {
    if (!c.ran) return;
    text += fmt::format("{},{},{},{},{}\n", name, col, c.ok ? fmt_num(c.psnr_db, 6) : "",
                        c.ok ? fmt_num(c.ssim, 6) : "", c.ok ? "ok" : "failed");
  };
  for (const auto& r : rows) {
    add(r.name, "bayer", r.bayer);
    add(r.name, "x-trans", r.xtrans);
  }
  io::write_text(path, text);
}

}  // namespace sid::train
