#pragma once

// Training loop, evaluation reports, baselines and the ablation harness.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sid/dataset.hpp"
#include "sid/models.hpp"
#include "sid/nn/tensor.hpp"

namespace sid::train {

enum class LossKind { L1, L2, Ssim };
std::string_view loss_name(LossKind k);
LossKind parse_loss(std::string_view s);

struct TrainConfig {
  int crop = 64;
  int epochs = 125;
  double lr_initial = 1e-4;
  double lr_after = 1e-5;
  int lr_switch_epoch = 2000;
  LossKind loss = LossKind::L1;
  bool augment = true;
  std::uint64_t seed = 0;
  models::Preset preset = models::Preset::Desk;
  // Histogram-stretch the references before using them as targets.
  bool stretch_targets = false;

  void validate() const;
  // lr_initial for epochs [0, lr_switch_epoch), lr_after from then on.
  double lr_at(int epoch) const;
};

// desk: crop 64, 125 epochs, lr 2e-3 -> 2e-4 at epoch 100.
// paper: crop 512, 4000 epochs, lr 1e-4 -> 1e-5 at epoch 2000.
TrainConfig default_config(models::Preset preset);

// D4 element k in [0, 8): bit 0 flips columns, bit 1 flips rows, bit 2
// transposes (applied last). Transposes also swap the two green channels of
// Bayer inputs. Spatial dims must be square when transposing.
nn::Tensor augment(const nn::Tensor& x, int k, models::InputMode mode);

struct LossPoint {
  int iter = 0;
  int epoch = 0;
  double loss = 0.0;
};

struct TrainResult {
  models::Weights weights;
  std::vector<LossPoint> curve;
  double first_epoch_loss = 0.0;  // mean over epoch 0
  double last_epoch_loss = 0.0;   // mean over the final epoch
  double seconds = 0.0;
};

using Progress = std::function<void(const LossPoint&)>;

// One random aligned crop per scene per epoch, scenes in a shuffled order.
// Deterministic for a given dataset, spec and config.
TrainResult train(const data::Dataset& ds, const models::ModelSpec& spec, const TrainConfig& cfg,
                  const Progress& progress = {});

struct SceneMetrics {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<SceneMetrics> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::string config;  // free-form echo
};

EvalReport make_report(std::vector<SceneMetrics> rows, std::string config = {});

// Targets are the stored references, histogram-stretched when `stretch`.
EvalReport evaluate(const models::Weights& w, const data::Dataset& ds, bool stretch = false);
EvalReport evaluate_images(const data::Dataset& ds, const std::vector<RgbImage>& outputs,
                           bool stretch = false);

// Classic pipeline with the sidecar white balance, then channel-mean matching
// against the reference.
RgbImage classic_baseline(const data::Scene& scene);
// Median of the linear demosaiced burst frames, then
// white balance, gamma and channel-mean matching.
RgbImage burst_baseline(const data::Scene& scene);

void write_metrics_csv(const std::filesystem::path& path, const EvalReport& r);
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossPoint>& curve);
std::string format_report(const EvalReport& r);

struct AblationCell {
  bool ran = false;
  bool ok = false;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::string error;
};

struct AblationRow {
  std::string name;
  AblationCell bayer;
  AblationCell xtrans;
  std::string reference;  // full-scale published value, informational
};

struct AblationData {
  data::Dataset bayer_train, bayer_test;
  data::Dataset xtrans_train, xtrans_test;
};

using AblationProgress = std::function<void(const std::string& row, const std::string& column)>;

// Eight rows: Default, CAN, sRGB input, L2 loss, SSIM loss, Masked Bayer,
// 6x6 packed X-Trans, Stretched references. A failing cell is recorded and
// the suite continues.
std::vector<AblationRow> ablation_suite(const AblationData& d, const TrainConfig& cfg,
                                        const AblationProgress& progress = {});
std::string format_ablation(const std::vector<AblationRow>& rows);
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

}  // namespace sid::train
