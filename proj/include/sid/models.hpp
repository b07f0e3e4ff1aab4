#pragma once

// U-net and CAN networks mapping packed raw planes (or a full-resolution
// image) to RGB, and the end-to-end inference pipeline.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sid/image.hpp"
#include "sid/nn/tensor.hpp"
#include "sid/raw.hpp"

namespace sid::models {

enum class ModelKind { UNet, Can };
enum class InputMode { BayerPacked4, BayerMasked, XTrans9, XTrans36, Srgb };
enum class Preset { Desk, Paper };

std::string_view kind_name(ModelKind k);
ModelKind parse_kind(std::string_view s);
std::string_view input_name(InputMode m);
InputMode parse_input(std::string_view s);
std::string_view preset_name(Preset p);
Preset parse_preset(std::string_view s);

int input_channels(InputMode m);
// Sub-pixel factor restoring full resolution: 2 (bayer4), 3 (xtrans9),
// 6 (xtrans36), 1 (masked, srgb).
int input_upscale(InputMode m);
Cfa input_cfa(InputMode m);
bool is_raw_input(InputMode m);
Arrangement input_arrangement(InputMode m);  // raw inputs only

struct ModelSpec {
  ModelKind kind = ModelKind::UNet;
  InputMode input = InputMode::BayerPacked4;
  int in_channels = 4;
  int base_width = 16;
  int depth = 3;
  Preset preset = Preset::Desk;

  int upscale() const { return input_upscale(input); }
  int out_channels() const { return 3 * upscale() * upscale(); }
  // Network input height/width must be a multiple of this.
  int spatial_multiple() const { return kind == ModelKind::UNet ? 1 << depth : 1; }
  void validate() const;

  // Single-line "key=value ..." form stored in weight files.
  std::string descriptor() const;
  static ModelSpec parse(std::string_view descriptor);

  bool operator==(const ModelSpec&) const = default;
};

// desk: U-net depth 3 width 16, CAN depth 6 width 24.
// paper: U-net depth 5 width 32, CAN depth 8 width 32.
ModelSpec make_spec(ModelKind kind, InputMode input, Preset preset = Preset::Desk);

struct ParamInfo {
  std::string name;
  nn::Shape shape;
  int fan_in = 1;
};

// Every parameter in a fixed order; names and shapes depend only on the spec.
std::vector<ParamInfo> parameter_table(const ModelSpec& spec);
std::size_t parameter_count(const ModelSpec& spec);
// FNV-1a over parameter names and shapes.
std::uint64_t structural_hash(const ModelSpec& spec);

template <typename T>
struct BasicWeights {
  ModelSpec spec;
  std::vector<std::string> names;
  std::vector<nn::BasicTensor<T>> params;

  const nn::BasicTensor<T>& get(std::string_view name) const;
  std::uint64_t structural_hash() const;  // from the stored names/shapes
};
using Weights = BasicWeights<float>;

// Same spec, names, shapes and bit-identical values.
bool identical(const Weights& a, const Weights& b);

// Uniform in +-sqrt(1/fan_in), drawn in table order from a generator seeded
// with `seed`.
Weights init_weights(const ModelSpec& spec, std::uint64_t seed, bool requires_grad = false);
Weights zero_weights(const ModelSpec& spec);

template <typename To, typename From>
BasicWeights<To> cast_weights(const BasicWeights<From>& w, bool requires_grad);

void set_requires_grad(Weights& w, bool flag);

// Network body: (N, in_channels, H, W) -> (N, out_channels, H, W).
template <typename T>
nn::BasicTensor<T> forward_network(const BasicWeights<T>& w, const nn::BasicTensor<T>& x);

// Body followed by the sub-pixel layer: (N, 3, rH, rW).
template <typename T>
nn::BasicTensor<T> forward(const BasicWeights<T>& w, const nn::BasicTensor<T>& x);

// normalize -> amplify -> pack for raw inputs; the classic pipeline output for
// the sRGB input mode. Returns (1, in_channels, h, w) with no padding.
nn::Tensor prepare_input(const RawMosaic& raw, AmplificationRatio ratio, const ModelSpec& spec);

// Edge-replicates the bottom/right so H and W are multiples of `multiple`.
nn::Tensor pad_to_multiple(const nn::Tensor& x, int multiple);

RgbImage tensor_to_image(const nn::Tensor& t, int width, int height, bool clamp = true);
nn::Tensor image_to_tensor(const RgbImage& img);

// Full inference; output has the raw's dimensions, clamped to [0,1].
RgbImage forward_pipeline(const RawMosaic& raw, AmplificationRatio ratio, const ModelSpec& spec,
                          const Weights& weights);

}  // namespace sid::models
