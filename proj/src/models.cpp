#include "sid/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>
#include <map>

#include <fmt/format.h>

#include "sid/isp.hpp"
#include "sid/nn/ops.hpp"

namespace sid::models {

using nn::BasicTensor;
using nn::Shape;

std::string_view kind_name(ModelKind k) { return k == ModelKind::UNet ? "unet" : "can"; }

ModelKind parse_kind(std::string_view s) {
  if (s == "unet") return ModelKind::UNet;
  if (s == "can") return ModelKind::Can;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown model kind '{}' (unet|can)", s));
}

std::string_view input_name(InputMode m) {
  switch (m) {
    case InputMode::BayerPacked4: return "bayer4";
    case InputMode::BayerMasked: return "masked";
    case InputMode::XTrans9: return "xtrans9";
    case InputMode::XTrans36: return "xtrans36";
    case InputMode::Srgb: return "srgb";
  }
  return "?";
}

InputMode parse_input(std::string_view s) {
  for (auto m : {InputMode::BayerPacked4, InputMode::BayerMasked, InputMode::XTrans9,
                 InputMode::XTrans36, InputMode::Srgb})
    if (input_name(m) == s) return m;
  throw Error(ErrorCode::InvalidArgument,
              fmt::format("unknown input mode '{}' (bayer4|masked|xtrans9|xtrans36|srgb)", s));
}

std::string_view preset_name(Preset p) { return p == Preset::Desk ? "desk" : "paper"; }

Preset parse_preset(std::string_view s) {
  if (s == "desk") return Preset::Desk;
  if (s == "paper") return Preset::Paper;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown preset '{}' (desk|paper)", s));
}

int input_channels(InputMode m) {
  switch (m) {
    case InputMode::BayerPacked4:
    case InputMode::BayerMasked: return 4;
    case InputMode::XTrans9: return 9;
    case InputMode::XTrans36: return 36;
    case InputMode::Srgb: return 3;
  }
  return 0;
}

int input_upscale(InputMode m) {
  switch (m) {
    case InputMode::BayerPacked4: return 2;
    case InputMode::XTrans9: return 3;
    case InputMode::XTrans36: return 6;
    default: return 1;
  }
}

Cfa input_cfa(InputMode m) {
  return (m == InputMode::XTrans9 || m == InputMode::XTrans36) ? Cfa::XTrans : Cfa::BayerRggb;
}

bool is_raw_input(InputMode m) { return m != InputMode::Srgb; }

Arrangement input_arrangement(InputMode m) {
  switch (m) {
    case InputMode::BayerPacked4: return Arrangement::BayerPacked4;
    case InputMode::BayerMasked: return Arrangement::BayerMasked;
    case InputMode::XTrans9: return Arrangement::XTrans9;
    case InputMode::XTrans36: return Arrangement::XTrans36;
    case InputMode::Srgb: break;
  }
  throw Error(ErrorCode::InvalidArgument, "the srgb input mode has no raw arrangement");
}

void ModelSpec::validate() const {
  require(in_channels == input_channels(input),
          fmt::format("in_channels {} does not match input mode {} ({} channels)", in_channels,
                      input_name(input), input_channels(input)),
          ErrorCode::Mismatch);
  require(base_width >= 1, "base_width must be >= 1");
  if (kind == ModelKind::UNet)
    require(depth >= 1 && depth <= 10, "U-net depth must be in [1, 10]");
  else
    require(depth >= 2 && depth <= 16, "CAN depth must be in [2, 16]");
}

std::string ModelSpec::descriptor() const {
  return fmt::format("kind={} input={} in_channels={} base_width={} depth={} preset={}",
                     kind_name(kind), input_name(input), in_channels, base_width, depth,
                     preset_name(preset));
}

ModelSpec ModelSpec::parse(std::string_view descriptor) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(descriptor)};
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    require(eq != std::string::npos, fmt::format("malformed spec token '{}'", tok),
            ErrorCode::Format);
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    require(it != kv.end(), fmt::format("model spec is missing '{}'", key), ErrorCode::Format);
    return it->second;
  };
  auto get_int = [&](const char* key) {
    try {
      return std::stoi(get(key));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Format, fmt::format("model spec field '{}' is not an integer", key));
    }
  };
  ModelSpec s;
  s.kind = parse_kind(get("kind"));
  s.input = parse_input(get("input"));
  s.in_channels = get_int("in_channels");
  s.base_width = get_int("base_width");
  s.depth = get_int("depth");
  s.preset = parse_preset(get("preset"));
  s.validate();
  return s;
}

ModelSpec make_spec(ModelKind kind, InputMode input, Preset preset) {
  ModelSpec s;
  s.kind = kind;
  s.input = input;
  s.in_channels = input_channels(input);
  s.preset = preset;
  if (kind == ModelKind::UNet) {
    s.depth = preset == Preset::Desk ? 3 : 5;
    s.base_width = preset == Preset::Desk ? 16 : 32;
  } else {
    s.depth = preset == Preset::Desk ? 6 : 8;
    s.base_width = preset == Preset::Desk ? 24 : 32;
  }
  return s;
}

namespace {

void add_conv(std::vector<ParamInfo>& t, const std::string& name, int cout, int cin, int k) {
  t.push_back({name + ".weight", Shape{std::size_t(cout), std::size_t(cin), std::size_t(k), std::size_t(k)}, cin * k * k});
  t.push_back({name + ".bias", Shape{1, std::size_t(cout), 1, 1}, cin * k * k});
}

void add_deconv(std::vector<ParamInfo>& t, const std::string& name, int cin, int cout) {
  t.push_back({name + ".weight", Shape{std::size_t(cin), std::size_t(cout), 2, 2}, cin * 4});
  t.push_back({name + ".bias", Shape{1, std::size_t(cout), 1, 1}, cin * 4});
}

int can_dilation(int layer) { return 1 << layer; }

}  // namespace

std::vector<ParamInfo> parameter_table(const ModelSpec& spec) {
  spec.validate();
  std::vector<ParamInfo> t;
  const int w = spec.base_width;
  if (spec.kind == ModelKind::UNet) {
    int cin = spec.in_channels;
    for (int l = 0; l < spec.depth; ++l) {
      const int c = w << l;
      add_conv(t, fmt::format("enc{}.conv1", l), c, cin, 3);
      add_conv(t, fmt::format("enc{}.conv2", l), c, c, 3);
      cin = c;
    }
    const int cb = w << spec.depth;
    add_conv(t, "mid.conv1", cb, cin, 3);
    add_conv(t, "mid.conv2", cb, cb, 3);
    for (int l = spec.depth - 1; l >= 0; --l) {
      const int c = w << l;
      add_deconv(t, fmt::format("up{}", l), c * 2, c);
      add_conv(t, fmt::format("dec{}.conv1", l), c, c * 2, 3);
      add_conv(t, fmt::format("dec{}.conv2", l), c, c, 3);
    }
    add_conv(t, "out", spec.out_channels(), w, 1);
  } else {
    int cin = spec.in_channels;
    for (int l = 0; l <= spec.depth; ++l) {
      add_conv(t, fmt::format("can{}", l), w, cin, 3);
      cin = w;
    }
    add_conv(t, "out", spec.out_channels(), w, 1);
  }
  return t;
}

std::size_t parameter_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const auto& p : parameter_table(spec)) n += p.shape.numel();
  return n;
}

namespace {

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  }
  void text(const std::string& s) {
    const std::uint32_t n = std::uint32_t(s.size());
    bytes(&n, sizeof n);
    bytes(s.data(), s.size());
  }
  void shape(const Shape& s) {
    for (std::size_t d : {s.n, s.c, s.h, s.w}) {
      const std::uint64_t v = d;
      bytes(&v, sizeof v);
    }
  }
};

}  // namespace

std::uint64_t structural_hash(const ModelSpec& spec) {
  Fnv f;
  for (const auto& p : parameter_table(spec)) {
    f.text(p.name);
    f.shape(p.shape);
  }
  return f.h;
}

template <typename T>
const BasicTensor<T>& BasicWeights<T>::get(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return params[i];
  throw Error(ErrorCode::Mismatch, fmt::format("no parameter named '{}'", name));
}

template <typename T>
std::uint64_t BasicWeights<T>::structural_hash() const {
  Fnv f;
  for (std::size_t i = 0; i < names.size(); ++i) {
    f.text(names[i]);
    f.shape(params[i].shape());
  }
  return f.h;
}

bool identical(const Weights& a, const Weights& b) {
  if (!(a.spec == b.spec) || a.names != b.names || a.params.size() != b.params.size())
    return false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    if (!(a.params[i].shape() == b.params[i].shape())) return false;
    const auto x = a.params[i].data(), y = b.params[i].data();
    if (!std::equal(x.begin(), x.end(), y.begin(), [](float p, float q) {
          return std::bit_cast<std::uint32_t>(p) == std::bit_cast<std::uint32_t>(q);
        }))
      return false;
  }
  return true;
}

Weights init_weights(const ModelSpec& spec, std::uint64_t seed, bool requires_grad) {
  Weights w;
  w.spec = spec;
  std::mt19937_64 rng(seed);
  for (const auto& p : parameter_table(spec)) {
    const double bound = std::sqrt(1.0 / p.fan_in);
    std::vector<float> v(p.shape.numel());
    for (float& x : v) {
      const double u = double(rng() >> 11) * 0x1.0p-53;
      x = float((2.0 * u - 1.0) * bound);
    }
    w.names.push_back(p.name);
    w.params.push_back(nn::Tensor::from(p.shape, std::move(v), requires_grad));
  }
  return w;
}

Weights zero_weights(const ModelSpec& spec) {
  Weights w;
  w.spec = spec;
  for (const auto& p : parameter_table(spec)) {
    w.names.push_back(p.name);
    w.params.push_back(nn::Tensor::zeros(p.shape));
  }
  return w;
}

template <typename To, typename From>
BasicWeights<To> cast_weights(const BasicWeights<From>& w, bool requires_grad) {
  BasicWeights<To> out;
  out.spec = w.spec;
  out.names = w.names;
  for (const auto& p : w.params) out.params.push_back(nn::cast<To>(p, requires_grad));
  return out;
}

template BasicWeights<double> cast_weights<double, float>(const BasicWeights<float>&, bool);
template BasicWeights<float> cast_weights<float, double>(const BasicWeights<double>&, bool);
template BasicWeights<float> cast_weights<float, float>(const BasicWeights<float>&, bool);

void set_requires_grad(Weights& w, bool flag) {
  for (auto& p : w.params) p.node().requires_grad = flag;
}

namespace {

template <typename T>
BasicTensor<T> conv_act(const BasicWeights<T>& w, const std::string& name,
                        const BasicTensor<T>& x, nn::ConvParams cp) {
  return nn::leaky_relu(nn::conv2d(x, w.get(name + ".weight"), w.get(name + ".bias"), cp));
}

template <typename T>
BasicTensor<T> unet_forward(const BasicWeights<T>& w, const BasicTensor<T>& x) {
  const int depth = w.spec.depth;
  const std::size_t m = std::size_t(1) << depth;
  require(x.shape().h % m == 0 && x.shape().w % m == 0,
          fmt::format("U-net input {}x{} is not divisible by {}", x.shape().h, x.shape().w, m));
  const nn::ConvParams same{1, 1, 1};
  std::vector<BasicTensor<T>> skips;
  BasicTensor<T> h = x;
  for (int l = 0; l < depth; ++l) {
    h = conv_act(w, fmt::format("enc{}.conv1", l), h, same);
    h = conv_act(w, fmt::format("enc{}.conv2", l), h, same);
    skips.push_back(h);
    h = nn::maxpool2(h);
  }
  h = conv_act(w, "mid.conv1", h, same);
  h = conv_act(w, "mid.conv2", h, same);
  for (int l = depth - 1; l >= 0; --l) {
    const std::string up = fmt::format("up{}", l);
    h = nn::conv2d_transposed(h, w.get(up + ".weight"), w.get(up + ".bias"), 2, 0);
    h = nn::concat_channels(h, skips[std::size_t(l)]);
    h = conv_act(w, fmt::format("dec{}.conv1", l), h, same);
    h = conv_act(w, fmt::format("dec{}.conv2", l), h, same);
  }
  return nn::conv2d(h, w.get("out.weight"), w.get("out.bias"), {1, 0, 1});
}

template <typename T>
BasicTensor<T> can_forward(const BasicWeights<T>& w, const BasicTensor<T>& x) {
  BasicTensor<T> h = x;
  for (int l = 0; l <= w.spec.depth; ++l) {
    const int d = l < w.spec.depth ? can_dilation(l) : 1;
    h = conv_act(w, fmt::format("can{}", l), h, {1, d, d});
  }
  return nn::conv2d(h, w.get("out.weight"), w.get("out.bias"), {1, 0, 1});
}

}  // namespace

template <typename T>
BasicTensor<T> forward_network(const BasicWeights<T>& w, const BasicTensor<T>& x) {
  require(x.shape().c == std::size_t(w.spec.in_channels),
          fmt::format("network expects {} input channels, got {}", w.spec.in_channels,
                      x.shape().c),
          ErrorCode::Mismatch);
  return w.spec.kind == ModelKind::UNet ? unet_forward(w, x) : can_forward(w, x);
}

template <typename T>
BasicTensor<T> forward(const BasicWeights<T>& w, const BasicTensor<T>& x) {
  BasicTensor<T> y = forward_network(w, x);
  const int r = w.spec.upscale();
  return r == 1 ? y : nn::pixel_shuffle(y, r);
}

template struct BasicWeights<float>;
template struct BasicWeights<double>;
template nn::Tensor forward_network(const Weights&, const nn::Tensor&);
template nn::BasicTensor<double> forward_network(const BasicWeights<double>&,
                                                 const nn::BasicTensor<double>&);
template nn::Tensor forward(const Weights&, const nn::Tensor&);
template nn::BasicTensor<double> forward(const BasicWeights<double>&,
                                         const nn::BasicTensor<double>&);

nn::Tensor image_to_tensor(const RgbImage& img) {
  return nn::Tensor::from(Shape{1, 3, std::size_t(img.height), std::size_t(img.width)}, img.data);
}

RgbImage tensor_to_image(const nn::Tensor& t, int width, int height, bool clamp) {
  const Shape& s = t.shape();
  require(s.n == 1 && s.c == 3 && s.h >= std::size_t(height) && s.w >= std::size_t(width),
          fmt::format("cannot crop a {}x{} image from tensor {}", width, height, s.str()),
          ErrorCode::Mismatch);
  RgbImage img(width, height);
  const auto d = t.data();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        float v = d[(std::size_t(c) * s.h + y) * s.w + x];
        if (clamp) v = std::clamp(v, 0.0f, 1.0f);
        img.at(c, y, x) = v;
      }
  return img;
}

nn::Tensor prepare_input(const RawMosaic& raw, AmplificationRatio ratio, const ModelSpec& spec) {
  raw.validate();
  require(raw.meta.cfa == input_cfa(spec.input),
          fmt::format("model input mode {} needs {} data, raw is {}", input_name(spec.input),
                      cfa_name(input_cfa(spec.input)), cfa_name(raw.meta.cfa)),
          ErrorCode::Mismatch);
  if (spec.input == InputMode::Srgb)
    return image_to_tensor(isp::classic_pipeline(raw, ratio, isp::IspParams{raw.meta.wb}));
  const Mosaic m = raw::amplify(raw::normalize(raw), ratio);
  PackedPlanes p = raw::pack(m, raw.meta.cfa, input_arrangement(spec.input));
  return nn::Tensor::from(Shape{1, std::size_t(p.channels), std::size_t(p.height), std::size_t(p.width)},
                          std::move(p.data));
}

nn::Tensor pad_to_multiple(const nn::Tensor& x, int multiple) {
  const Shape& s = x.shape();
  const std::size_t m = std::size_t(multiple);
  const std::size_t h = (s.h + m - 1) / m * m, w = (s.w + m - 1) / m * m;
  if (h == s.h && w == s.w) return x;
  std::vector<float> out(s.n * s.c * h * w);
  const auto in = x.data();
  for (std::size_t p = 0; p < s.n * s.c; ++p)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        out[(p * h + y) * w + xx] =
            in[(p * s.h + std::min(y, s.h - 1)) * s.w + std::min(xx, s.w - 1)];
  return nn::Tensor::from(Shape{s.n, s.c, h, w}, std::move(out));
}

RgbImage forward_pipeline(const RawMosaic& raw, AmplificationRatio ratio, const ModelSpec& spec,
                          const Weights& weights) {
  spec.validate();
  require(weights.spec == spec,
          fmt::format("weights were built for '{}', not '{}'", weights.spec.descriptor(),
                      spec.descriptor()),
          ErrorCode::Mismatch);
  const nn::Tensor x = pad_to_multiple(prepare_input(raw, ratio, spec), spec.spatial_multiple());
  const nn::Tensor y = forward(weights, x);
  return tensor_to_image(y, raw.width(), raw.height(), true);
}

}  // namespace sid::models
