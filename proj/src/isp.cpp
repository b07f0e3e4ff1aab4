#include "sid/isp.hpp"

#include <algorithm>
#include <cmath>

#include "sid/error.hpp"

namespace sid::isp {
namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

float luminance(const RgbImage& img, std::size_t i) {
  const std::size_t n = img.plane_size();
  return 0.299f * img.data[i] + 0.587f * img.data[n + i] + 0.114f * img.data[2 * n + i];
}

RgbImage demosaic_bayer(const Mosaic& m) {
  RgbImage out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const int native = raw::cfa_color(Cfa::BayerRggb, y, x);
      double sum[3] = {0, 0, 0};
      int count[3] = {0, 0, 0};
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          // Reflection keeps parity, so the CFA color of the virtual
          // neighbour is read from its unreflected coordinates.
          const int c = raw::cfa_color(Cfa::BayerRggb, y + dy + 2, x + dx + 2);
          sum[c] += m.at(reflect101(y + dy, m.height), reflect101(x + dx, m.width));
          ++count[c];
        }
      for (int c = 0; c < 3; ++c) {
        const float v = c == native ? m.at(y, x) : float(sum[c] / count[c]);
        out.at(c, y, x) = std::clamp(v, 0.0f, 1.0f);
      }
    }
  return out;
}

RgbImage demosaic_xtrans(const Mosaic& m) {
  RgbImage out(m.width, m.height);
  for (int by = 0; by < m.height; by += 3)
    for (int bx = 0; bx < m.width; bx += 3) {
      double sum[3] = {0, 0, 0};
      int count[3] = {0, 0, 0};
      for (int y = by; y < by + 3; ++y)
        for (int x = bx; x < bx + 3; ++x) {
          const int c = raw::cfa_color(Cfa::XTrans, y, x);
          sum[c] += m.at(y, x);
          ++count[c];
        }
      for (int y = by; y < by + 3; ++y)
        for (int x = bx; x < bx + 3; ++x) {
          const int native = raw::cfa_color(Cfa::XTrans, y, x);
          for (int c = 0; c < 3; ++c) {
            const float v = c == native ? m.at(y, x) : float(sum[c] / count[c]);
            out.at(c, y, x) = std::clamp(v, 0.0f, 1.0f);
          }
        }
    }
  return out;
}

}  // namespace

void IspParams::validate() const {
  require(wb.r > 0 && wb.g > 0 && wb.b > 0, "white-balance gains must be positive");
  require(std::isfinite(display_gamma) && display_gamma > 0, "display gamma must be positive");
}

RgbImage demosaic_bilinear(const Mosaic& mosaic, Cfa cfa) {
  const int period = cfa == Cfa::BayerRggb ? 2 : 6;
  require(mosaic.width > 0 && mosaic.height > 0 && mosaic.width % period == 0 &&
              mosaic.height % period == 0,
          "demosaic: mosaic dimensions must be divisible by the CFA period");
  return cfa == Cfa::BayerRggb ? demosaic_bayer(mosaic) : demosaic_xtrans(mosaic);
}

RgbImage white_balance(const RgbImage& img, const WhiteBalance& gains) {
  require(gains.r > 0 && gains.g > 0 && gains.b > 0, "white-balance gains must be positive");
  const float g[3] = {float(gains.r), float(gains.g), float(gains.b)};
  RgbImage out = img;
  for (int c = 0; c < 3; ++c) {
    float* p = out.plane(c);
    for (std::size_t i = 0; i < out.plane_size(); ++i) p[i] = std::min(g[c] * p[i], 1.0f);
  }
  return out;
}

RgbImage gamma_encode(const RgbImage& img, double display_gamma) {
  require(display_gamma > 0, "display gamma must be positive");
  const double inv = 1.0 / display_gamma;
  RgbImage out = img;
  for (float& v : out.data) v = float(std::pow(std::clamp(double(v), 0.0, 1.0), inv));
  return out;
}

RgbImage classic_pipeline(const RawMosaic& raw, AmplificationRatio ratio,
                          const IspParams& params) {
  params.validate();
  const Mosaic amplified = raw::amplify(raw::normalize(raw), ratio);
  const RgbImage linear = demosaic_bilinear(amplified, raw.meta.cfa);
  return gamma_encode(white_balance(linear, params.wb), params.display_gamma);
}

RgbImage match_channel_means(const RgbImage& img, const RgbImage& reference) {
  require(img.width == reference.width && img.height == reference.height,
          "match_channel_means: image and reference sizes differ");
  RgbImage out = img;
  const std::size_t n = img.plane_size();
  for (int c = 0; c < 3; ++c) {
    double mi = 0.0, mr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mi += img.plane(c)[i];
      mr += reference.plane(c)[i];
    }
    if (mi == 0.0) continue;
    const double scale = mr / mi;
    float* p = out.plane(c);
    for (std::size_t i = 0; i < n; ++i) p[i] = float(std::clamp(p[i] * scale, 0.0, 1.0));
  }
  return out;
}

RgbImage burst_median(std::span<const RgbImage> frames) {
  require(!frames.empty(), "burst_median needs at least one frame");
  const int w = frames[0].width, h = frames[0].height;
  for (const auto& f : frames)
    require(f.width == w && f.height == h, "burst_median: frames differ in size");
  RgbImage out(w, h);
  std::vector<float> values(frames.size());
  const std::size_t k = frames.size();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) values[f] = frames[f].data[i];
    std::sort(values.begin(), values.end());
    out.data[i] = (k % 2 == 1) ? values[k / 2] : 0.5f * (values[k / 2 - 1] + values[k / 2]);
  }
  return out;
}

RgbImage histogram_stretch(const RgbImage& img, double lo_pct, double hi_pct) {
  require(0.0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 100.0,
          "histogram_stretch: need 0 <= lo_pct < hi_pct <= 100");
  const std::size_t n = img.plane_size();
  if (n == 0) return img;
  std::vector<float> lum(n);
  for (std::size_t i = 0; i < n; ++i) lum[i] = luminance(img, i);
  auto rank_value = [&](double pct) {
    const auto rank = std::size_t(std::llround(pct / 100.0 * double(n - 1)));
    std::nth_element(lum.begin(), lum.begin() + std::ptrdiff_t(rank), lum.end());
    return lum[rank];
  };
  const float lo = rank_value(lo_pct);
  const float hi = rank_value(hi_pct);
  if (!(hi - lo >= 1e-6f)) return img;
  const float range = hi - lo;
  RgbImage out = img;
  for (float& v : out.data) v = std::clamp((v - lo) / range, 0.0f, 1.0f);
  return out;
}

}  // namespace sid::isp
