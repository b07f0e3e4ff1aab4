#pragma once

// Traditional camera pipeline baseline plus the fairness adjustments and the
// idealized burst denoiser used for comparisons.

#include <span>
#include <vector>

#include "sid/image.hpp"
#include "sid/raw.hpp"

namespace sid::isp {

struct IspParams {
  WhiteBalance wb;
  double display_gamma = 2.2;

  void validate() const;
};

// Bilinear interpolation for Bayer; nearest-cell (3x3 block mean) for X-Trans.
// Native samples pass through unchanged. Output is linear and clamped to [0,1].
RgbImage demosaic_bilinear(const Mosaic& mosaic, Cfa cfa);

RgbImage white_balance(const RgbImage& img, const WhiteBalance& gains);

RgbImage gamma_encode(const RgbImage& img, double display_gamma = 2.2);

// normalize -> amplify -> demosaic -> white balance -> gamma
RgbImage classic_pipeline(const RawMosaic& raw, AmplificationRatio ratio, const IspParams& params);

// Per-channel gain so each channel mean equals the reference's; channels with
// zero mean are left unchanged. Result clamped to [0,1].
RgbImage match_channel_means(const RgbImage& img, const RgbImage& reference);

// Per-pixel, per-channel median; even counts average the two middle values.
RgbImage burst_median(std::span<const RgbImage> frames);

// Percentiles taken on BT.601 luminance with the nearest-rank rule, then an
// affine stretch of all channels clamped to [0,1]. Near-constant images
// (p_hi - p_lo < 1e-6) are returned unchanged.
RgbImage histogram_stretch(const RgbImage& img, double lo_pct = 0.1, double hi_pct = 99.9);

}  // namespace sid::isp
