#pragma once

// Shared SSIM machinery for the evaluation metric (double) and the training
// loss (float/double): 11x11 Gaussian window with sigma 1.5, valid region only,
// K1 = 0.01, K2 = 0.03, dynamic range 1.

#include <array>
#include <cmath>
#include <vector>

#include "sid/error.hpp"

namespace sid::detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

template <typename T>
std::array<T, kSsimWindow> ssim_taps() {
  std::array<double, kSsimWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  std::array<T, kSsimWindow> out{};
  for (int i = 0; i < kSsimWindow; ++i) out[i] = T(g[i] / sum);
  return out;
}

// Separable valid-region Gaussian filter: (h, w) -> (h - 10, w - 10).
template <typename T>
void ssim_filter(const T* in, int h, int w, T* out, std::vector<T>& scratch) {
  const auto g = ssim_taps<T>();
  const int wo = w - kSsimWindow + 1, ho = h - kSsimWindow + 1;
  scratch.assign(std::size_t(h) * wo, T(0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      T acc = 0;
      for (int k = 0; k < kSsimWindow; ++k) acc += g[k] * in[std::size_t(y) * w + x + k];
      scratch[std::size_t(y) * wo + x] = acc;
    }
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      T acc = 0;
      for (int k = 0; k < kSsimWindow; ++k) acc += g[k] * scratch[std::size_t(y + k) * wo + x];
      out[std::size_t(y) * wo + x] = acc;
    }
}

// Adds the adjoint of ssim_filter applied to `gout` into `gin`.
template <typename T>
void ssim_filter_adjoint(const T* gout, int h, int w, T* gin, std::vector<T>& scratch) {
  const auto g = ssim_taps<T>();
  const int wo = w - kSsimWindow + 1, ho = h - kSsimWindow + 1;
  scratch.assign(std::size_t(h) * wo, T(0));
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      const T v = gout[std::size_t(y) * wo + x];
      for (int k = 0; k < kSsimWindow; ++k) scratch[std::size_t(y + k) * wo + x] += g[k] * v;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      const T v = scratch[std::size_t(y) * wo + x];
      for (int k = 0; k < kSsimWindow; ++k) gin[std::size_t(y) * w + x + k] += g[k] * v;
    }
}

// Filtered moments kept from the forward pass for the backward pass.
template <typename T>
struct SsimMoments {
  int h = 0, w = 0, ho = 0, wo = 0;
  std::vector<T> mu_x, mu_y, e_xx, e_yy, e_xy;
};

// Mean SSIM of two single-channel images of equal size.
template <typename T>
T ssim_mean(const T* x, const T* y, int h, int w, SsimMoments<T>* keep = nullptr) {
  require(h >= kSsimWindow && w >= kSsimWindow,
          "SSIM needs images of at least 11x11 pixels");
  SsimMoments<T> m;
  m.h = h;
  m.w = w;
  m.ho = h - kSsimWindow + 1;
  m.wo = w - kSsimWindow + 1;
  const std::size_t n = std::size_t(h) * w, no = std::size_t(m.ho) * m.wo;
  std::vector<T> prod(n), scratch;
  m.mu_x.resize(no);
  m.mu_y.resize(no);
  m.e_xx.resize(no);
  m.e_yy.resize(no);
  m.e_xy.resize(no);
  ssim_filter(x, h, w, m.mu_x.data(), scratch);
  ssim_filter(y, h, w, m.mu_y.data(), scratch);
  for (std::size_t i = 0; i < n; ++i) prod[i] = x[i] * x[i];
  ssim_filter(prod.data(), h, w, m.e_xx.data(), scratch);
  for (std::size_t i = 0; i < n; ++i) prod[i] = y[i] * y[i];
  ssim_filter(prod.data(), h, w, m.e_yy.data(), scratch);
  for (std::size_t i = 0; i < n; ++i) prod[i] = x[i] * y[i];
  ssim_filter(prod.data(), h, w, m.e_xy.data(), scratch);

  const T c1 = T(kSsimC1), c2 = T(kSsimC2);
  T total = 0;
  for (std::size_t i = 0; i < no; ++i) {
    const T mx = m.mu_x[i], my = m.mu_y[i];
    const T sxx = m.e_xx[i] - mx * mx, syy = m.e_yy[i] - my * my, sxy = m.e_xy[i] - mx * my;
    total += ((T(2) * mx * my + c1) * (T(2) * sxy + c2)) /
             ((mx * mx + my * my + c1) * (sxx + syy + c2));
  }
  if (keep) *keep = std::move(m);
  return total / T(no);
}

// Accumulates d(mean SSIM)/dx * upstream into gx (and likewise gy when
// non-null).
template <typename T>
void ssim_mean_backward(const T* x, const T* y, const SsimMoments<T>& m, T upstream, T* gx,
                        T* gy) {
  const std::size_t n = std::size_t(m.h) * m.w, no = std::size_t(m.ho) * m.wo;
  const T c1 = T(kSsimC1), c2 = T(kSsimC2);
  const T scale = upstream / T(no);
  // Gradients w.r.t. the filtered maps E[x], E[y], E[x^2], E[y^2], E[xy].
  std::vector<T> g_mx(no), g_my(no), g_xx(no), g_yy(no), g_xy(no);
  for (std::size_t i = 0; i < no; ++i) {
    const T mx = m.mu_x[i], my = m.mu_y[i];
    const T sxx = m.e_xx[i] - mx * mx, syy = m.e_yy[i] - my * my, sxy = m.e_xy[i] - mx * my;
    const T a = T(2) * mx * my + c1, b = T(2) * sxy + c2;
    const T c = mx * mx + my * my + c1, d = sxx + syy + c2;
    const T s = (a * b) / (c * d);
    const T ds_dmx = T(2) * my * b / (c * d) - s * T(2) * mx / c;
    const T ds_dmy = T(2) * mx * b / (c * d) - s * T(2) * my / c;
    const T ds_dsxy = T(2) * a / (c * d);
    const T ds_dvar = -s / d;
    g_mx[i] = scale * (ds_dmx - T(2) * mx * ds_dvar - my * ds_dsxy);
    g_my[i] = scale * (ds_dmy - T(2) * my * ds_dvar - mx * ds_dsxy);
    g_xx[i] = scale * ds_dvar;
    g_yy[i] = scale * ds_dvar;
    g_xy[i] = scale * ds_dsxy;
  }
  std::vector<T> back_mx(n, T(0)), back_my(n, T(0)), back_xx(n, T(0)), back_yy(n, T(0)),
      back_xy(n, T(0)), scratch;
  ssim_filter_adjoint(g_mx.data(), m.h, m.w, back_mx.data(), scratch);
  ssim_filter_adjoint(g_xx.data(), m.h, m.w, back_xx.data(), scratch);
  ssim_filter_adjoint(g_xy.data(), m.h, m.w, back_xy.data(), scratch);
  if (gy) {
    ssim_filter_adjoint(g_my.data(), m.h, m.w, back_my.data(), scratch);
    ssim_filter_adjoint(g_yy.data(), m.h, m.w, back_yy.data(), scratch);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (gx) gx[i] += back_mx[i] + T(2) * x[i] * back_xx[i] + y[i] * back_xy[i];
    if (gy) gy[i] += back_my[i] + T(2) * y[i] * back_yy[i] + x[i] * back_xy[i];
  }
}

// BT.601 luma weights.
inline constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

}  // namespace sid::detail
