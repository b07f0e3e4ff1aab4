#pragma once

// Differentiable ops over NCHW tensors. All are explicitly instantiated for
// float (SIMD-dispatched kernels) and double (scalar reference kernels).

#include <vector>

#include "sid/nn/tensor.hpp"

namespace sid::nn {

inline constexpr double kLeakySlope = 0.2;

struct ConvParams {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

// Cross-correlation. w: (Cout, Cin, k, k); b: (1, Cout, 1, 1) or undefined.
// Output spatial size floor((H + 2p - d(k-1) - 1) / s) + 1.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b,
                      ConvParams params = {});

// Adjoint of conv2d with the same geometry. w: (Cin, Cout, k, k).
// Output spatial size (H - 1) s - 2p + k; with k = s = 2 this doubles H and W.
template <typename T>
BasicTensor<T> conv2d_transposed(const BasicTensor<T>& x, const BasicTensor<T>& w,
                                 const BasicTensor<T>& b, int stride = 2, int pad = 0);

// 2x2 window, stride 2. Gradient goes to the first maximum in row-major
// window order.
template <typename T>
BasicTensor<T> maxpool2(const BasicTensor<T>& x);

// x if x >= 0 else slope * x (the positive branch owns x = 0).
template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope = T(kLeakySlope));

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

// (N, C r^2, H, W) -> (N, C, rH, rW) with
// out[n, c, y r + i, x r + j] = in[n, c r^2 + i r + j, y, x].
template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, int r);

// Inverse of pixel_shuffle.
template <typename T>
BasicTensor<T> space_to_depth(const BasicTensor<T>& x, int r);

// mean |pred - target|, subgradient sign(0) = 0.
template <typename T>
BasicTensor<T> loss_l1(const BasicTensor<T>& pred, const BasicTensor<T>& target);

template <typename T>
BasicTensor<T> loss_l2(const BasicTensor<T>& pred, const BasicTensor<T>& target);

// 1 - mean SSIM on luminance (3-channel inputs) or the single channel,
// with the same window and constants as metrics::ssim.
template <typename T>
BasicTensor<T> loss_ssim(const BasicTensor<T>& pred, const BasicTensor<T>& target);

// sum_i x_i * weights_i (scalar); used to project outputs in gradient checks.
template <typename T>
BasicTensor<T> weighted_sum(const BasicTensor<T>& x, const std::vector<T>& weights);

}  // namespace sid::nn
