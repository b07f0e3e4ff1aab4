#include "sid/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <type_traits>

#include "sid/detail/ssim_core.hpp"
#include "sid/simd/kernels.hpp"
#include "sid/simd/kernels_ref.hpp"

namespace sid::nn {
namespace {

// Upper bound on im2col scratch (elements); larger images are processed in
// bands of output rows.
constexpr std::size_t kColumnBudget = std::size_t(1) << 22;

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc) {
  if constexpr (std::is_same_v<T, float>)
    simd::kernels().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
  else
    simd::ref::gemm_nn<T>(m, n, k, a, lda, b, ldb, c, ldc);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc) {
  if constexpr (std::is_same_v<T, float>)
    simd::kernels().gemm_tn(m, n, k, a, lda, b, ldb, c, ldc);
  else
    simd::ref::gemm_tn<T>(m, n, k, a, lda, b, ldb, c, ldc);
}

template <typename T>
std::shared_ptr<Node<T>> make_node(Shape shape, const char* op,
                                   std::initializer_list<const BasicTensor<T>*> inputs) {
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->op = op;
  node->value.assign(shape.numel(), T(0));
  for (const auto* in : inputs)
    if (in && in->defined() && in->requires_grad()) node->requires_grad = true;
  if (node->requires_grad)
    for (const auto* in : inputs)
      node->inputs.push_back(in && in->defined() ? in->node_ptr() : nullptr);
  return node;
}

template <typename T>
BasicTensor<T> finish(std::shared_ptr<Node<T>> node) {
  for (const T v : node->value)
    if (!std::isfinite(v))
      throw Error(ErrorCode::Numeric, std::string("non-finite value produced by ") + node->op);
  return BasicTensor<T>(std::move(node));
}

template <typename T>
bool wants_grad(const std::shared_ptr<Node<T>>& n) {
  return n && n->requires_grad;
}

// Geometry of an im2col view: an image (channels, height, width) seen through
// a k x k window at `out_h x out_w` positions.
struct ColGeometry {
  std::size_t channels, height, width;
  int k, stride, pad, dilation;
  std::size_t out_h, out_w;

  std::size_t rows() const { return channels * k * k; }
  std::size_t band_rows() const {
    return std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, rows() * out_w));
  }
};

template <typename T>
void im2col(const ColGeometry& g, const T* img, std::size_t oy0, std::size_t band, T* col) {
  const std::size_t ncols = band * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = col + ((c * g.k + ky) * g.k + kx) * ncols;
        const T* plane = img + c * g.height * g.width;
        for (std::size_t oy = 0; oy < band; ++oy) {
          const long iy = long(oy0 + oy) * g.stride - g.pad + long(ky) * g.dilation;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= long(g.height)) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + std::size_t(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = long(ox) * g.stride - g.pad + long(kx) * g.dilation;
            dst[ox] = (ix >= 0 && ix < long(g.width)) ? src[ix] : T(0);
          }
        }
      }
}

template <typename T>
void col2im_add(const ColGeometry& g, const T* col, std::size_t oy0, std::size_t band, T* img) {
  const std::size_t ncols = band * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((c * g.k + ky) * g.k + kx) * ncols;
        T* plane = img + c * g.height * g.width;
        for (std::size_t oy = 0; oy < band; ++oy) {
          const long iy = long(oy0 + oy) * g.stride - g.pad + long(ky) * g.dilation;
          if (iy < 0 || iy >= long(g.height)) continue;
          const T* src = row + oy * g.out_w;
          T* dst = plane + std::size_t(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = long(ox) * g.stride - g.pad + long(kx) * g.dilation;
            if (ix >= 0 && ix < long(g.width)) dst[ix] += src[ox];
          }
        }
      }
}

template <typename T>
void transpose(const T* src, std::size_t rows, std::size_t cols, T* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

void check_rank4_channels(const Shape& x, std::size_t channels, const char* op) {
  require(x.c == channels, std::string(op) + ": input has " + std::to_string(x.c) +
                               " channels, weights expect " + std::to_string(channels),
          ErrorCode::Mismatch);
}

template <typename T>
void check_bias(const BasicTensor<T>& b, std::size_t channels, const char* op) {
  if (!b.defined()) return;
  require(b.numel() == channels, std::string(op) + ": bias has " + std::to_string(b.numel()) +
                                     " entries, expected " + std::to_string(channels),
          ErrorCode::Mismatch);
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b,
                      ConvParams p) {
  const Shape xs = x.shape(), ws = w.shape();
  require(ws.h == ws.w && ws.h >= 1, "conv2d: kernel must be square");
  require(p.stride >= 1 && p.pad >= 0 && p.dilation >= 1, "conv2d: bad stride/pad/dilation");
  check_rank4_channels(xs, ws.c, "conv2d");
  check_bias(b, ws.n, "conv2d");
  const long k = long(ws.h);
  const long span = long(p.dilation) * (k - 1) + 1;
  const long ho = (long(xs.h) + 2 * p.pad - span) / p.stride + 1;
  const long wo = (long(xs.w) + 2 * p.pad - span) / p.stride + 1;
  require(ho >= 1 && wo >= 1, "conv2d: input " + xs.str() + " smaller than the kernel");

  const ColGeometry g{xs.c, xs.h, xs.w, int(k), p.stride, p.pad, p.dilation, std::size_t(ho),
                      std::size_t(wo)};
  const Shape ys{xs.n, ws.n, g.out_h, g.out_w};
  auto node = make_node<T>(ys, "conv2d", {&x, &w, &b});

  const std::size_t cout = ws.n, kc = g.rows(), hw = g.out_h * g.out_w;
  const std::size_t band_rows = std::min(g.band_rows(), g.out_h);
  std::vector<T> col(kc * band_rows * g.out_w);
  for (std::size_t n = 0; n < xs.n; ++n) {
    T* y = node->value.data() + n * cout * hw;
    if (b.defined())
      for (std::size_t co = 0; co < cout; ++co) std::fill(y + co * hw, y + (co + 1) * hw, b.data()[co]);
    const T* xin = x.data().data() + n * xs.c * xs.h * xs.w;
    for (std::size_t oy0 = 0; oy0 < g.out_h; oy0 += band_rows) {
      const std::size_t band = std::min(band_rows, g.out_h - oy0);
      im2col(g, xin, oy0, band, col.data());
      gemm_nn<T>(cout, band * g.out_w, kc, w.data().data(), kc, col.data(), band * g.out_w,
                 y + oy0 * g.out_w, hw);
    }
  }

  if (node->requires_grad) {
    node->backward = [g, xs, cout, kc, hw, band_rows](Node<T>& self) {
      const auto& xn = self.inputs[0];
      const auto& wn = self.inputs[1];
      const auto& bn = self.inputs[2];
      const T* dy_all = self.grad.data();
      const bool need_x = wants_grad(xn), need_w = wants_grad(wn), need_b = wants_grad(bn);
      T* dx = need_x ? xn->grad_buffer().data() : nullptr;
      T* dw = need_w ? wn->grad_buffer().data() : nullptr;
      std::vector<T> col, colt, dcol;
      if (need_w) {
        col.resize(kc * band_rows * g.out_w);
        colt.resize(col.size());
      }
      if (need_x) dcol.resize(kc * band_rows * g.out_w);
      for (std::size_t n = 0; n < xs.n; ++n) {
        const T* dy = dy_all + n * cout * hw;
        if (need_b) {
          T* db = bn->grad_buffer().data();
          for (std::size_t co = 0; co < cout; ++co) {
            T acc = 0;
            for (std::size_t i = 0; i < hw; ++i) acc += dy[co * hw + i];
            db[co] += acc;
          }
        }
        const T* xin = xn->value.data() + n * xs.c * xs.h * xs.w;
        for (std::size_t oy0 = 0; oy0 < g.out_h; oy0 += band_rows) {
          const std::size_t band = std::min(band_rows, g.out_h - oy0);
          const std::size_t ncols = band * g.out_w;
          if (need_w) {
            im2col(g, xin, oy0, band, col.data());
            transpose(col.data(), kc, ncols, colt.data());
            gemm_nn<T>(cout, kc, ncols, dy + oy0 * g.out_w, hw, colt.data(), kc, dw, kc);
          }
          if (need_x) {
            std::fill(dcol.begin(), dcol.begin() + std::ptrdiff_t(kc * ncols), T(0));
            gemm_tn<T>(kc, ncols, cout, wn->value.data(), kc, dy + oy0 * g.out_w, hw, dcol.data(),
                       ncols);
            col2im_add(g, dcol.data(), oy0, band, dx + n * xs.c * xs.h * xs.w);
          }
        }
      }
    };
  }
  return finish(std::move(node));
}

// ---------------------------------------------------------------------------
// conv2d_transposed

template <typename T>
BasicTensor<T> conv2d_transposed(const BasicTensor<T>& x, const BasicTensor<T>& w,
                                 const BasicTensor<T>& b, int stride, int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  require(ws.h == ws.w && ws.h >= 1, "conv2d_transposed: kernel must be square");
  require(stride >= 1 && pad >= 0, "conv2d_transposed: bad stride/pad");
  check_rank4_channels(xs, ws.n, "conv2d_transposed");
  const std::size_t cin = ws.n, cout = ws.c;
  check_bias(b, cout, "conv2d_transposed");
  const long k = long(ws.h);
  const long ho = (long(xs.h) - 1) * stride - 2 * pad + k;
  const long wo = (long(xs.w) - 1) * stride - 2 * pad + k;
  require(ho >= 1 && wo >= 1, "conv2d_transposed: empty output");
  // The output image is the "input" side of the equivalent forward conv.
  const ColGeometry g{cout, std::size_t(ho), std::size_t(wo), int(k), stride, pad, 1, xs.h, xs.w};
  require((long(g.height) + 2 * pad - k) / stride + 1 == long(xs.h) &&
              (long(g.width) + 2 * pad - k) / stride + 1 == long(xs.w),
          "conv2d_transposed: inconsistent geometry");

  const Shape ys{xs.n, cout, g.height, g.width};
  auto node = make_node<T>(ys, "conv2d_transposed", {&x, &w, &b});
  const std::size_t kc = g.rows(), hw_in = xs.h * xs.w, hw_out = g.height * g.width;
  const std::size_t band_rows = std::min(g.band_rows(), xs.h);
  std::vector<T> col(kc * band_rows * xs.w);
  for (std::size_t n = 0; n < xs.n; ++n) {
    T* y = node->value.data() + n * cout * hw_out;
    const T* xin = x.data().data() + n * cin * hw_in;
    for (std::size_t oy0 = 0; oy0 < xs.h; oy0 += band_rows) {
      const std::size_t band = std::min(band_rows, xs.h - oy0);
      const std::size_t ncols = band * xs.w;
      std::fill(col.begin(), col.begin() + std::ptrdiff_t(kc * ncols), T(0));
      gemm_tn<T>(kc, ncols, cin, w.data().data(), kc, xin + oy0 * xs.w, hw_in, col.data(), ncols);
      col2im_add(g, col.data(), oy0, band, y);
    }
    if (b.defined())
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t i = 0; i < hw_out; ++i) y[co * hw_out + i] += b.data()[co];
  }

  if (node->requires_grad) {
    node->backward = [g, xs, cin, cout, kc, hw_in, hw_out, band_rows](Node<T>& self) {
      const auto& xn = self.inputs[0];
      const auto& wn = self.inputs[1];
      const auto& bn = self.inputs[2];
      const bool need_x = wants_grad(xn), need_w = wants_grad(wn), need_b = wants_grad(bn);
      T* dx = need_x ? xn->grad_buffer().data() : nullptr;
      T* dw = need_w ? wn->grad_buffer().data() : nullptr;
      std::vector<T> col(kc * band_rows * xs.w), colt;
      if (need_w) colt.resize(col.size());
      for (std::size_t n = 0; n < xs.n; ++n) {
        const T* dy = self.grad.data() + n * cout * hw_out;
        if (need_b) {
          T* db = bn->grad_buffer().data();
          for (std::size_t co = 0; co < cout; ++co) {
            T acc = 0;
            for (std::size_t i = 0; i < hw_out; ++i) acc += dy[co * hw_out + i];
            db[co] += acc;
          }
        }
        const T* xin = xn->value.data() + n * cin * hw_in;
        for (std::size_t oy0 = 0; oy0 < xs.h; oy0 += band_rows) {
          const std::size_t band = std::min(band_rows, xs.h - oy0);
          const std::size_t ncols = band * xs.w;
          im2col(g, dy, oy0, band, col.data());
          if (need_x)
            gemm_nn<T>(cin, ncols, kc, wn->value.data(), kc, col.data(), ncols,
                       dx + n * cin * hw_in + oy0 * xs.w, hw_in);
          if (need_w) {
            transpose(col.data(), kc, ncols, colt.data());
            gemm_nn<T>(cin, kc, ncols, xin + oy0 * xs.w, hw_in, colt.data(), kc, dw, kc);
          }
        }
      }
    };
  }
  return finish(std::move(node));
}

// ---------------------------------------------------------------------------
// maxpool2

template <typename T>
BasicTensor<T> maxpool2(const BasicTensor<T>& x) {
  const Shape xs = x.shape();
  require(xs.h % 2 == 0 && xs.w % 2 == 0,
          "maxpool2: spatial dims " + xs.str() + " must be even");
  const Shape ys{xs.n, xs.c, xs.h / 2, xs.w / 2};
  auto node = make_node<T>(ys, "maxpool2", {&x});
  std::vector<std::uint32_t> argmax(ys.numel());
  const T* in = x.data().data();
  for (std::size_t p = 0; p < xs.n * xs.c; ++p)
    for (std::size_t oy = 0; oy < ys.h; ++oy)
      for (std::size_t ox = 0; ox < ys.w; ++ox) {
        const std::size_t base = p * xs.h * xs.w;
        std::size_t best = base + (2 * oy) * xs.w + 2 * ox;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oy + dy) * xs.w + 2 * ox + dx;
            if (in[idx] > in[best]) best = idx;
          }
        const std::size_t o = (p * ys.h + oy) * ys.w + ox;
        node->value[o] = in[best];
        argmax[o] = std::uint32_t(best);
      }
  if (node->requires_grad) {
    node->backward = [argmax = std::move(argmax)](Node<T>& self) {
      auto& gx = self.inputs[0]->grad_buffer();
      for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += self.grad[o];
    };
  }
  return finish(std::move(node));
}

// ---------------------------------------------------------------------------
// leaky_relu

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope) {
  auto node = make_node<T>(x.shape(), "leaky_relu", {&x});
  if constexpr (std::is_same_v<T, float>)
    simd::kernels().leaky_relu_forward(x.data().data(), node->value.data(), x.numel(), slope);
  else
    simd::ref::leaky_relu_forward<T>(x.data().data(), node->value.data(), x.numel(), slope);
  if (node->requires_grad) {
    node->backward = [slope](Node<T>& self) {
      auto& in = *self.inputs[0];
      T* gx = in.grad_buffer().data();
      if constexpr (std::is_same_v<T, float>)
        simd::kernels().leaky_relu_backward(in.value.data(), self.grad.data(), gx,
                                            in.value.size(), slope);
      else
        simd::ref::leaky_relu_backward<T>(in.value.data(), self.grad.data(), gx, in.value.size(),
                                          slope);
    };
  }
  return finish(std::move(node));
}

// ---------------------------------------------------------------------------
// concat_channels

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const Shape as = a.shape(), bs = b.shape();
  require(as.n == bs.n && as.h == bs.h && as.w == bs.w,
          "concat_channels: shapes " + as.str() + " and " + bs.str() + " disagree",
          ErrorCode::Mismatch);
  const Shape ys{as.n, as.c + bs.c, as.h, as.w};
  auto node = make_node<T>(ys, "concat_channels", {&a, &b});
  const std::size_t pa = as.c * as.h * as.w, pb = bs.c * bs.h * bs.w;
  for (std::size_t n = 0; n < as.n; ++n) {
    std::copy_n(a.data().data() + n * pa, pa, node->value.data() + n * (pa + pb));
    std::copy_n(b.data().data() + n * pb, pb, node->value.data() + n * (pa + pb) + pa);
  }
  if (node->requires_grad) {
    node->backward = [pa, pb, batch = as.n](Node<T>& self) {
      for (int side = 0; side < 2; ++side) {
        const auto& in = self.inputs[side];
        if (!wants_grad(in)) continue;
        T* g = in->grad_buffer().data();
        const std::size_t len = side == 0 ? pa : pb, off = side == 0 ? 0 : pa;
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t i = 0; i < len; ++i) g[n * len + i] += self.grad[n * (pa + pb) + off + i];
      }
    };
  }
  return finish(std::move(node));
}

// ---------------------------------------------------------------------------
// pixel_shuffle / space_to_depth

namespace {

// Index into the (N, C r^2, H, W) layout for element (n, c, Y, X) of the
// (N, C, rH, rW) layout.
struct ShuffleMap {
  std::size_t c_low, h, w, r;
  std::size_t low(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    const std::size_t i = y % r, j = x % r;
    const std::size_t ch = c * r * r + i * r + j;
    return ((n * c_low * r * r + ch) * h + y / r) * w + x / r;
  }
  std::size_t high(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * c_low + c) * h * r + y) * w * r + x;
  }
};

}  // namespace

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, int r) {
  const Shape xs = x.shape();
  require(r >= 1, "pixel_shuffle: factor must be >= 1");
  const std::size_t rr = std::size_t(r) * r;
  require(xs.c % rr == 0, "pixel_shuffle: " + std::to_string(xs.c) +
                              " channels not divisible by r^2 = " + std::to_string(rr));
  const ShuffleMap map{xs.c / rr, xs.h, xs.w, std::size_t(r)};
  const Shape ys{xs.n, map.c_low, xs.h * r, xs.w * r};
  auto node = make_node<T>(ys, "pixel_shuffle", {&x});
  for (std::size_t n = 0; n < ys.n; ++n)
    for (std::size_t c = 0; c < ys.c; ++c)
      for (std::size_t y = 0; y < ys.h; ++y)
        for (std::size_t xx = 0; xx < ys.w; ++xx)
          node->value[map.high(n, c, y, xx)] = x.data()[map.low(n, c, y, xx)];
  if (node->requires_grad) {
    node->backward = [map, ys](Node<T>& self) {
      auto& g = self.inputs[0]->grad_buffer();
      for (std::size_t n = 0; n < ys.n; ++n)
        for (std::size_t c = 0; c < ys.c; ++c)
          for (std::size_t y = 0; y < ys.h; ++y)
            for (std::size_t xx = 0; xx < ys.w; ++xx)
              g[map.low(n, c, y, xx)] += self.grad[map.high(n, c, y, xx)];
    };
  }
  return finish(std::move(node));
}

template <typename T>
BasicTensor<T> space_to_depth(const BasicTensor<T>& x, int r) {
  const Shape xs = x.shape();
  require(r >= 1, "space_to_depth: factor must be >= 1");
  require(xs.h % r == 0 && xs.w % r == 0,
          "space_to_depth: spatial dims " + xs.str() + " not divisible by " + std::to_string(r));
  const std::size_t rr = std::size_t(r) * r;
  const ShuffleMap map{xs.c, xs.h / r, xs.w / r, std::size_t(r)};
  const Shape ys{xs.n, xs.c * rr, xs.h / r, xs.w / r};
  auto node = make_node<T>(ys, "space_to_depth", {&x});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c)
      for (std::size_t y = 0; y < xs.h; ++y)
        for (std::size_t xx = 0; xx < xs.w; ++xx)
          node->value[map.low(n, c, y, xx)] = x.data()[map.high(n, c, y, xx)];
  if (node->requires_grad) {
    node->backward = [map, xs](Node<T>& self) {
      auto& g = self.inputs[0]->grad_buffer();
      for (std::size_t n = 0; n < xs.n; ++n)
        for (std::size_t c = 0; c < xs.c; ++c)
          for (std::size_t y = 0; y < xs.h; ++y)
            for (std::size_t xx = 0; xx < xs.w; ++xx)
              g[map.high(n, c, y, xx)] += self.grad[map.low(n, c, y, xx)];
    };
  }
  return finish(std::move(node));
}

// ---------------------------------------------------------------------------
// losses

namespace {

template <typename T>
void check_pair(const BasicTensor<T>& pred, const BasicTensor<T>& target, const char* op) {
  require(pred.shape() == target.shape(),
          std::string(op) + ": prediction " + pred.shape().str() + " and target " +
              target.shape().str() + " differ",
          ErrorCode::Mismatch);
  require(pred.numel() > 0, std::string(op) + ": empty input");
}

}  // namespace

template <typename T>
BasicTensor<T> loss_l1(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  check_pair(pred, target, "loss_l1");
  auto node = make_node<T>(Shape{}, "loss_l1", {&pred, &target});
  const std::size_t n = pred.numel();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(pred.data()[i] - target.data()[i]);
  node->value[0] = acc / T(n);
  if (node->requires_grad) {
    node->backward = [n](Node<T>& self) {
      const T scale = self.grad[0] / T(n);
      const auto& p = self.inputs[0];
      const auto& t = self.inputs[1];
      for (int side = 0; side < 2; ++side) {
        const auto& in = self.inputs[side];
        if (!wants_grad(in)) continue;
        T* g = in->grad_buffer().data();
        const T sign = side == 0 ? T(1) : T(-1);
        for (std::size_t i = 0; i < n; ++i) {
          const T d = p->value[i] - t->value[i];
          const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
          g[i] += sign * s * scale;
        }
      }
    };
  }
  return finish(std::move(node));
}

template <typename T>
BasicTensor<T> loss_l2(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  check_pair(pred, target, "loss_l2");
  auto node = make_node<T>(Shape{}, "loss_l2", {&pred, &target});
  const std::size_t n = pred.numel();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pred.data()[i] - target.data()[i];
    acc += d * d;
  }
  node->value[0] = acc / T(n);
  if (node->requires_grad) {
    node->backward = [n](Node<T>& self) {
      const T scale = T(2) * self.grad[0] / T(n);
      const auto& p = self.inputs[0];
      const auto& t = self.inputs[1];
      for (int side = 0; side < 2; ++side) {
        const auto& in = self.inputs[side];
        if (!wants_grad(in)) continue;
        T* g = in->grad_buffer().data();
        const T sign = side == 0 ? T(1) : T(-1);
        for (std::size_t i = 0; i < n; ++i) g[i] += sign * scale * (p->value[i] - t->value[i]);
      }
    };
  }
  return finish(std::move(node));
}

template <typename T>
BasicTensor<T> loss_ssim(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  check_pair(pred, target, "loss_ssim");
  const Shape s = pred.shape();
  require(s.c == 3 || s.c == 1, "loss_ssim: expects 1 or 3 channels");
  const std::size_t plane = s.plane();
  const T wr = T(detail::kLumaR), wg = T(detail::kLumaG), wb = T(detail::kLumaB);

  auto luma = [&](const T* img, std::vector<T>& out) {
    out.resize(plane);
    if (s.c == 1)
      std::copy_n(img, plane, out.begin());
    else
      for (std::size_t i = 0; i < plane; ++i)
        out[i] = wr * img[i] + wg * img[plane + i] + wb * img[2 * plane + i];
  };

  auto node = make_node<T>(Shape{}, "loss_ssim", {&pred, &target});
  std::vector<std::vector<T>> lx(s.n), ly(s.n);
  std::vector<detail::SsimMoments<T>> moments(s.n);
  T total = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    luma(pred.data().data() + n * s.c * plane, lx[n]);
    luma(target.data().data() + n * s.c * plane, ly[n]);
    total += detail::ssim_mean(lx[n].data(), ly[n].data(), int(s.h), int(s.w), &moments[n]);
  }
  node->value[0] = T(1) - total / T(s.n);

  if (node->requires_grad) {
    node->backward = [s, plane, wr, wg, wb, lx = std::move(lx), ly = std::move(ly),
                      moments = std::move(moments)](Node<T>& self) {
      const T upstream = -self.grad[0] / T(s.n);
      const bool need_p = wants_grad(self.inputs[0]), need_t = wants_grad(self.inputs[1]);
      std::vector<T> gx(plane), gy(plane);
      for (std::size_t n = 0; n < s.n; ++n) {
        std::fill(gx.begin(), gx.end(), T(0));
        std::fill(gy.begin(), gy.end(), T(0));
        detail::ssim_mean_backward(lx[n].data(), ly[n].data(), moments[n], upstream,
                                   need_p ? gx.data() : nullptr, need_t ? gy.data() : nullptr);
        for (int side = 0; side < 2; ++side) {
          if (!(side == 0 ? need_p : need_t)) continue;
          const std::vector<T>& gl = side == 0 ? gx : gy;
          T* g = self.inputs[side]->grad_buffer().data() + n * s.c * plane;
          if (s.c == 1) {
            for (std::size_t i = 0; i < plane; ++i) g[i] += gl[i];
          } else {
            for (std::size_t i = 0; i < plane; ++i) {
              g[i] += wr * gl[i];
              g[plane + i] += wg * gl[i];
              g[2 * plane + i] += wb * gl[i];
            }
          }
        }
      }
    };
  }
  return finish(std::move(node));
}

template <typename T>
BasicTensor<T> weighted_sum(const BasicTensor<T>& x, const std::vector<T>& weights) {
  require(weights.size() == x.numel(), "weighted_sum: weight count does not match tensor size");
  auto node = make_node<T>(Shape{}, "weighted_sum", {&x});
  T acc = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += x.data()[i] * weights[i];
  node->value[0] = acc;
  if (node->requires_grad) {
    node->backward = [weights](Node<T>& self) {
      auto& g = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < weights.size(); ++i) g[i] += self.grad[0] * weights[i];
    };
  }
  return finish(std::move(node));
}

#define SID_INSTANTIATE_OPS(T)                                                                  \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                 const BasicTensor<T>&, ConvParams);                            \
  template BasicTensor<T> conv2d_transposed(const BasicTensor<T>&, const BasicTensor<T>&,       \
                                            const BasicTensor<T>&, int, int);                   \
  template BasicTensor<T> maxpool2(const BasicTensor<T>&);                                      \
  template BasicTensor<T> leaky_relu(const BasicTensor<T>&, T);                                 \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> pixel_shuffle(const BasicTensor<T>&, int);                            \
  template BasicTensor<T> space_to_depth(const BasicTensor<T>&, int);                           \
  template BasicTensor<T> loss_l1(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> loss_l2(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> loss_ssim(const BasicTensor<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> weighted_sum(const BasicTensor<T>&, const std::vector<T>&);

SID_INSTANTIATE_OPS(float)
SID_INSTANTIATE_OPS(double)

#undef SID_INSTANTIATE_OPS

}  // namespace sid::nn
