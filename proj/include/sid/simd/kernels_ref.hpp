#pragma once

// Scalar reference kernels. The float instantiations back the scalar entry of
// the dispatch table; the double instantiations serve the 64-bit gradient
// checker directly.

#include <cmath>
#include <cstddef>

namespace sid::simd::ref {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * lda + p];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[p * lda + i];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

template <typename T>
void leaky_relu_forward(const T* x, T* y, std::size_t n, T slope) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] >= T(0) ? x[i] : slope * x[i];
}

template <typename T>
void leaky_relu_backward(const T* x, const T* gy, T* gx, std::size_t n, T slope) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] >= T(0) ? gy[i] : slope * gy[i];
}

// One bias-corrected Adam step. The operation sequence is mirrored exactly by
// the AVX2 variant.
template <typename T>
void adam_update(T* param, T* m, T* v, const T* grad, std::size_t n, T beta1, T beta2,
                 T one_minus_beta1, T one_minus_beta2, T bias_correction1, T bias_correction2,
                 T lr, T eps) {
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = beta1 * m[i] + one_minus_beta1 * g;
    v[i] = beta2 * v[i] + one_minus_beta2 * (g * g);
    const T m_hat = m[i] / bias_correction1;
    const T v_hat = v[i] / bias_correction2;
    param[i] = param[i] - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace sid::simd::ref
