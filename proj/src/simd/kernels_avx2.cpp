// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "sid/simd/kernels.hpp"

namespace sid::simd {
namespace {

// Row-block of the GEMM: ROWS rows of C, all N columns, accumulating over K.
// A(i, p) is read through `a_at` so the same body serves NN and TN layouts.
template <int ROWS, typename AAt>
inline void gemm_rows(std::size_t i0, std::size_t n, std::size_t k, AAt a_at, const float* b,
                      std::size_t ldb, float* c, std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256 acc0[ROWS], acc1[ROWS];
    for (int r = 0; r < ROWS; ++r) {
      acc0[r] = _mm256_loadu_ps(c + (i0 + r) * ldc + j);
      acc1[r] = _mm256_loadu_ps(c + (i0 + r) * ldc + j + 8);
    }
    for (std::size_t p = 0; p < k; ++p) {
      const __m256 b0 = _mm256_loadu_ps(b + p * ldb + j);
      const __m256 b1 = _mm256_loadu_ps(b + p * ldb + j + 8);
      for (int r = 0; r < ROWS; ++r) {
        const __m256 av = _mm256_set1_ps(a_at(i0 + r, p));
        acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
        acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
      }
    }
    for (int r = 0; r < ROWS; ++r) {
      _mm256_storeu_ps(c + (i0 + r) * ldc + j, acc0[r]);
      _mm256_storeu_ps(c + (i0 + r) * ldc + j + 8, acc1[r]);
    }
  }
  for (; j + 8 <= n; j += 8) {
    __m256 acc[ROWS];
    for (int r = 0; r < ROWS; ++r) acc[r] = _mm256_loadu_ps(c + (i0 + r) * ldc + j);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256 bv = _mm256_loadu_ps(b + p * ldb + j);
      for (int r = 0; r < ROWS; ++r)
        acc[r] = _mm256_fmadd_ps(_mm256_set1_ps(a_at(i0 + r, p)), bv, acc[r]);
    }
    for (int r = 0; r < ROWS; ++r) _mm256_storeu_ps(c + (i0 + r) * ldc + j, acc[r]);
  }
  for (; j < n; ++j) {
    for (int r = 0; r < ROWS; ++r) {
      float acc = c[(i0 + r) * ldc + j];
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a_at(i0 + r, p), b[p * ldb + j], acc);
      c[(i0 + r) * ldc + j] = acc;
    }
  }
}

template <typename AAt>
inline void gemm_driver(std::size_t m, std::size_t n, std::size_t k, AAt a_at, const float* b,
                        std::size_t ldb, float* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<4>(i, n, k, a_at, b, ldb, c, ldc);
  for (; i < m; ++i) gemm_rows<1>(i, n, k, a_at, b, ldb, c, ldc);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  gemm_driver(
      m, n, k, [a, lda](std::size_t i, std::size_t p) { return a[i * lda + p]; }, b, ldb, c, ldc);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  gemm_driver(
      m, n, k, [a, lda](std::size_t i, std::size_t p) { return a[p * lda + i]; }, b, ldb, c, ldc);
}

void leaky_fwd(const float* x, float* y, std::size_t n, float slope) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 s = _mm256_set1_ps(slope);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 neg = _mm256_mul_ps(s, xv);
    const __m256 keep = _mm256_cmp_ps(xv, zero, _CMP_GE_OQ);
    _mm256_storeu_ps(y + i, _mm256_blendv_ps(neg, xv, keep));
  }
  for (; i < n; ++i) y[i] = x[i] >= 0.0f ? x[i] : slope * x[i];
}

void leaky_bwd(const float* x, const float* gy, float* gx, std::size_t n, float slope) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 s = _mm256_set1_ps(slope);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 g = _mm256_loadu_ps(gy + i);
    const __m256 keep = _mm256_cmp_ps(xv, zero, _CMP_GE_OQ);
    const __m256 d = _mm256_blendv_ps(_mm256_mul_ps(s, g), g, keep);
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), d));
  }
  for (; i < n; ++i) gx[i] += x[i] >= 0.0f ? gy[i] : slope * gy[i];
}

void adam(float* p, float* m, float* v, const float* g, std::size_t n, const AdamCoeffs& c) {
  const __m256 b1 = _mm256_set1_ps(c.beta1);
  const __m256 b2 = _mm256_set1_ps(c.beta2);
  const __m256 ob1 = _mm256_set1_ps(c.one_minus_beta1);
  const __m256 ob2 = _mm256_set1_ps(c.one_minus_beta2);
  const __m256 bc1 = _mm256_set1_ps(c.bias_correction1);
  const __m256 bc2 = _mm256_set1_ps(c.bias_correction2);
  const __m256 lr = _mm256_set1_ps(c.lr);
  const __m256 eps = _mm256_set1_ps(c.eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    const __m256 mv = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(ob1, gv));
    const __m256 vv = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(ob2, _mm256_mul_ps(gv, gv)));
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    const __m256 m_hat = _mm256_div_ps(mv, bc1);
    const __m256 v_hat = _mm256_div_ps(vv, bc2);
    const __m256 step =
        _mm256_div_ps(_mm256_mul_ps(lr, m_hat), _mm256_add_ps(_mm256_sqrt_ps(v_hat), eps));
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), step));
  }
  for (; i < n; ++i) {
    const float gi = g[i];
    m[i] = c.beta1 * m[i] + c.one_minus_beta1 * gi;
    v[i] = c.beta2 * v[i] + c.one_minus_beta2 * (gi * gi);
    const float m_hat = m[i] / c.bias_correction1;
    const float v_hat = v[i] / c.bias_correction2;
    p[i] = p[i] - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{Isa::Avx2, gemm_nn, gemm_tn, leaky_fwd, leaky_bwd, adam};
  return table;
}

}  // namespace sid::simd
