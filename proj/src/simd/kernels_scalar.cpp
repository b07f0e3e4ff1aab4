#include "sid/simd/kernels.hpp"
#include "sid/simd/kernels_ref.hpp"

namespace sid::simd {
namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  ref::gemm_nn<float>(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  ref::gemm_tn<float>(m, n, k, a, lda, b, ldb, c, ldc);
}

void leaky_fwd(const float* x, float* y, std::size_t n, float slope) {
  ref::leaky_relu_forward<float>(x, y, n, slope);
}

void leaky_bwd(const float* x, const float* gy, float* gx, std::size_t n, float slope) {
  ref::leaky_relu_backward<float>(x, gy, gx, n, slope);
}

void adam(float* p, float* m, float* v, const float* g, std::size_t n, const AdamCoeffs& c) {
  ref::adam_update<float>(p, m, v, g, n, c.beta1, c.beta2, c.one_minus_beta1, c.one_minus_beta2,
                          c.bias_correction1, c.bias_correction2, c.lr, c.eps);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, gemm_nn, gemm_tn, leaky_fwd, leaky_bwd, adam};
  return table;
}

}  // namespace sid::simd
