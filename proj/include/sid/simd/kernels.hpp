#pragma once

// Data-parallel inner loops used by the network ops and the optimizer.
//
// Every kernel exists as a scalar reference (kernels_ref.hpp, templated so the
// 64-bit gradient checker can reuse it) and, on x86-64, as an AVX2+FMA
// variant selected at runtime. The variants are required to produce
// bit-identical results: accumulation happens per output element in
// ascending-k order with fused multiply-add on both paths.

#include <cstddef>
#include <string_view>

namespace sid::simd {

enum class Isa { Scalar, Avx2 };

struct AdamCoeffs {
  float beta1;
  float beta2;
  float one_minus_beta1;
  float one_minus_beta2;
  float bias_correction1;  // 1 - beta1^t
  float bias_correction2;  // 1 - beta2^t
  float lr;
  float eps;
};

struct KernelTable {
  Isa isa;

  // C[M,N] += A[M,K] * B[K,N]; all row-major with explicit leading dims.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc);
  // C[M,N] += A^T * B where A is stored [K,M].
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc);

  void (*leaky_relu_forward)(const float* x, float* y, std::size_t n, float slope);
  // gx += gy * (x >= 0 ? 1 : slope)
  void (*leaky_relu_backward)(const float* x, const float* gy, float* gx, std::size_t n,
                              float slope);

  void (*adam_update)(float* param, float* m, float* v, const float* grad, std::size_t n,
                      const AdamCoeffs& coeffs);
};

// Kernels for the best ISA supported by this CPU, unless overridden.
const KernelTable& kernels();

// A specific variant. Throws if the ISA is not compiled in or not supported by
// the running CPU.
const KernelTable& kernels(Isa isa);

bool isa_available(Isa isa);
Isa active_isa();

// Pin the dispatcher to one variant (used by tests and the bench command).
void force_isa(Isa isa);

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

}  // namespace sid::simd
