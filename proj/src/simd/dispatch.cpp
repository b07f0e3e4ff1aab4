#include <atomic>
#include <stdexcept>
#include <string>

#include "sid/simd/kernels.hpp"

namespace sid::simd {

const KernelTable& scalar_kernels();
#if SID_HAVE_AVX2
const KernelTable& avx2_kernels();
#endif

namespace {

bool cpu_has_avx2() {
#if SID_HAVE_AVX2
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() { return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar; }

std::atomic<Isa>& selected() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
      return cpu_has_avx2();
  }
  return false;
}

const KernelTable& kernels(Isa isa) {
  if (!isa_available(isa))
    throw std::runtime_error("SIMD variant '" + std::string(isa_name(isa)) +
                             "' is not available on this CPU/build");
#if SID_HAVE_AVX2
  if (isa == Isa::Avx2) return avx2_kernels();
#endif
  return scalar_kernels();
}

const KernelTable& kernels() { return kernels(selected().load(std::memory_order_relaxed)); }

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (!isa_available(isa))
    throw std::runtime_error("SIMD variant '" + std::string(isa_name(isa)) +
                             "' is not available on this CPU/build");
  selected().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "?";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  throw std::invalid_argument("unknown SIMD variant '" + std::string(name) + "'");
}

}  // namespace sid::simd
