#pragma once

// Adam with bias correction (Kingma & Ba defaults beta1 = 0.9,
// beta2 = 0.999, eps = 1e-8).

#include <cmath>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "sid/nn/tensor.hpp"
#include "sid/simd/kernels.hpp"
#include "sid/simd/kernels_ref.hpp"

namespace sid::nn {

template <typename T>
struct AdamState {
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T lr = T(1e-4);
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m, v;
};

// One update of every parameter from its accumulated gradient (a missing
// gradient counts as zero). Gradients are left in place.
template <typename T>
void adam_step(std::span<BasicTensor<T>> params, AdamState<T>& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), T(0));
      state.v.emplace_back(p.numel(), T(0));
    }
  }
  require(state.m.size() == params.size(), "adam_step: parameter list changed between steps");
  ++state.step;
  const T bc1 = T(1) - std::pow(state.beta1, T(state.step));
  const T bc2 = T(1) - std::pow(state.beta2, T(state.step));
  const T omb1 = T(1) - state.beta1, omb2 = T(1) - state.beta2;
  std::vector<T> zeros;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    require(state.m[i].size() == p.numel(), "adam_step: parameter size changed between steps");
    const T* g = nullptr;
    if (p.has_grad()) {
      g = p.grad().data();
    } else {
      zeros.assign(p.numel(), T(0));
      g = zeros.data();
    }
    T* data = p.mutable_data().data();
    if constexpr (std::is_same_v<T, float>) {
      const simd::AdamCoeffs c{state.beta1, state.beta2, omb1, omb2, bc1, bc2, state.lr, state.eps};
      simd::kernels().adam_update(data, state.m[i].data(), state.v[i].data(), g, p.numel(), c);
    } else {
      simd::ref::adam_update<T>(data, state.m[i].data(), state.v[i].data(), g, p.numel(),
                                state.beta1, state.beta2, omb1, omb2, bc1, bc2, state.lr,
                                state.eps);
    }
  }
}

}  // namespace sid::nn
