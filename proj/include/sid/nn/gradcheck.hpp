#pragma once

// Finite-difference verification of analytic gradients, run entirely in
// 64-bit arithmetic.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sid/nn/tensor.hpp"

namespace sid::nn {

using DTensor = BasicTensor<double>;
using GradFn = std::function<DTensor(std::span<const DTensor>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

// Compares backward() against central differences with step h for every
// element of every input. Non-scalar outputs are reduced with a fixed random
// projection. Per-element error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const GradFn& fn, std::vector<DTensor> inputs, double h = 1e-3,
                           std::uint64_t seed = 1, double floor = 1e-8);

struct GradSuiteEntry {
  std::string op;
  GradCheckResult result;
};

inline constexpr double kGradTolerance = 1e-4;

// Every differentiable op on small random tensors, sampled away from the
// non-smooth points of maxpool, leaky_relu and L1.
std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed = 7);

}  // namespace sid::nn
