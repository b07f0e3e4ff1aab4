#include "sid/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sid/nn/ops.hpp"

namespace sid::nn {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53);
}

DTensor random_tensor(std::mt19937_64& rng, Shape s, double lo, double hi) {
  std::vector<double> v(s.numel());
  for (double& x : v) x = uniform(rng, lo, hi);
  return DTensor::from(s, std::move(v), true);
}

// Values bounded away from zero in magnitude.
DTensor signed_tensor(std::mt19937_64& rng, Shape s, double min_mag) {
  std::vector<double> v(s.numel());
  for (double& x : v) {
    const double mag = uniform(rng, min_mag, 1.0);
    x = (rng() & 1) ? mag : -mag;
  }
  return DTensor::from(s, std::move(v), true);
}

// Distinct values spaced 0.05 apart, so no pooling window has a near-tie.
DTensor spaced_tensor(std::mt19937_64& rng, Shape s) {
  std::vector<double> v(s.numel());
  std::iota(v.begin(), v.end(), 0.0);
  std::shuffle(v.begin(), v.end(), rng);
  for (double& x : v) x = x * 0.05 - 0.5;
  return DTensor::from(s, std::move(v), true);
}

double scalar_value(const GradFn& fn, std::span<const DTensor> inputs,
                    const std::vector<double>& proj) {
  const DTensor out = fn(inputs);
  const auto d = out.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) acc += d[i] * proj[i];
  return acc;
}

}  // namespace

GradCheckResult grad_check(const GradFn& fn, std::vector<DTensor> inputs, double h,
                           std::uint64_t seed, double floor) {
  for (auto& in : inputs) require(in.requires_grad(), "grad_check: inputs must require grad");

  DTensor probe = fn(inputs);
  std::vector<double> proj(probe.numel(), 1.0);
  if (probe.numel() > 1) {
    std::mt19937_64 rng(seed);
    for (double& w : proj) w = uniform(rng, -1.0, 1.0);
  }
  for (auto& in : inputs) in.zero_grad();
  const DTensor loss = weighted_sum(fn(inputs), proj);
  backward(loss);

  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    std::vector<double> analytic(inputs[t].numel(), 0.0);
    if (inputs[t].has_grad())
      std::copy(inputs[t].grad().begin(), inputs[t].grad().end(), analytic.begin());
    // Perturb detached copies so the analytic graph is left untouched.
    std::vector<DTensor> work;
    for (const auto& in : inputs) work.push_back(DTensor::from(in.shape(), std::vector<double>(in.data().begin(), in.data().end()), true));
    auto values = work[t].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double fp = scalar_value(fn, work, proj);
      values[i] = orig - h;
      const double fm = scalar_value(fn, work, proj);
      values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      const double err = std::abs(analytic[i] - numeric) / denom;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = t;
        result.worst_index = i;
      }
      ++result.checked;
    }
  }
  return result;
}

std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradSuiteEntry> out;
  auto run = [&](std::string name, const GradFn& fn, std::vector<DTensor> inputs) {
    out.push_back({std::move(name), grad_check(fn, std::move(inputs), 1e-3, seed)});
  };

  run("conv2d",
      [](std::span<const DTensor> in) { return conv2d(in[0], in[1], in[2], {1, 1, 1}); },
      {random_tensor(rng, {2, 3, 8, 8}, -1, 1), random_tensor(rng, {4, 3, 3, 3}, -1, 1),
       random_tensor(rng, {1, 4, 1, 1}, -1, 1)});
  run("conv2d_strided_dilated",
      [](std::span<const DTensor> in) { return conv2d(in[0], in[1], in[2], {2, 2, 2}); },
      {random_tensor(rng, {1, 2, 9, 9}, -1, 1), random_tensor(rng, {3, 2, 3, 3}, -1, 1),
       random_tensor(rng, {1, 3, 1, 1}, -1, 1)});
  run("conv2d_transposed",
      [](std::span<const DTensor> in) { return conv2d_transposed(in[0], in[1], in[2], 2, 0); },
      {random_tensor(rng, {2, 3, 4, 4}, -1, 1), random_tensor(rng, {3, 2, 2, 2}, -1, 1),
       random_tensor(rng, {1, 2, 1, 1}, -1, 1)});
  run("maxpool2", [](std::span<const DTensor> in) { return maxpool2(in[0]); },
      {spaced_tensor(rng, {2, 2, 6, 6})});
  run("leaky_relu", [](std::span<const DTensor> in) { return leaky_relu(in[0]); },
      {signed_tensor(rng, {2, 3, 5, 5}, 0.05)});
  run("concat_channels",
      [](std::span<const DTensor> in) { return concat_channels(in[0], in[1]); },
      {random_tensor(rng, {2, 2, 4, 4}, -1, 1), random_tensor(rng, {2, 3, 4, 4}, -1, 1)});
  run("pixel_shuffle", [](std::span<const DTensor> in) { return pixel_shuffle(in[0], 2); },
      {random_tensor(rng, {1, 12, 3, 3}, -1, 1)});
  run("space_to_depth", [](std::span<const DTensor> in) { return space_to_depth(in[0], 2); },
      {random_tensor(rng, {1, 3, 6, 6}, -1, 1)});

  // L1: keep |pred - target| >= 0.05 so the sign never flips under +-h.
  {
    DTensor target = random_tensor(rng, {1, 3, 6, 6}, 0, 1);
    DTensor offset = signed_tensor(rng, {1, 3, 6, 6}, 0.05);
    std::vector<double> pred(target.numel());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = target.data()[i] + offset.data()[i];
    run("loss_l1", [](std::span<const DTensor> in) { return loss_l1(in[0], in[1]); },
        {DTensor::from(target.shape(), pred, true), target});
  }
  run("loss_l2", [](std::span<const DTensor> in) { return loss_l2(in[0], in[1]); },
      {random_tensor(rng, {1, 3, 6, 6}, 0, 1), random_tensor(rng, {1, 3, 6, 6}, 0, 1)});
  run("loss_ssim", [](std::span<const DTensor> in) { return loss_ssim(in[0], in[1]); },
      {random_tensor(rng, {1, 3, 12, 12}, 0.2, 0.8), random_tensor(rng, {1, 3, 12, 12}, 0.2, 0.8)});
  return out;
}

}  // namespace sid::nn
