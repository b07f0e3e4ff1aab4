#include "sid/metrics.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "sid/detail/ssim_core.hpp"
#include "sid/error.hpp"

namespace sid::metrics {
namespace {

void check_same(const RgbImage& a, const RgbImage& b) {
  require(a.width == b.width && a.height == b.height,
          fmt::format("image sizes differ: {}x{} vs {}x{}", a.width, a.height, b.width, b.height),
          ErrorCode::Mismatch);
  require(!a.data.empty(), "empty image");
}

std::vector<double> luminance(const RgbImage& img) {
  std::vector<double> y(img.plane_size());
  const float *r = img.plane(0), *g = img.plane(1), *b = img.plane(2);
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = detail::kLumaR * r[i] + detail::kLumaG * g[i] + detail::kLumaB * b[i];
  return y;
}

}  // namespace

double mse(const RgbImage& a, const RgbImage& b) {
  check_same(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    acc += d * d;
  }
  return acc / double(a.data.size());
}

double psnr_from_mse(double m, double peak) {
  require(m >= 0.0 && peak > 0.0, "psnr: invalid arguments");
  if (m == 0.0) return kPsnrInfinity;
  return 10.0 * std::log10(peak * peak / m);
}

double psnr(const RgbImage& pred, const RgbImage& target, double peak) {
  return psnr_from_mse(mse(pred, target), peak);
}

double ssim(const RgbImage& pred, const RgbImage& target) {
  check_same(pred, target);
  const auto x = luminance(pred), y = luminance(target);
  return detail::ssim_mean<double>(x.data(), y.data(), pred.height, pred.width);
}

std::string format_pair(double psnr_db, double ssim_value) {
  if (std::isinf(psnr_db)) return fmt::format("inf/{:.3f}", ssim_value);
  return fmt::format("{:.2f}/{:.3f}", psnr_db, ssim_value);
}

}  // namespace sid::metrics
