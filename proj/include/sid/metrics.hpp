#pragma once

#include <limits>
#include <string>

#include "sid/image.hpp"

namespace sid::metrics {

inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

double mse(const RgbImage& a, const RgbImage& b);

// 10 log10(peak^2 / MSE); +inf when the images are identical.
double psnr(const RgbImage& pred, const RgbImage& target, double peak = 1.0);
double psnr_from_mse(double mse, double peak = 1.0);

// Mean SSIM of the BT.601 luminance planes. Both images must be at least
// 11x11.
double ssim(const RgbImage& pred, const RgbImage& target);

// "28.88/0.787"; an infinite PSNR prints as "inf".
std::string format_pair(double psnr_db, double ssim_value);

}  // namespace sid::metrics
