#pragma once

#include <skewsplat/image.hpp>

#include <vector>

namespace skewsplat {

inline constexpr double kPsnrCap = 100.0;

double mse(const Image& a, const Image& b);
double mean_abs_error(const Image& a, const Image& b);

/// 10 log10(1 / MSE) for [0,1] images, capped at kPsnrCap.
double psnr(const Image& a, const Image& b);

/// Mean SSIM over pixels and channels: 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2, zero padding at the borders.
double ssim(const Image& a, const Image& b);

/// SSIM and its gradient with respect to `a` (laid out like Image::data).
double ssim_with_grad(const Image& a, const Image& b, std::vector<double>& d_a);

struct ImageMetrics {
    double psnr = 0.0;
    double ssim = 0.0;
};

ImageMetrics compare(const Image& a, const Image& b);

}  // namespace skewsplat
