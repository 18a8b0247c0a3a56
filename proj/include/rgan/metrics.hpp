#pragma once

#include <cstddef>
#include <limits>

#include "rgan/tensor.hpp"

namespace rgan {

// PSNR of identical inputs.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

struct LumaMap {
  FeatureMap y;             // [1, H, W], 0..255 domain
  std::size_t clamped = 0;  // values pulled back into [0, 255]
};

// BT.601 studio swing: Y = 16 + 65.481 R + 128.553 G + 24.966 B.
LumaMap rgb_to_y(const FeatureMap& rgb);

double psnr_from_luma(const FeatureMap& ya, const FeatureMap& yb);
// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// L = 255, averaged over fully valid window positions.
double ssim_from_luma(const FeatureMap& ya, const FeatureMap& yb);

// crop_border pixels are removed from every edge before measuring.
double psnr_y(const FeatureMap& a, const FeatureMap& b, int crop_border = 0);
double ssim_y(const FeatureMap& a, const FeatureMap& b, int crop_border = 0);

}  // namespace rgan
