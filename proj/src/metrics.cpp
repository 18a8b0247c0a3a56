#include "rgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rgan/data.hpp"

namespace rgan {
namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;

FeatureMap border_crop(const FeatureMap& x, int border) {
  if (border <= 0) return x;
  if (2 * border >= x.height() || 2 * border >= x.width()) {
    throw ContractError("metrics: crop border " + std::to_string(border) + " leaves nothing of " + x.shape().str());
  }
  return crop(x, border, border, x.height() - 2 * border, x.width() - 2 * border);
}

// Valid-mode separable filtering of one channel.
std::vector<double> filter_valid(const double* src, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1;
  const int ow = w - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

LumaMap rgb_to_y(const FeatureMap& rgb) {
  if (rgb.channels() != 3) throw ContractError("rgb_to_y: expected 3 channels, got " + rgb.shape().str());
  LumaMap out{FeatureMap(1, rgb.height(), rgb.width()), 0};
  const auto r = rgb.channel(0);
  const auto g = rgb.channel(1);
  const auto b = rgb.channel(2);
  auto y = out.y.channel(0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    double v = 16.0 + 65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i];
    if (v < 0.0 || v > 255.0) {
      v = std::clamp(v, 0.0, 255.0);
      ++out.clamped;
    }
    y[i] = v;
  }
  return out;
}

double psnr_from_luma(const FeatureMap& ya, const FeatureMap& yb) {
  require_same_shape(ya, yb, "psnr_y");
  double sse = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) {
    const double d = ya.data()[i] - yb.data()[i];
    sse += d * d;
  }
  if (sse == 0.0) return kInfinitePsnr;
  const double mse = sse / static_cast<double>(ya.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim_from_luma(const FeatureMap& ya, const FeatureMap& yb) {
  require_same_shape(ya, yb, "ssim_y");
  if (ya.height() < kWindow || ya.width() < kWindow) {
    throw ContractError("ssim_y: frame " + ya.shape().str() + " is smaller than the 11x11 window");
  }
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const std::vector<double> k = gaussian_kernel_1d(kWindowSigma, kWindow);
  const int h = ya.height();
  const int w = ya.width();
  const double* a = ya.data();
  const double* b = yb.data();
  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const std::vector<double> mu_a = filter_valid(a, h, w, k);
  const std::vector<double> mu_b = filter_valid(b, h, w, k);
  const std::vector<double> e_aa = filter_valid(aa.data(), h, w, k);
  const std::vector<double> e_bb = filter_valid(bb.data(), h, w, k);
  const std::vector<double> e_ab = filter_valid(ab.data(), h, w, k);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double var_a = e_aa[i] - ma * ma;
    const double var_b = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2.0 * (ma * mb) + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double psnr_y(const FeatureMap& a, const FeatureMap& b, int crop_border) {
  require_same_shape(a, b, "psnr_y");
  return psnr_from_luma(rgb_to_y(border_crop(a, crop_border)).y, rgb_to_y(border_crop(b, crop_border)).y);
}

double ssim_y(const FeatureMap& a, const FeatureMap& b, int crop_border) {
  require_same_shape(a, b, "ssim_y");
  return ssim_from_luma(rgb_to_y(border_crop(a, crop_border)).y, rgb_to_y(border_crop(b, crop_border)).y);
}

}  // namespace rgan
