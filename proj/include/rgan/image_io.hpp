#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rgan/tensor.hpp"

namespace rgan {

struct ImageSize {
  int width = 0;
  int height = 0;
  bool operator==(const ImageSize&) const = default;
};

// 8-bit RGB PNG <-> [3, H, W] in [0, 1]. Other PNG colour types are
// converted to 8-bit RGB on read.
FeatureMap read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const FeatureMap& rgb);
ImageSize png_size(const std::filesystem::path& path);

// round(clamp(v, 0, 1) * 255), interleaved RGB.
std::vector<std::uint8_t> to_rgb8(const FeatureMap& rgb);
FeatureMap from_rgb8(const std::vector<std::uint8_t>& pixels, int width, int height);

// Snap values to the 8-bit grid, as a PNG round trip would.
FeatureMap quantize8(const FeatureMap& rgb);

}  // namespace rgan
