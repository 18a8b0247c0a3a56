#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgan/tensor.hpp"

namespace rgan {

struct CropBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

struct GridPanel {
  std::string label;
  FeatureMap image;  // RGB, same size as every other panel
};

struct GridLayout {
  int zoom = 3;       // nearest-neighbour magnification of each crop
  int margin = 4;     // white gutter around tiles
  int label_height = 11;
};

// One column per panel (ground truth first by convention), one row per crop
// box, each tile the zoomed crop. Labels are drawn above each column.
FeatureMap render_grid(const std::vector<GridPanel>& panels, const std::vector<CropBox>& crops,
                       const GridLayout& layout = {});

// Pixel size of render_grid's output.
Shape3 grid_shape(int panels, const std::vector<CropBox>& crops, const GridLayout& layout = {});

// Top-left corner of the tile for (panel, crop) in the montage.
std::pair<int, int> grid_tile_origin(int panel, int crop, const std::vector<CropBox>& crops,
                                     const GridLayout& layout = {});

// FNV-1a over the 8-bit rendering and its dimensions.
std::uint64_t image_hash(const FeatureMap& rgb);

}  // namespace rgan
