#include "rgan/grid.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "rgan/image_io.hpp"

namespace rgan {

namespace {

// 5x7 glyphs, one byte per row, bit 4 is the leftmost column.
const std::map<char, std::array<std::uint8_t, 7>>& font() {
  static const std::map<char, std::array<std::uint8_t, 7>> glyphs = {
    {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
    {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
    {'D', {0x1e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1e}},
    {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
    {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
    {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
    {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
    {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
    {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
    {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
    {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
    {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0a}},
    {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
    {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
  };
  return glyphs;
}

void draw_text(FeatureMap& img, int top, int left, int max_width, const std::string& text) {
  int x = left;
  for (char raw : text) {
    if (x + 5 > left + max_width) break;
    const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    const auto it = font().find(ch);
    if (it != font().end()) {
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if (!(it->second[row] & (0x10 >> col))) continue;
          const int y = top + row;
          const int xx = x + col;
          if (y < 0 || y >= img.height() || xx < 0 || xx >= img.width()) continue;
          for (int c = 0; c < 3; ++c) img.at(c, y, xx) = 0.0;
        }
      }
    }
    x += 6;
  }
}

int column_width(const std::vector<CropBox>& crops, const GridLayout& layout) {
  int w = 0;
  for (const CropBox& b : crops) w = std::max(w, b.width * layout.zoom);
  return w;
}

}  // namespace

Shape3 grid_shape(int panels, const std::vector<CropBox>& crops, const GridLayout& layout) {
  int h = layout.margin + layout.label_height;
  for (const CropBox& b : crops) h += b.height * layout.zoom + layout.margin;
  const int w = layout.margin + panels * (column_width(crops, layout) + layout.margin);
  return {3, h, w};
}

std::pair<int, int> grid_tile_origin(int panel, int crop, const std::vector<CropBox>& crops,
                                     const GridLayout& layout) {
  int y = layout.margin + layout.label_height;
  for (int k = 0; k < crop; ++k) y += crops[k].height * layout.zoom + layout.margin;
  const int x = layout.margin + panel * (column_width(crops, layout) + layout.margin);
  return {y, x};
}

FeatureMap render_grid(const std::vector<GridPanel>& panels, const std::vector<CropBox>& crops,
                       const GridLayout& layout) {
  if (panels.empty() || crops.empty()) throw ContractError("render_grid: need at least one panel and one crop");
  if (layout.zoom < 1 || layout.margin < 0 || layout.label_height < 0) {
    throw ContractError("render_grid: bad layout");
  }
  const Shape3 ref = panels.front().image.shape();
  for (const GridPanel& p : panels) {
    if (p.image.shape() != ref || ref.channels != 3) {
      throw ContractError("render_grid: panel '" + p.label + "' is " + p.image.shape().str() + ", expected " +
                          ref.str() + " RGB");
    }
  }
  for (const CropBox& b : crops) {
    if (b.height < 1 || b.width < 1 || b.top < 0 || b.left < 0 || b.top + b.height > ref.height ||
        b.left + b.width > ref.width) {
      throw ContractError("render_grid: crop (" + std::to_string(b.top) + ", " + std::to_string(b.left) + ", " +
                          std::to_string(b.height) + "x" + std::to_string(b.width) + ") outside " + ref.str());
    }
  }
  FeatureMap img(grid_shape(static_cast<int>(panels.size()), crops, layout), 1.0);
  const int colw = column_width(crops, layout);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const int x0 = layout.margin + static_cast<int>(p) * (colw + layout.margin);
    draw_text(img, layout.margin + (layout.label_height - 7) / 2, x0, colw, panels[p].label);
    for (std::size_t k = 0; k < crops.size(); ++k) {
      const CropBox& b = crops[k];
      const auto [ty, tx] = grid_tile_origin(static_cast<int>(p), static_cast<int>(k), crops, layout);
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < b.height * layout.zoom; ++y) {
          for (int x = 0; x < b.width * layout.zoom; ++x) {
            const double v = panels[p].image.at(c, b.top + y / layout.zoom, b.left + x / layout.zoom);
            img.at(c, ty + y, tx + x) = std::clamp(v, 0.0, 1.0);
          }
        }
      }
    }
  }
  return img;
}

std::uint64_t image_hash(const FeatureMap& rgb) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 1099511628211ULL;
  };
  for (int d : {rgb.channels(), rgb.height(), rgb.width()}) {
    for (int i = 0; i < 4; ++i) mix(static_cast<std::uint8_t>((d >> (8 * i)) & 0xff));
  }
  for (std::uint8_t b : to_rgb8(rgb)) mix(b);
  return h;
}

}  // namespace rgan
