#include "rgan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace rgan {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) { throw DataError(std::string("png: ") + msg); }
void png_warning_handler(png_structp, png_const_charp) {}

class PngReader {
 public:
  explicit PngReader(const std::filesystem::path& path) : file_(open_file(path, "rb")), path_(path) {
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file_.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
      throw DataError(path.string() + " is not a PNG file");
    }
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
    info_ = png_create_info_struct(png_);
    if (!png_ || !info_) throw DataError("png: allocation failed");
    png_init_io(png_, file_.get());
    png_set_sig_bytes(png_, 8);
    png_read_info(png_, info_);
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  ImageSize size() const {
    return {static_cast<int>(png_get_image_width(png_, info_)), static_cast<int>(png_get_image_height(png_, info_))};
  }

  std::vector<std::uint8_t> read_rgb() {
    const int color = png_get_color_type(png_, info_);
    if (png_get_bit_depth(png_, info_) == 16) png_set_strip_16(png_);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png_);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_expand_gray_1_2_4_to_8(png_);
      png_set_gray_to_rgb(png_);
    }
    if (png_get_valid(png_, info_, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png_);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png_, info_, PNG_INFO_tRNS)) png_set_strip_alpha(png_);
    png_read_update_info(png_, info_);
    const ImageSize sz = size();
    if (png_get_rowbytes(png_, info_) != static_cast<std::size_t>(sz.width) * 3) {
      throw DataError(path_.string() + ": unsupported PNG layout");
    }
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(sz.width) * sz.height * 3);
    std::vector<png_bytep> rows(sz.height);
    for (int y = 0; y < sz.height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * sz.width * 3;
    png_read_image(png_, rows.data());
    png_read_end(png_, nullptr);
    return pixels;
  }

 private:
  File file_;
  std::filesystem::path path_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

}  // namespace

std::vector<std::uint8_t> to_rgb8(const FeatureMap& rgb) {
  if (rgb.channels() != 3) throw ContractError("to_rgb8: expected 3 channels, got " + rgb.shape().str());
  const std::size_t hw = rgb.plane();
  std::vector<std::uint8_t> out(hw * 3);
  for (int c = 0; c < 3; ++c) {
    const auto ch = rgb.channel(c);
    for (std::size_t i = 0; i < hw; ++i) {
      const double v = std::clamp(ch[i], 0.0, 1.0);
      out[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return out;
}

FeatureMap from_rgb8(const std::vector<std::uint8_t>& pixels, int width, int height) {
  FeatureMap out(3, height, width);
  const std::size_t hw = out.plane();
  if (pixels.size() != hw * 3) throw ContractError("from_rgb8: buffer size does not match dimensions");
  for (int c = 0; c < 3; ++c) {
    auto ch = out.channel(c);
    for (std::size_t i = 0; i < hw; ++i) ch[i] = pixels[i * 3 + c] / 255.0;
  }
  return out;
}

FeatureMap quantize8(const FeatureMap& rgb) { return from_rgb8(to_rgb8(rgb), rgb.width(), rgb.height()); }

FeatureMap read_png(const std::filesystem::path& path) {
  PngReader reader(path);
  const ImageSize sz = reader.size();
  return from_rgb8(reader.read_rgb(), sz.width, sz.height);
}

ImageSize png_size(const std::filesystem::path& path) { return PngReader(path).size(); }

void write_png(const std::filesystem::path& path, const FeatureMap& rgb) {
  const std::vector<std::uint8_t> pixels = to_rgb8(rgb);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  File file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: allocation failed");
  }
  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, rgb.width(), rgb.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(rgb.height());
    for (int y = 0; y < rgb.height(); ++y) {
      rows[y] = const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * rgb.width() * 3);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

}  // namespace rgan
