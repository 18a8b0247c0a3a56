#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "rgan/image_io.hpp"
#include "rgan/tensor.hpp"

namespace fixture {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("rgan_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// 8-bit exact random frame, so a PNG round trip is lossless.
inline rgan::FeatureMap png_frame(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  rgan::FeatureMap f(3, h, w);
  for (double& v : f.values()) v = d(rng) / 255.0;
  return f;
}

inline void write_sequence(const std::filesystem::path& dir, int frames, int h, int w, std::uint64_t seed,
                           const std::string& prefix = "im", int first = 1) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < frames; ++i) {
    rgan::write_png(dir / (prefix + std::to_string(first + i) + ".png"), png_frame(h, w, seed + i));
  }
}

}  // namespace fixture
