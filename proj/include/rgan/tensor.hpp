#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgan {

// Caller broke an operation's precondition (shapes, sizes, finiteness).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid model / degradation / training configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Missing or malformed files on disk.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;

  bool operator==(const Shape3&) const = default;
  std::string str() const;
};

// Dense [C, H, W] array of doubles, channel-major.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, double fill = 0.0);
  explicit FeatureMap(Shape3 shape, double fill = 0.0)
      : FeatureMap(shape.channels, shape.height, shape.width, fill) {}

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  Shape3 shape() const { return {channels_, height_, width_}; }
  std::size_t plane() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) { return data_[(c * plane()) + static_cast<std::size_t>(y) * width_ + x]; }
  double at(int c, int y, int x) const { return data_[(c * plane()) + static_cast<std::size_t>(y) * width_ + x]; }

  std::span<double> channel(int c) { return {data_.data() + c * plane(), plane()}; }
  std::span<const double> channel(int c) const { return {data_.data() + c * plane(), plane()}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool all_finite() const;
  void fill(double v);

  FeatureMap& operator+=(const FeatureMap& other);
  bool operator==(const FeatureMap& other) const = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// A clip of frames [T, C, H, W]; every frame has the same shape.
using VideoTensor = std::vector<FeatureMap>;

// Throws ContractError unless every frame shares one shape and T >= 1.
Shape3 video_frame_shape(const VideoTensor& video);

FeatureMap concat_channels(std::initializer_list<const FeatureMap*> parts);
FeatureMap concat_channels(std::span<const FeatureMap* const> parts);

// Splits `whole` back into pieces of the listed channel counts.
std::vector<FeatureMap> split_channels(const FeatureMap& whole, std::span<const int> channel_counts);

FeatureMap slice_channels(const FeatureMap& x, int begin, int count);

void require_same_shape(const FeatureMap& a, const FeatureMap& b, const char* what);

}  // namespace rgan
