#include "rgan/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace rgan {

std::string Shape3::str() const {
  return "[" + std::to_string(channels) + ", " + std::to_string(height) + ", " + std::to_string(width) + "]";
}

FeatureMap::FeatureMap(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw ContractError("FeatureMap: dimensions must be >= 1, got " + shape().str());
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

bool FeatureMap::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void FeatureMap::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

FeatureMap& FeatureMap::operator+=(const FeatureMap& other) {
  require_same_shape(*this, other, "FeatureMap::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

void require_same_shape(const FeatureMap& a, const FeatureMap& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

Shape3 video_frame_shape(const VideoTensor& video) {
  if (video.empty()) throw ContractError("video: sequence is empty");
  const Shape3 s = video.front().shape();
  for (std::size_t t = 1; t < video.size(); ++t) {
    if (video[t].shape() != s) {
      throw ContractError("video: frame " + std::to_string(t) + " has shape " + video[t].shape().str() +
                          ", expected " + s.str());
    }
  }
  return s;
}

FeatureMap concat_channels(std::span<const FeatureMap* const> parts) {
  if (parts.empty()) throw ContractError("concat_channels: no inputs");
  int total = 0;
  const int h = parts[0]->height();
  const int w = parts[0]->width();
  for (const FeatureMap* p : parts) {
    if (p->height() != h || p->width() != w) {
      throw ContractError("concat_channels: spatial mismatch " + parts[0]->shape().str() + " vs " + p->shape().str());
    }
    total += p->channels();
  }
  FeatureMap out(total, h, w);
  double* dst = out.data();
  for (const FeatureMap* p : parts) dst = std::copy(p->data(), p->data() + p->size(), dst);
  return out;
}

FeatureMap concat_channels(std::initializer_list<const FeatureMap*> parts) {
  return concat_channels(std::span<const FeatureMap* const>(parts.begin(), parts.size()));
}

FeatureMap slice_channels(const FeatureMap& x, int begin, int count) {
  if (begin < 0 || count < 1 || begin + count > x.channels()) {
    throw ContractError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                        ") outside " + x.shape().str());
  }
  FeatureMap out(count, x.height(), x.width());
  const double* src = x.data() + begin * x.plane();
  std::copy(src, src + out.size(), out.data());
  return out;
}

std::vector<FeatureMap> split_channels(const FeatureMap& whole, std::span<const int> channel_counts) {
  std::vector<FeatureMap> out;
  out.reserve(channel_counts.size());
  int offset = 0;
  for (int c : channel_counts) {
    out.push_back(slice_channels(whole, offset, c));
    offset += c;
  }
  if (offset != whole.channels()) {
    throw ContractError("split_channels: counts sum to " + std::to_string(offset) + " but map has " +
                        std::to_string(whole.channels()) + " channels");
  }
  return out;
}

}  // namespace rgan
