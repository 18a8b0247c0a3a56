#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rgan/tensor.hpp"
#include "rgan/tgam.hpp"

namespace rgan {

// Blur-then-decimate (BD) degradation.
struct DegradationConfig {
  double sigma = 1.6;
  int scale = 4;
  int kernel_size = 13;
  int decimation_offset = 2;

  void validate() const;
  bool operator==(const DegradationConfig&) const = default;
};

// Normalised 2-D Gaussian, row-major size x size.
std::vector<double> gaussian_kernel(double sigma, int size);
// Normalised 1-D Gaussian; gaussian_kernel is its outer product with itself.
std::vector<double> gaussian_kernel_1d(double sigma, int size);

// Reflect-101 padded Gaussian blur, same size output.
FeatureMap gaussian_blur(const FeatureMap& image, double sigma, int size);

FeatureMap degrade(const FeatureMap& hr, const DegradationConfig& cfg);
VideoTensor degrade(const VideoTensor& hr, const DegradationConfig& cfg);

// Crops the bottom/right edges so both dimensions are multiples of scale.
FeatureMap mod_crop(const FeatureMap& image, int scale);

FrameTriple triple_at(const VideoTensor& seq, std::size_t t);
// Edge frames reuse themselves as the missing neighbour.
std::vector<FrameTriple> pad_sequence(const VideoTensor& seq);

struct ClipRecord {
  std::string id;
  std::vector<std::filesystem::path> frames;
  int width = 0;
  int height = 0;
};

enum class DatasetLayout {
  septuplet_list,  // root/<list file> naming clip dirs holding im1..im7
  sequence_dirs,   // root/<sequence>/<frame>.png
};

inline constexpr const char* kDefaultListFile = "sep_trainlist.txt";

// Sorted lexicographically; validates frame counts and uniform resolution.
std::vector<ClipRecord> scan_dataset(const std::filesystem::path& root, DatasetLayout layout,
                                     const std::string& list_file = kDefaultListFile);

VideoTensor load_clip(const ClipRecord& rec);

// Horizontal flip, then vertical flip, then `rotations` quarter turns counter-clockwise.
struct Augmentation {
  int rotations = 0;
  bool flip_h = false;
  bool flip_v = false;

  bool operator==(const Augmentation&) const = default;
};

FeatureMap rotate90(const FeatureMap& image);
FeatureMap flip_horizontal(const FeatureMap& image);
FeatureMap flip_vertical(const FeatureMap& image);
FeatureMap augment(const FeatureMap& image, const Augmentation& aug);
FeatureMap crop(const FeatureMap& image, int top, int left, int height, int width);

struct SampleConfig {
  int hr_patch = 256;
  DegradationConfig degradation;
  bool augment = true;
};

struct TrainSample {
  std::string clip_id;
  VideoTensor lr;
  VideoTensor hr;
  Augmentation augmentation;
  int crop_top = 0;
  int crop_left = 0;
};

// Same crop and augmentation for every frame, then degradation.
TrainSample make_sample(const VideoTensor& frames, const std::string& clip_id, int top, int left,
                        const Augmentation& aug, const SampleConfig& cfg);
TrainSample sample_training_clip(const VideoTensor& frames, const std::string& clip_id, const SampleConfig& cfg,
                                 std::mt19937_64& rng);
TrainSample sample_training_clip(const ClipRecord& rec, const SampleConfig& cfg, std::mt19937_64& rng);

}  // namespace rgan
