#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rgan/data.hpp"
#include "rgan/net.hpp"

namespace rgan {

struct EvalConfig {
  DegradationConfig degradation;
  int crop_border = 0;
  int workers = 1;
  // Round the degraded input and the upscaled output to 8 bits, as when both
  // pass through image files.
  bool quantize = true;
};

struct SequenceMetrics {
  std::string id;
  int frames = 0;
  double psnr = 0.0;  // mean over frames with finite PSNR; kInfinitePsnr if none
  double ssim = 0.0;
  int infinite_frames = 0;
  bool failed = false;
  std::string error;
};

struct MetricReport {
  std::string method;   // "bicubic" or "model"
  std::string variant;  // model variant label, empty for baselines
  std::string dataset;
  DegradationConfig degradation;
  int crop_border = 0;
  std::string ssim_windows = "valid";
  std::vector<SequenceMetrics> sequences;  // sorted by id
  // Means over non-failed sequences; infinite per-sequence PSNRs are skipped
  // and counted in infinite_sequences.
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  int infinite_sequences = 0;
  int failed_sequences = 0;
  int total_frames = 0;
};

// Maps a degraded clip to its HR estimate. The id lets oracles look up data.
using Upscaler = std::function<VideoTensor(const std::string& id, const VideoTensor& lr)>;

Upscaler bicubic_upscaler(int scale);
// tile = 0 processes whole frames.
Upscaler model_upscaler(const RganParams& params, int tile = 0);

// Runs the network on spatial tiles of `tile` LR pixels, each padded with
// `overlap` pixels of context, and stitches the centre regions.
VideoTensor tiled_forward(const VideoTensor& lr, const RganParams& params, int tile, int overlap = 8);

struct NamedClip {
  std::string id;
  VideoTensor frames;
};

// GT clips in, report out. Sequences may run concurrently (cfg.workers).
MetricReport evaluate_clips(const std::vector<NamedClip>& gt, const Upscaler& up, const EvalConfig& cfg);
// Scans root as per-sequence directories and loads each clip lazily.
MetricReport evaluate_dataset(const std::filesystem::path& root, const Upscaler& up, const EvalConfig& cfg);

// Stable key order JSON.
std::string report_json(const MetricReport& report);
std::string report_table(const MetricReport& report);

struct BenchConfig {
  int height = 180;
  int width = 320;
  int frames = 7;
  int warmup = 1;  // full untimed passes before measuring
  std::uint64_t seed = 0;
};

struct BenchReport {
  std::vector<double> frame_ms;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  int height = 0;
  int width = 0;
  int warmup = 0;
  std::string device;
};

BenchReport benchmark(const RganParams& params, const BenchConfig& cfg);
std::string bench_json(const BenchReport& report);

}  // namespace rgan
