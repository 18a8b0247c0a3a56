#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgan/data.hpp"
#include "rgan/net.hpp"

namespace rgan {

enum class LossKind { charbonnier, l1 };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

struct TrainConfig {
  double base_lr = 1e-4;
  double decay_factor = 0.5;
  int decay_every = 25;
  int total_epochs = 75;
  int batch_size = 8;
  int clip_length = 7;
  LossKind loss = LossKind::charbonnier;
  double loss_eps = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int hr_patch = 256;
  // 0 means floor(clips / batch_size), at least one.
  int steps_per_epoch = 0;
  bool augment = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Thrown when a step produces a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// base_lr * decay_factor^floor(epoch / decay_every)
double lr_at(int epoch, const TrainConfig& cfg);

// Mean of sqrt((p - t)^2 + eps^2). When grad is non-null it receives dL/dpred.
double charbonnier_loss(const VideoTensor& pred, const VideoTensor& target, double eps, VideoTensor* grad = nullptr);
double l1_loss(const VideoTensor& pred, const VideoTensor& target, VideoTensor* grad = nullptr);
double training_loss(const VideoTensor& pred, const VideoTensor& target, const TrainConfig& cfg,
                     VideoTensor* grad = nullptr);

// First and second moments per named parameter array.
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  bool operator==(const AdamState&) const = default;
};

AdamState make_adam_state(const RganParams& params);
void adam_update(RganParams& params, const RganParams& grad, AdamState& state, double lr, const TrainConfig& cfg);

// Full resumable training state.
struct Checkpoint {
  RganParams params;
  AdamState optimizer;
  int epoch = 0;  // next epoch to run
  std::mt19937_64 rng;
  TrainConfig train;
  std::vector<double> loss_history;
};

Checkpoint start_training(const RganParams& params, const TrainConfig& cfg);

class ClipSource {
 public:
  virtual ~ClipSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::string id(std::size_t index) const = 0;
  virtual VideoTensor load(std::size_t index) const = 0;
};

class DiskClipSource : public ClipSource {
 public:
  explicit DiskClipSource(std::vector<ClipRecord> records) : records_(std::move(records)) {}
  std::size_t size() const override { return records_.size(); }
  std::string id(std::size_t index) const override { return records_.at(index).id; }
  VideoTensor load(std::size_t index) const override { return load_clip(records_.at(index)); }

 private:
  std::vector<ClipRecord> records_;
};

class MemoryClipSource : public ClipSource {
 public:
  void add(std::string id, VideoTensor frames) { clips_.emplace_back(std::move(id), std::move(frames)); }
  std::size_t size() const override { return clips_.size(); }
  std::string id(std::size_t index) const override { return clips_.at(index).first; }
  VideoTensor load(std::size_t index) const override { return clips_.at(index).second; }

 private:
  std::vector<std::pair<std::string, VideoTensor>> clips_;
};

struct StepLog {
  int epoch = 0;
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const Checkpoint&)> on_epoch_end;
};

// Forward, loss, backward over a batch and one optimizer update. Returns the
// mean batch loss.
double train_step(Checkpoint& state, const std::vector<TrainSample>& batch, const TrainConfig& cfg, double lr);

// Runs epochs [state.epoch, min(total_epochs, state.epoch + max_epochs)).
// max_epochs < 0 runs to completion.
void train(Checkpoint& state, const ClipSource& data, const TrainConfig& cfg, const DegradationConfig& degradation,
           int max_epochs = -1, const TrainHooks& hooks = {});

// Desk-scale trainability proxy: overfit one clip and compare with bicubic.
struct OverfitConfig {
  int width = 12;
  int max_iterations = 1000;
  int eval_every = 25;
  double lr = 2e-3;
  double target_gain_db = 3.0;
  double loss_eps = 1e-3;
  std::uint64_t seed = 1;
  DegradationConfig degradation;
};

struct OverfitReport {
  int iterations = 0;
  double bicubic_psnr = 0.0;
  double model_psnr = 0.0;
  double gain_db = 0.0;
  bool passed = false;
  std::vector<double> losses;
  // Best loss seen up to each evaluation point.
  std::vector<double> best_loss;
};

OverfitReport overfit_smoke(const VideoTensor& hr_clip, const OverfitConfig& cfg);

// Deterministic moving-shapes clip in [0, 1] for harnesses and tests.
VideoTensor synthetic_clip(int frames, int height, int width, std::uint64_t seed);

}  // namespace rgan
