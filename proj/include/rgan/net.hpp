#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rgan/asm.hpp"
#include "rgan/blocks.hpp"
#include "rgan/model_config.hpp"
#include "rgan/tgam.hpp"

namespace rgan {

// Hidden state and output feature carried between time steps of one direction.
struct RecurrentState {
  FeatureMap ht;
  FeatureMap out;

  static RecurrentState zeros(int width, int height, int cols);
};

// One propagation direction: TGAM, aggregation cell, ASM, and the two heads.
struct DirectionParams {
  TgamParams tgam;
  ConvParams aggregate;
  AsmParams asm_block;
  ConvParams hidden;
  ConvParams output;

  static DirectionParams zeros(const ModelConfig& cfg, const AblationSpec& spec);
  bool operator==(const DirectionParams&) const = default;
};

// Feature reconstruction: fusion cell, residual blocks, projection to
// 3 * scale^2 channels, pixel shuffle.
struct FrmParams {
  ConvParams fuse;
  std::vector<ResBlockParams> res;
  ConvParams out;

  static FrmParams zeros(const ModelConfig& cfg, const AblationSpec& spec);
  bool operator==(const FrmParams&) const = default;
};

struct RganParams {
  ModelConfig config;
  AblationSpec spec;
  DirectionParams forward;
  DirectionParams backward;  // unused when config.share_directions
  FrmParams frm;

  static RganParams zeros(const ModelConfig& cfg, const AblationSpec& spec);
  RganParams zeros_like() const { return zeros(config, spec); }

  const DirectionParams& backward_direction() const { return config.share_directions ? forward : backward; }
  DirectionParams& backward_direction() { return config.share_directions ? forward : backward; }

  bool operator==(const RganParams&) const = default;
};

// Flat, named view of one parameter array.
struct ParamArray {
  std::string name;
  std::string module;
  std::vector<int> shape;
  std::vector<double>* values = nullptr;
};

struct ConstParamArray {
  std::string name;
  std::string module;
  std::vector<int> shape;
  const std::vector<double>* values = nullptr;
};

// Deterministic order; the backward direction is omitted when shared.
std::vector<ParamArray> named_arrays(RganParams& params);
std::vector<ConstParamArray> named_arrays(const RganParams& params);

struct ParamReport {
  std::string variant;
  std::vector<std::pair<std::string, std::size_t>> modules;  // in enumeration order
  std::size_t total = 0;
};

ParamReport count_params(const RganParams& params);
std::string format_param_report(const ParamReport& report);

struct InitOptions {
  // Start exactly at the bicubic baseline.
  bool zero_residual_output = true;
  // Multiplies the second convolution of every residual block, so that a
  // freshly built block stays close to the identity.
  double residual_branch_scale = 0.1;
};

struct BuiltModel {
  RganParams params;
  ParamReport report;
};

// Kaiming fan-in initialisation, zero biases, seeded generator.
BuiltModel build_model(const ModelConfig& cfg, const AblationSpec& spec, std::uint64_t seed, InitOptions opts = {});

struct StepCache {
  TgamCache tgam;
  CellCache aggregate;
  AsmCache asm_cache;
  CellCache hidden;
  CellCache output;
  std::vector<int> aggregate_parts;  // channel counts of the aggregation input
};

struct StepResult {
  RecurrentState state;
  std::optional<FeatureMap> f_ref;
};

// Shared body of the forward and backward extraction modules.
StepResult direction_step(const FrameTriple& triple, const RecurrentState& state, const DirectionParams& p,
                          const ModelConfig& cfg, const AblationSpec& spec, StepCache* cache = nullptr);

// Returns dL/d(previous state). d_ref carries the FRM gradient of the
// reference feature (forward direction only).
RecurrentState direction_step_backward(const StepCache& cache, const DirectionParams& p, const ModelConfig& cfg,
                                       const AblationSpec& spec, const RecurrentState& d_state,
                                       const FeatureMap* d_ref, DirectionParams& grad);

StepResult ffem_step(const FrameTriple& triple, const RecurrentState& state, const RganParams& params,
                     StepCache* cache = nullptr);
RecurrentState bfem_step(const FrameTriple& triple, const RecurrentState& state, const RganParams& params,
                         StepCache* cache = nullptr);

struct FrmCache {
  CellCache fuse;
  std::vector<ResBlockCache> res;
  FeatureMap projection_input;
  std::vector<int> fuse_parts;
};

// f_ref may be null when the reference group is ablated.
FeatureMap frm_forward(const FeatureMap& out_pre, const FeatureMap& out_post, const FeatureMap* f_ref,
                       const FrmParams& p, const ModelConfig& cfg, FrmCache* cache = nullptr);

struct FrmGradients {
  FeatureMap d_out_pre;
  FeatureMap d_out_post;
  FeatureMap d_ref;  // empty without reference group
};

FrmGradients frm_backward(const FrmCache& cache, const FrmParams& p, const ModelConfig& cfg, const FeatureMap& dy,
                          FrmParams& grad);

struct BidirectionalFeatures {
  std::vector<FeatureMap> out_pre;
  std::vector<FeatureMap> out_post;
  std::vector<std::optional<FeatureMap>> f_ref;
};

struct ForwardCache {
  std::vector<StepCache> forward;
  std::vector<StepCache> backward;
  std::vector<FrmCache> frm;
};

// Per-output-frame wall time, summed over the frame's forward step,
// backward step, reconstruction and bicubic skip.
struct FrameTimings {
  std::vector<double> seconds;
};

// Both recurrences over an end-replicated clip.
BidirectionalFeatures propagate(const VideoTensor& lr, const RganParams& params, ForwardCache* cache = nullptr,
                                FrameTimings* timings = nullptr);

VideoTensor rgan_forward(const VideoTensor& lr, const RganParams& params, FrameTimings* timings = nullptr);
VideoTensor rgan_forward(const VideoTensor& lr, const RganParams& params, ForwardCache& cache);

// Accumulates dL/dparams into grad given dL/d(output video).
void rgan_backward(const ForwardCache& cache, const RganParams& params, const VideoTensor& d_output, RganParams& grad);

}  // namespace rgan
