#pragma once

#include <optional>
#include <vector>

#include "rgan/blocks.hpp"
#include "rgan/model_config.hpp"

namespace rgan {

// Frames t-1, t, t+1 of a low-resolution clip.
struct FrameTriple {
  FeatureMap prev;
  FeatureMap ref;
  FeatureMap next;
};

// Temporal grouping attention parameters. `reference` is empty when the
// reference group is ablated; `tam` is absent when the temporal attention
// module is ablated, in which case `fuse` maps width -> width instead of
// (2 * width - 3) -> width.
struct TgamParams {
  std::vector<ConvParams> reference;
  std::vector<ConvParams> fusion;
  std::optional<ConvParams> tam;
  ConvParams fuse;

  static TgamParams zeros(int width, const AblationSpec& spec);
  bool operator==(const TgamParams&) const = default;
};

struct TgamFeatures {
  std::optional<FeatureMap> f_ref;
  FeatureMap f_fus;
  FeatureMap f_fus_pre;
  FeatureMap f_att_raw;  // empty without TAM
  FeatureMap f_att;      // width - 3 channels; empty without TAM
  FeatureMap weights;    // [3, H, W] slot weights; empty without TAM
};

struct TemporalAttention {
  FeatureMap raw;       // cell output, filled by temporal_attention only
  FeatureMap features;  // width - 3 channels
  FeatureMap weights;   // [3, H, W], softmax over slots per pixel
};

// The raw attention feature holds three temporal slots of width/3 channels.
// The first channel of each slot is that slot's logit; a per-pixel softmax
// over the three logits weights the slot's remaining channels.
//
// Other readings of "softmax in the depth dimension" exist: a softmax over
// all channels of the selected map, or a sigmoid gate from a single map.
// Swapping interpretations only touches this function and its backward.
TemporalAttention gate_temporal_slots(const FeatureMap& raw);
FeatureMap gate_temporal_slots_backward(const FeatureMap& raw, const FeatureMap& weights,
                                        const FeatureMap& d_features);

struct TemporalAttentionCache {
  CellCache cell;
  FeatureMap weights;
};

TemporalAttention temporal_attention(const FeatureMap& f_fus_pre, const ConvParams& cell, double slope,
                                     TemporalAttentionCache* cache = nullptr);
FeatureMap temporal_attention_backward(const TemporalAttentionCache& cache, const ConvParams& cell, double slope,
                                       const FeatureMap& d_features, ConvParams& grad);

// Four chained cells on the centre frame only.
FeatureMap reference_branch(const FeatureMap& ref, std::span<const ConvParams> cells, double slope,
                            std::vector<CellCache>* caches = nullptr);
// Four chained cells on the channel concatenation (prev, ref, next).
FeatureMap fusion_branch(const FrameTriple& triple, std::span<const ConvParams> cells, double slope,
                         std::vector<CellCache>* caches = nullptr);

struct TgamCache {
  std::vector<CellCache> reference;
  std::vector<CellCache> fusion;
  TemporalAttentionCache tam;
  CellCache fuse;
  int pre_channels = 0;
  int att_channels = 0;
};

TgamFeatures tgam_forward(const FrameTriple& triple, const TgamParams& p, const AblationSpec& spec, double slope,
                          TgamCache* cache = nullptr);

// Gradients into `grad`; frames are data so no input gradient is returned.
// d_ref is ignored when the reference group is ablated.
void tgam_backward(const TgamCache& cache, const TgamParams& p, const AblationSpec& spec, double slope,
                   const FeatureMap* d_ref, const FeatureMap& d_fus, TgamParams& grad);

}  // namespace rgan
