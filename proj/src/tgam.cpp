#include "rgan/tgam.hpp"

#include <algorithm>
#include <cmath>

namespace rgan {
namespace {

constexpr int kSlots = 3;
constexpr int kBranchCells = 4;

void check_branch(std::span<const ConvParams> cells, int in_channels, const char* op) {
  if (cells.size() != kBranchCells) {
    throw ConfigError(std::string(op) + ": expected 4 cells, got " + std::to_string(cells.size()));
  }
  if (cells[0].in_channels != in_channels) {
    throw ConfigError(std::string(op) + ": first cell takes " + std::to_string(cells[0].in_channels) +
                      " channels, expected " + std::to_string(in_channels));
  }
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].in_channels != cells[i - 1].out_channels || cells[i].out_channels != cells[0].out_channels) {
      throw ConfigError(std::string(op) + ": cell " + std::to_string(i) + " widths do not chain");
    }
  }
}

FeatureMap chain_cells(FeatureMap x, std::span<const ConvParams> cells, double slope, std::vector<CellCache>* caches) {
  if (caches) caches->assign(cells.size(), {});
  for (std::size_t i = 0; i < cells.size(); ++i) {
    x = cell_forward(x, cells[i], slope, caches ? &(*caches)[i] : nullptr);
  }
  return x;
}

// The first cell of each branch reads frames, whose gradient is not needed.
void chain_cells_backward(const std::vector<CellCache>& caches, std::span<const ConvParams> cells, double slope,
                          FeatureMap d, std::vector<ConvParams>& grads) {
  for (std::size_t i = cells.size(); i-- > 0;) {
    d = cell_backward(caches[i], cells[i], slope, d, grads[i], i > 0);
  }
}

}  // namespace

TgamParams TgamParams::zeros(int width, const AblationSpec& spec) {
  if (width % kSlots != 0) {
    throw ConfigError("tgam: width " + std::to_string(width) + " is not divisible by 3");
  }
  TgamParams p;
  if (spec.reference_group) {
    p.reference.push_back(ConvParams::zeros(3, width));
    for (int i = 1; i < kBranchCells; ++i) p.reference.push_back(ConvParams::zeros(width, width));
  }
  p.fusion.push_back(ConvParams::zeros(3 * kSlots, width));
  for (int i = 1; i < kBranchCells; ++i) p.fusion.push_back(ConvParams::zeros(width, width));
  if (spec.tam) {
    p.tam = ConvParams::zeros(width, width);
    p.fuse = ConvParams::zeros(2 * width - kSlots, width);
  } else {
    p.fuse = ConvParams::zeros(width, width);
  }
  return p;
}

TemporalAttention gate_temporal_slots(const FeatureMap& raw) {
  if (raw.channels() % kSlots != 0 || raw.channels() < 2 * kSlots) {
    throw ConfigError("temporal_attention: " + std::to_string(raw.channels()) +
                      " channels cannot form three slots with a logit and features each");
  }
  const int slot = raw.channels() / kSlots;
  const int feats = slot - 1;
  const std::size_t hw = raw.plane();
  TemporalAttention out{{}, FeatureMap(kSlots * feats, raw.height(), raw.width()),
                        FeatureMap(kSlots, raw.height(), raw.width())};
  for (std::size_t i = 0; i < hw; ++i) {
    double logits[kSlots];
    for (int k = 0; k < kSlots; ++k) logits[k] = raw.data()[k * slot * hw + i];
    const double peak = *std::max_element(logits, logits + kSlots);
    double total = 0.0;
    for (double& l : logits) {
      l = std::exp(l - peak);
      total += l;
    }
    for (int k = 0; k < kSlots; ++k) out.weights.data()[k * hw + i] = logits[k] / total;
  }
  for (int k = 0; k < kSlots; ++k) {
    const double* w = out.weights.channel(k).data();
    for (int j = 0; j < feats; ++j) {
      const double* src = raw.channel(k * slot + 1 + j).data();
      double* dst = out.features.channel(k * feats + j).data();
      for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * w[i];
    }
  }
  return out;
}

FeatureMap gate_temporal_slots_backward(const FeatureMap& raw, const FeatureMap& weights,
                                        const FeatureMap& d_features) {
  const int slot = raw.channels() / kSlots;
  const int feats = slot - 1;
  const std::size_t hw = raw.plane();
  if (d_features.shape() != Shape3{kSlots * feats, raw.height(), raw.width()}) {
    throw ContractError("temporal_attention_backward: gradient " + d_features.shape().str() +
                        " does not match raw feature " + raw.shape().str());
  }
  FeatureMap d_raw(raw.shape());
  FeatureMap d_weights(kSlots, raw.height(), raw.width());
  for (int k = 0; k < kSlots; ++k) {
    const double* w = weights.channel(k).data();
    double* dw = d_weights.channel(k).data();
    for (int j = 0; j < feats; ++j) {
      const double* src = raw.channel(k * slot + 1 + j).data();
      const double* g = d_features.channel(k * feats + j).data();
      double* dsrc = d_raw.channel(k * slot + 1 + j).data();
      for (std::size_t i = 0; i < hw; ++i) {
        dsrc[i] = g[i] * w[i];
        dw[i] += g[i] * src[i];
      }
    }
  }
  for (std::size_t i = 0; i < hw; ++i) {
    double dot = 0.0;
    for (int k = 0; k < kSlots; ++k) dot += weights.data()[k * hw + i] * d_weights.data()[k * hw + i];
    for (int k = 0; k < kSlots; ++k) {
      const double w = weights.data()[k * hw + i];
      d_raw.data()[k * slot * hw + i] = w * (d_weights.data()[k * hw + i] - dot);
    }
  }
  return d_raw;
}

TemporalAttention temporal_attention(const FeatureMap& f_fus_pre, const ConvParams& cell, double slope,
                                     TemporalAttentionCache* cache) {
  FeatureMap raw = cell_forward(f_fus_pre, cell, slope, cache ? &cache->cell : nullptr);
  TemporalAttention out = gate_temporal_slots(raw);
  if (cache) cache->weights = out.weights;
  out.raw = std::move(raw);
  return out;
}

FeatureMap temporal_attention_backward(const TemporalAttentionCache& cache, const ConvParams& cell, double slope,
                                       const FeatureMap& d_features, ConvParams& grad) {
  const FeatureMap d_raw = gate_temporal_slots_backward(cache.cell.output, cache.weights, d_features);
  return cell_backward(cache.cell, cell, slope, d_raw, grad);
}

FeatureMap reference_branch(const FeatureMap& ref, std::span<const ConvParams> cells, double slope,
                            std::vector<CellCache>* caches) {
  check_branch(cells, 3, "reference_branch");
  return chain_cells(ref, cells, slope, caches);
}

FeatureMap fusion_branch(const FrameTriple& triple, std::span<const ConvParams> cells, double slope,
                         std::vector<CellCache>* caches) {
  if (triple.prev.shape() != triple.ref.shape() || triple.next.shape() != triple.ref.shape()) {
    throw ContractError("fusion_branch: frame sizes differ: " + triple.prev.shape().str() + ", " +
                        triple.ref.shape().str() + ", " + triple.next.shape().str());
  }
  check_branch(cells, 3 * triple.ref.channels(), "fusion_branch");
  return chain_cells(concat_channels({&triple.prev, &triple.ref, &triple.next}), cells, slope, caches);
}

TgamFeatures tgam_forward(const FrameTriple& triple, const TgamParams& p, const AblationSpec& spec, double slope,
                          TgamCache* cache) {
  if (spec.reference_group != !p.reference.empty() || spec.tam != p.tam.has_value()) {
    throw ConfigError("tgam_forward: parameters were built for a different ablation than " + spec.label());
  }
  TgamFeatures out;
  if (spec.reference_group) {
    out.f_ref = reference_branch(triple.ref, p.reference, slope, cache ? &cache->reference : nullptr);
  }
  out.f_fus_pre = fusion_branch(triple, p.fusion, slope, cache ? &cache->fusion : nullptr);
  if (spec.tam) {
    TemporalAttention att = temporal_attention(out.f_fus_pre, *p.tam, slope, cache ? &cache->tam : nullptr);
    out.f_att_raw = std::move(att.raw);
    out.f_att = std::move(att.features);
    out.weights = std::move(att.weights);
    if (p.fuse.in_channels != out.f_fus_pre.channels() + out.f_att.channels()) {
      throw ConfigError("tgam_forward: fuse cell expects " + std::to_string(p.fuse.in_channels) + " channels, got " +
                        std::to_string(out.f_fus_pre.channels() + out.f_att.channels()));
    }
    out.f_fus = cell_forward(concat_channels({&out.f_fus_pre, &out.f_att}), p.fuse, slope,
                             cache ? &cache->fuse : nullptr);
    if (cache) cache->att_channels = out.f_att.channels();
  } else {
    out.f_fus = cell_forward(out.f_fus_pre, p.fuse, slope, cache ? &cache->fuse : nullptr);
    if (cache) cache->att_channels = 0;
  }
  if (cache) cache->pre_channels = out.f_fus_pre.channels();
  return out;
}

void tgam_backward(const TgamCache& cache, const TgamParams& p, const AblationSpec& spec, double slope,
                   const FeatureMap* d_ref, const FeatureMap& d_fus, TgamParams& grad) {
  FeatureMap d_fuse_in = cell_backward(cache.fuse, p.fuse, slope, d_fus, grad.fuse);
  FeatureMap d_pre;
  if (spec.tam) {
    const int counts[2] = {cache.pre_channels, cache.att_channels};
    std::vector<FeatureMap> parts = split_channels(d_fuse_in, counts);
    d_pre = std::move(parts[0]);
    d_pre += temporal_attention_backward(cache.tam, *p.tam, slope, parts[1], *grad.tam);
  } else {
    d_pre = std::move(d_fuse_in);
  }
  chain_cells_backward(cache.fusion, p.fusion, slope, std::move(d_pre), grad.fusion);
  if (spec.reference_group && d_ref) {
    chain_cells_backward(cache.reference, p.reference, slope, *d_ref, grad.reference);
  }
}

}  // namespace rgan
