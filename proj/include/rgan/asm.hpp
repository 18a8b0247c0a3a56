#pragma once

#include <vector>

#include "rgan/blocks.hpp"
#include "rgan/model_config.hpp"

namespace rgan {

// Dense modulation blocks followed by a fusing cell and residual refinement.
// For the RGAN-N ablation only `substitute` is populated.
struct AsmParams {
  ModulationParams mb1;  // width -> width
  ModulationParams mb2;  // 2 * width -> width
  ConvParams fuse;       // 3 * width -> width
  std::vector<ResBlockParams> res;
  std::vector<ResBlockParams> substitute;

  static AsmParams zeros(const ModelConfig& cfg, AsmMode mode);
  bool operator==(const AsmParams&) const = default;
};

struct AsmCache {
  ModulationCache mb1;
  ModulationCache mb2;
  CellCache fuse;
  std::vector<ResBlockCache> res;
  int width = 0;
};

FeatureMap asm_forward(const FeatureMap& f_agg, const AsmParams& p, AsmMode mode, double slope,
                       AsmCache* cache = nullptr);
FeatureMap asm_backward(const AsmCache& cache, const AsmParams& p, AsmMode mode, double slope, const FeatureMap& dy,
                        AsmParams& grad);

// Plain chain of residual blocks.
FeatureMap asm_substitute_forward(const FeatureMap& f_agg, std::span<const ResBlockParams> blocks, double slope,
                                  std::vector<ResBlockCache>* caches = nullptr);
FeatureMap residual_chain_backward(const std::vector<ResBlockCache>& caches, std::span<const ResBlockParams> blocks,
                                   double slope, FeatureMap dy, std::vector<ResBlockParams>& grads);

}  // namespace rgan
