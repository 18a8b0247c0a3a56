#include "rgan/asm.hpp"

namespace rgan {

AsmParams AsmParams::zeros(const ModelConfig& cfg, AsmMode mode) {
  const int w = cfg.width;
  AsmParams p;
  if (mode == AsmMode::substitute) {
    for (int i = 0; i < cfg.substitute_depth; ++i) p.substitute.push_back(ResBlockParams::zeros(w));
    return p;
  }
  const std::optional<int> ratio =
      mode == AsmMode::full ? std::optional<int>(cfg.reduction_ratio) : std::nullopt;
  p.mb1 = ModulationParams::zeros(w, w, ratio);
  p.mb2 = ModulationParams::zeros(2 * w, w, ratio);
  p.fuse = ConvParams::zeros(3 * w, w);
  for (int i = 0; i < cfg.asm_resblocks; ++i) p.res.push_back(ResBlockParams::zeros(w));
  return p;
}

FeatureMap asm_substitute_forward(const FeatureMap& f_agg, std::span<const ResBlockParams> blocks, double slope,
                                  std::vector<ResBlockCache>* caches) {
  if (caches) caches->assign(blocks.size(), {});
  FeatureMap x = f_agg;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    x = residual_block_forward(x, blocks[i], slope, caches ? &(*caches)[i] : nullptr);
  }
  return x;
}

FeatureMap residual_chain_backward(const std::vector<ResBlockCache>& caches, std::span<const ResBlockParams> blocks,
                                   double slope, FeatureMap dy, std::vector<ResBlockParams>& grads) {
  for (std::size_t i = blocks.size(); i-- > 0;) dy = residual_block_backward(caches[i], blocks[i], slope, dy, grads[i]);
  return dy;
}

FeatureMap asm_forward(const FeatureMap& f_agg, const AsmParams& p, AsmMode mode, double slope, AsmCache* cache) {
  if (cache) cache->width = f_agg.channels();
  if (mode == AsmMode::substitute) {
    if (p.substitute.empty()) throw ConfigError("asm_forward: substitute mode without residual blocks");
    return asm_substitute_forward(f_agg, p.substitute, slope, cache ? &cache->res : nullptr);
  }
  const int w = f_agg.channels();
  if (p.mb1.squeeze.in_channels != w || p.mb2.squeeze.in_channels != 2 * w || p.fuse.in_channels != 3 * w) {
    throw ConfigError("asm_forward: parameters do not match input width " + std::to_string(w));
  }
  const bool attend = mode == AsmMode::full;
  FeatureMap f1 = modulation_block_forward(f_agg, p.mb1, slope, attend, cache ? &cache->mb1 : nullptr);
  FeatureMap f2 = modulation_block_forward(concat_channels({&f_agg, &f1}), p.mb2, slope, attend,
                                           cache ? &cache->mb2 : nullptr);
  FeatureMap fused = cell_forward(concat_channels({&f_agg, &f1, &f2}), p.fuse, slope, cache ? &cache->fuse : nullptr);
  return asm_substitute_forward(fused, p.res, slope, cache ? &cache->res : nullptr);
}

FeatureMap asm_backward(const AsmCache& cache, const AsmParams& p, AsmMode mode, double slope, const FeatureMap& dy,
                        AsmParams& grad) {
  if (mode == AsmMode::substitute) return residual_chain_backward(cache.res, p.substitute, slope, dy, grad.substitute);

  const int w = cache.width;
  FeatureMap d_fused = residual_chain_backward(cache.res, p.res, slope, dy, grad.res);
  const FeatureMap d_cat3 = cell_backward(cache.fuse, p.fuse, slope, d_fused, grad.fuse);
  const int thirds[3] = {w, w, w};
  std::vector<FeatureMap> d3 = split_channels(d_cat3, thirds);
  FeatureMap& d_agg = d3[0];
  FeatureMap& d_f1 = d3[1];

  const FeatureMap d_cat2 = modulation_block_backward(cache.mb2, p.mb2, slope, d3[2], grad.mb2);
  const int halves[2] = {w, w};
  std::vector<FeatureMap> d2 = split_channels(d_cat2, halves);
  d_agg += d2[0];
  d_f1 += d2[1];
  d_agg += modulation_block_backward(cache.mb1, p.mb1, slope, d_f1, grad.mb1);
  return std::move(d_agg);
}

}  // namespace rgan
