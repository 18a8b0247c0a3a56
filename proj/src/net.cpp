#include "rgan/net.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "rgan/data.hpp"

namespace rgan {
namespace {

template <class Direction, class Fn>
void visit_direction(Direction& d, const std::string& prefix, AsmMode mode, Fn&& fn) {
  auto& t = d.tgam;
  for (std::size_t i = 0; i < t.reference.size(); ++i) {
    fn(prefix + ".tgam.reference." + std::to_string(i), prefix + ".tgam", t.reference[i]);
  }
  for (std::size_t i = 0; i < t.fusion.size(); ++i) {
    fn(prefix + ".tgam.fusion." + std::to_string(i), prefix + ".tgam", t.fusion[i]);
  }
  if (t.tam) fn(prefix + ".tgam.tam", prefix + ".tgam", *t.tam);
  fn(prefix + ".tgam.fuse", prefix + ".tgam", t.fuse);
  fn(prefix + ".aggregate", prefix + ".aggregate", d.aggregate);

  auto& a = d.asm_block;
  const std::string asm_module = prefix + ".asm";
  if (mode == AsmMode::substitute) {
    for (std::size_t i = 0; i < a.substitute.size(); ++i) {
      const std::string base = asm_module + ".substitute." + std::to_string(i);
      fn(base + ".first", asm_module, a.substitute[i].first);
      fn(base + ".second", asm_module, a.substitute[i].second);
    }
  } else {
    auto modulation = [&](auto& mb, const std::string& base) {
      fn(base + ".squeeze", asm_module, mb.squeeze);
      fn(base + ".conv", asm_module, mb.conv);
      if (mb.attention) {
        fn(base + ".attention.reduce", asm_module, mb.attention->reduce);
        fn(base + ".attention.expand", asm_module, mb.attention->expand);
      }
    };
    modulation(a.mb1, asm_module + ".mb1");
    modulation(a.mb2, asm_module + ".mb2");
    fn(asm_module + ".fuse", asm_module, a.fuse);
    for (std::size_t i = 0; i < a.res.size(); ++i) {
      const std::string base = asm_module + ".res." + std::to_string(i);
      fn(base + ".first", asm_module, a.res[i].first);
      fn(base + ".second", asm_module, a.res[i].second);
    }
  }
  fn(prefix + ".hidden", prefix + ".state", d.hidden);
  fn(prefix + ".output", prefix + ".state", d.output);
}

template <class Params, class Fn>
void visit_convs(Params& params, Fn&& fn) {
  visit_direction(params.forward, "ffem", params.spec.asm_mode, fn);
  if (!params.config.share_directions) visit_direction(params.backward, "bfem", params.spec.asm_mode, fn);
  fn(std::string("frm.fuse"), std::string("frm"), params.frm.fuse);
  for (std::size_t i = 0; i < params.frm.res.size(); ++i) {
    const std::string base = "frm.res." + std::to_string(i);
    fn(base + ".first", std::string("frm"), params.frm.res[i].first);
    fn(base + ".second", std::string("frm"), params.frm.res[i].second);
  }
  fn(std::string("frm.out"), std::string("frm"), params.frm.out);
}

template <class Array, class Params>
std::vector<Array> collect_arrays(Params& params) {
  std::vector<Array> out;
  visit_convs(params, [&](const std::string& name, const std::string& module, auto& conv) {
    out.push_back({name + ".weight", module, {conv.out_channels, conv.in_channels, conv.kernel, conv.kernel},
                   &conv.weight});
    out.push_back({name + ".bias", module, {conv.out_channels}, &conv.bias});
  });
  return out;
}

void check_frames(const VideoTensor& lr) {
  const Shape3 s = video_frame_shape(lr);
  if (s.channels != 3) throw ContractError("rgan_forward: frames must be RGB, got " + s.str());
  for (std::size_t t = 0; t < lr.size(); ++t) {
    if (!lr[t].all_finite()) throw ContractError("rgan_forward: frame " + std::to_string(t) + " is not finite");
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

RecurrentState RecurrentState::zeros(int width, int height, int cols) {
  return {FeatureMap(width, height, cols), FeatureMap(width, height, cols)};
}

DirectionParams DirectionParams::zeros(const ModelConfig& cfg, const AblationSpec& spec) {
  const int w = cfg.width;
  DirectionParams p;
  p.tgam = TgamParams::zeros(w, spec);
  p.aggregate = ConvParams::zeros((spec.reference_group ? 4 : 3) * w, w);
  p.asm_block = AsmParams::zeros(cfg, spec.asm_mode);
  p.hidden = ConvParams::zeros(w, w);
  p.output = ConvParams::zeros(w, w);
  return p;
}

FrmParams FrmParams::zeros(const ModelConfig& cfg, const AblationSpec& spec) {
  const int w = cfg.width;
  FrmParams p;
  p.fuse = ConvParams::zeros((spec.reference_group ? 3 : 2) * w, w);
  for (int i = 0; i < cfg.frm_resblocks; ++i) p.res.push_back(ResBlockParams::zeros(w));
  p.out = ConvParams::zeros(w, cfg.frm_out_channels);
  return p;
}

RganParams RganParams::zeros(const ModelConfig& cfg, const AblationSpec& spec) {
  cfg.validate();
  RganParams p;
  p.config = cfg;
  p.spec = spec;
  p.forward = DirectionParams::zeros(cfg, spec);
  if (!cfg.share_directions) p.backward = DirectionParams::zeros(cfg, spec);
  p.frm = FrmParams::zeros(cfg, spec);
  return p;
}

std::vector<ParamArray> named_arrays(RganParams& params) { return collect_arrays<ParamArray>(params); }

std::vector<ConstParamArray> named_arrays(const RganParams& params) {
  return collect_arrays<ConstParamArray>(params);
}

ParamReport count_params(const RganParams& params) {
  ParamReport report;
  report.variant = params.spec.label();
  for (const ConstParamArray& a : named_arrays(params)) {
    if (report.modules.empty() || report.modules.back().first != a.module) report.modules.emplace_back(a.module, 0);
    report.modules.back().second += a.values->size();
    report.total += a.values->size();
  }
  return report;
}

std::string format_param_report(const ParamReport& report) {
  std::ostringstream os;
  os << "variant: " << report.variant << "\n";
  for (const auto& [module, count] : report.modules) os << "  " << module << ": " << count << "\n";
  os << "total: " << report.total << " (" << static_cast<double>(report.total) / 1e6 << "M)\n";
  return os.str();
}

BuiltModel build_model(const ModelConfig& cfg, const AblationSpec& spec, std::uint64_t seed, InitOptions opts) {
  BuiltModel model{RganParams::zeros(cfg, spec), {}};
  std::mt19937_64 rng(seed);
  const double gain = std::sqrt(2.0 / (1.0 + cfg.slope * cfg.slope));
  for (ParamArray& a : named_arrays(model.params)) {
    if (a.shape.size() != 4) continue;  // biases stay zero
    if (opts.zero_residual_output && a.name == "frm.out.weight") continue;
    const double fan_in = static_cast<double>(a.shape[1]) * a.shape[2] * a.shape[3];
    const bool residual_second = a.name.ends_with(".second.weight");
    const double k = residual_second ? opts.residual_branch_scale : 1.0;
    std::normal_distribution<double> dist(0.0, k * gain / std::sqrt(fan_in));
    for (double& v : *a.values) v = dist(rng);
  }
  model.report = count_params(model.params);
  if (cfg == ModelConfig{} && spec == AblationSpec{} && model.report.total > 1'000'000) {
    throw ConfigError("default model has " + std::to_string(model.report.total) + " parameters, budget is 1000000");
  }
  return model;
}

StepResult direction_step(const FrameTriple& triple, const RecurrentState& state, const DirectionParams& p,
                          const ModelConfig& cfg, const AblationSpec& spec, StepCache* cache) {
  const double slope = cfg.slope;
  TgamFeatures tg = tgam_forward(triple, p.tgam, spec, slope, cache ? &cache->tgam : nullptr);
  std::vector<const FeatureMap*> parts;
  if (tg.f_ref) parts.push_back(&*tg.f_ref);
  parts.push_back(&tg.f_fus);
  parts.push_back(&state.ht);
  parts.push_back(&state.out);
  const FeatureMap joined = concat_channels(parts);
  if (joined.channels() != p.aggregate.in_channels) {
    throw ConfigError("direction_step: aggregation expects " + std::to_string(p.aggregate.in_channels) +
                      " channels, got " + std::to_string(joined.channels()));
  }
  if (cache) {
    cache->aggregate_parts.clear();
    for (const FeatureMap* f : parts) cache->aggregate_parts.push_back(f->channels());
  }
  const FeatureMap agg = cell_forward(joined, p.aggregate, slope, cache ? &cache->aggregate : nullptr);
  const FeatureMap opt = asm_forward(agg, p.asm_block, spec.asm_mode, slope, cache ? &cache->asm_cache : nullptr);
  StepResult result;
  result.state.ht = cell_forward(opt, p.hidden, slope, cache ? &cache->hidden : nullptr);
  result.state.out = cell_forward(opt, p.output, slope, cache ? &cache->output : nullptr);
  result.f_ref = std::move(tg.f_ref);
  return result;
}

RecurrentState direction_step_backward(const StepCache& cache, const DirectionParams& p, const ModelConfig& cfg,
                                       const AblationSpec& spec, const RecurrentState& d_state,
                                       const FeatureMap* d_ref, DirectionParams& grad) {
  const double slope = cfg.slope;
  FeatureMap d_opt = cell_backward(cache.hidden, p.hidden, slope, d_state.ht, grad.hidden);
  d_opt += cell_backward(cache.output, p.output, slope, d_state.out, grad.output);
  const FeatureMap d_agg = asm_backward(cache.asm_cache, p.asm_block, spec.asm_mode, slope, d_opt, grad.asm_block);
  const FeatureMap d_joined = cell_backward(cache.aggregate, p.aggregate, slope, d_agg, grad.aggregate);
  std::vector<FeatureMap> d_parts = split_channels(d_joined, cache.aggregate_parts);

  const bool has_ref = spec.reference_group;
  std::size_t next = 0;
  FeatureMap d_ref_total;
  if (has_ref) {
    d_ref_total = std::move(d_parts[next++]);
    if (d_ref && !d_ref->empty()) d_ref_total += *d_ref;
  }
  const FeatureMap& d_fus = d_parts[next++];
  tgam_backward(cache.tgam, p.tgam, spec, slope, has_ref ? &d_ref_total : nullptr, d_fus, grad.tgam);
  RecurrentState d_prev;
  d_prev.ht = std::move(d_parts[next++]);
  d_prev.out = std::move(d_parts[next++]);
  return d_prev;
}

StepResult ffem_step(const FrameTriple& triple, const RecurrentState& state, const RganParams& params,
                     StepCache* cache) {
  return direction_step(triple, state, params.forward, params.config, params.spec, cache);
}

RecurrentState bfem_step(const FrameTriple& triple, const RecurrentState& state, const RganParams& params,
                         StepCache* cache) {
  return direction_step(triple, state, params.backward_direction(), params.config, params.spec, cache).state;
}

FeatureMap frm_forward(const FeatureMap& out_pre, const FeatureMap& out_post, const FeatureMap* f_ref,
                       const FrmParams& p, const ModelConfig& cfg, FrmCache* cache) {
  std::vector<const FeatureMap*> parts{&out_pre, &out_post};
  if (f_ref) parts.push_back(f_ref);
  const FeatureMap joined = concat_channels(parts);
  if (joined.channels() != p.fuse.in_channels) {
    throw ConfigError("frm_forward: fusion cell expects " + std::to_string(p.fuse.in_channels) + " channels, got " +
                      std::to_string(joined.channels()));
  }
  if (cache) {
    cache->fuse_parts.clear();
    for (const FeatureMap* f : parts) cache->fuse_parts.push_back(f->channels());
  }
  FeatureMap x = cell_forward(joined, p.fuse, cfg.slope, cache ? &cache->fuse : nullptr);
  x = asm_substitute_forward(x, p.res, cfg.slope, cache ? &cache->res : nullptr);
  if (cache) cache->projection_input = x;
  return pixel_shuffle(conv2d(x, p.out), cfg.scale);
}

FrmGradients frm_backward(const FrmCache& cache, const FrmParams& p, const ModelConfig& cfg, const FeatureMap& dy,
                          FrmParams& grad) {
  const FeatureMap d_proj = pixel_unshuffle(dy, cfg.scale);
  FeatureMap dx = conv2d_backward(cache.projection_input, p.out, d_proj, grad.out);
  dx = residual_chain_backward(cache.res, p.res, cfg.slope, std::move(dx), grad.res);
  const FeatureMap d_joined = cell_backward(cache.fuse, p.fuse, cfg.slope, dx, grad.fuse);
  std::vector<FeatureMap> parts = split_channels(d_joined, cache.fuse_parts);
  FrmGradients g;
  g.d_out_pre = std::move(parts[0]);
  g.d_out_post = std::move(parts[1]);
  if (parts.size() > 2) g.d_ref = std::move(parts[2]);
  return g;
}

BidirectionalFeatures propagate(const VideoTensor& lr, const RganParams& params, ForwardCache* cache,
                                FrameTimings* timings) {
  check_frames(lr);
  const std::size_t frames = lr.size();
  const std::vector<FrameTriple> triples = pad_sequence(lr);
  const Shape3 s = lr.front().shape();
  const int w = params.config.width;
  if (cache) {
    cache->forward.assign(frames, {});
    cache->backward.assign(frames, {});
  }
  if (timings) timings->seconds.assign(frames, 0.0);

  BidirectionalFeatures out;
  out.out_pre.resize(frames);
  out.out_post.resize(frames);
  out.f_ref.resize(frames);

  RecurrentState state = RecurrentState::zeros(w, s.height, s.width);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = std::chrono::steady_clock::now();
    StepResult r = ffem_step(triples[t], state, params, cache ? &cache->forward[t] : nullptr);
    out.out_pre[t] = r.state.out;
    out.f_ref[t] = std::move(r.f_ref);
    state = std::move(r.state);
    if (timings) timings->seconds[t] += seconds_since(start);
  }
  state = RecurrentState::zeros(w, s.height, s.width);
  for (std::size_t t = frames; t-- > 0;) {
    const auto start = std::chrono::steady_clock::now();
    state = bfem_step(triples[t], state, params, cache ? &cache->backward[t] : nullptr);
    out.out_post[t] = state.out;
    if (timings) timings->seconds[t] += seconds_since(start);
  }
  return out;
}

namespace {

VideoTensor reconstruct(const VideoTensor& lr, const RganParams& params, const BidirectionalFeatures& feats,
                        ForwardCache* cache, FrameTimings* timings) {
  VideoTensor hr(lr.size());
  if (cache) cache->frm.assign(lr.size(), {});
  for (std::size_t t = 0; t < lr.size(); ++t) {
    const auto start = std::chrono::steady_clock::now();
    const FeatureMap* ref = feats.f_ref[t] ? &*feats.f_ref[t] : nullptr;
    hr[t] = frm_forward(feats.out_pre[t], feats.out_post[t], ref, params.frm, params.config,
                        cache ? &cache->frm[t] : nullptr);
    hr[t] += bicubic_resize(lr[t], params.config.scale);
    if (timings) timings->seconds[t] += seconds_since(start);
  }
  return hr;
}

}  // namespace

VideoTensor rgan_forward(const VideoTensor& lr, const RganParams& params, FrameTimings* timings) {
  const BidirectionalFeatures feats = propagate(lr, params, nullptr, timings);
  return reconstruct(lr, params, feats, nullptr, timings);
}

VideoTensor rgan_forward(const VideoTensor& lr, const RganParams& params, ForwardCache& cache) {
  const BidirectionalFeatures feats = propagate(lr, params, &cache, nullptr);
  return reconstruct(lr, params, feats, &cache, nullptr);
}

void rgan_backward(const ForwardCache& cache, const RganParams& params, const VideoTensor& d_output,
                   RganParams& grad) {
  const std::size_t frames = cache.frm.size();
  if (d_output.size() != frames || cache.forward.size() != frames || cache.backward.size() != frames) {
    throw ContractError("rgan_backward: cache holds " + std::to_string(frames) + " frames, gradient has " +
                        std::to_string(d_output.size()));
  }
  std::vector<FrmGradients> frm_grads(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    frm_grads[t] = frm_backward(cache.frm[t], params.frm, params.config, d_output[t], grad.frm);
  }

  // Forward recurrence: gradients flow from the last step to the first.
  RecurrentState d_state;
  for (std::size_t t = frames; t-- > 0;) {
    if (d_state.out.empty()) {
      d_state.out = frm_grads[t].d_out_pre;
      d_state.ht = FeatureMap(d_state.out.shape());
    } else {
      d_state.out += frm_grads[t].d_out_pre;
    }
    d_state = direction_step_backward(cache.forward[t], params.forward, params.config, params.spec, d_state,
                                      &frm_grads[t].d_ref, grad.forward);
  }

  // Backward recurrence runs t = T-1 .. 0, so its gradients flow upward in t.
  d_state = {};
  for (std::size_t t = 0; t < frames; ++t) {
    if (d_state.out.empty()) {
      d_state.out = frm_grads[t].d_out_post;
      d_state.ht = FeatureMap(d_state.out.shape());
    } else {
      d_state.out += frm_grads[t].d_out_post;
    }
    d_state = direction_step_backward(cache.backward[t], params.backward_direction(), params.config, params.spec,
                                      d_state, nullptr, grad.backward_direction());
  }
}

}  // namespace rgan
