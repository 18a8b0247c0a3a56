#include "rgan/blocks.hpp"

// Always take the packed GEMM kernel. Eigen's coefficient-based path for small
// products peels its vector loop by address, so results would depend on where
// the allocator put a buffer.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

namespace rgan {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

std::string conv_desc(const ConvParams& p) {
  return "conv[" + std::to_string(p.out_channels) + ", " + std::to_string(p.in_channels) + ", " +
         std::to_string(p.kernel) + ", " + std::to_string(p.kernel) + "]";
}

void check_conv(const FeatureMap& x, const ConvParams& p, const char* op) {
  const std::size_t k2 = static_cast<std::size_t>(p.kernel) * p.kernel;
  if (p.weight.size() != static_cast<std::size_t>(p.out_channels) * p.in_channels * k2 ||
      p.bias.size() != static_cast<std::size_t>(p.out_channels)) {
    throw ContractError(std::string(op) + ": malformed parameters for " + conv_desc(p));
  }
  if (x.channels() != p.in_channels) {
    throw ContractError(std::string(op) + ": input " + x.shape().str() + " does not match " + conv_desc(p));
  }
}

// [C*k*k, H*W] patch matrix for a same-size convolution.
std::vector<double> im2col(const FeatureMap& x, int kernel) {
  const int h = x.height();
  const int w = x.width();
  const int pad = kernel / 2;
  const std::size_t hw = x.plane();
  std::vector<double> cols(static_cast<std::size_t>(x.channels()) * kernel * kernel * hw, 0.0);
  for (int c = 0; c < x.channels(); ++c) {
    const double* src = x.channel(c).data();
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        double* row = cols.data() + ((static_cast<std::size_t>(c) * kernel + ky) * kernel + kx) * hw;
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        if (x1 <= x0) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          std::memcpy(row + static_cast<std::size_t>(y) * w + x0, src + static_cast<std::size_t>(sy) * w + x0 + dx,
                      sizeof(double) * (x1 - x0));
        }
      }
    }
  }
  return cols;
}

void col2im_add(const std::vector<double>& cols, int kernel, FeatureMap& dx) {
  const int h = dx.height();
  const int w = dx.width();
  const int pad = kernel / 2;
  const std::size_t hw = dx.plane();
  for (int c = 0; c < dx.channels(); ++c) {
    double* dst = dx.channel(c).data();
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const double* row = cols.data() + ((static_cast<std::size_t>(c) * kernel + ky) * kernel + kx) * hw;
        const int ddx = kx - pad;
        const int x0 = std::max(0, -ddx);
        const int x1 = std::min(w, w - ddx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const double* r = row + static_cast<std::size_t>(y) * w;
          double* d = dst + static_cast<std::size_t>(sy) * w + ddx;
          for (int xx = x0; xx < x1; ++xx) d[xx] += r[xx];
        }
      }
    }
  }
}

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// y = W v + b for a 1x1 convolution applied to a single pixel vector.
std::vector<double> dense(const ConvParams& p, std::span<const double> v) {
  std::vector<double> out(p.bias);
  for (int o = 0; o < p.out_channels; ++o) {
    const double* row = p.weight.data() + static_cast<std::size_t>(o) * p.in_channels;
    double acc = 0.0;
    for (int i = 0; i < p.in_channels; ++i) acc += row[i] * v[i];
    out[o] += acc;
  }
  return out;
}

}  // namespace

ConvParams ConvParams::zeros(int in_channels, int out_channels, int kernel) {
  if (in_channels < 1 || out_channels < 1 || (kernel != 1 && kernel != 3)) {
    throw ConfigError("ConvParams: invalid geometry in=" + std::to_string(in_channels) +
                      " out=" + std::to_string(out_channels) + " kernel=" + std::to_string(kernel));
  }
  ConvParams p;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  p.kernel = kernel;
  p.weight.assign(static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel, 0.0);
  p.bias.assign(static_cast<std::size_t>(out_channels), 0.0);
  return p;
}

FeatureMap conv2d(const FeatureMap& x, const ConvParams& p) {
  check_conv(x, p, "conv2d");
  const Eigen::Index hw = static_cast<Eigen::Index>(x.plane());
  const Eigen::Index depth = static_cast<Eigen::Index>(p.in_channels) * p.kernel * p.kernel;
  FeatureMap y(p.out_channels, x.height(), x.width());
  ConstMatrixMap weight(p.weight.data(), p.out_channels, depth);
  MatrixMap out(y.data(), p.out_channels, hw);
  if (p.kernel == 1) {
    out.noalias() = weight * ConstMatrixMap(x.data(), depth, hw);
  } else {
    const std::vector<double> cols = im2col(x, p.kernel);
    out.noalias() = weight * ConstMatrixMap(cols.data(), depth, hw);
  }
  for (int o = 0; o < p.out_channels; ++o) out.row(o).array() += p.bias[o];
  return y;
}

FeatureMap conv2d_backward(const FeatureMap& x, const ConvParams& p, const FeatureMap& dy, ConvParams& grad,
                           bool want_input_grad) {
  check_conv(x, p, "conv2d_backward");
  if (dy.shape() != Shape3{p.out_channels, x.height(), x.width()}) {
    throw ContractError("conv2d_backward: upstream gradient " + dy.shape().str() + " does not match " + conv_desc(p));
  }
  if (grad.weight.size() != p.weight.size() || grad.bias.size() != p.bias.size()) {
    throw ContractError("conv2d_backward: gradient buffer does not match " + conv_desc(p));
  }
  const Eigen::Index hw = static_cast<Eigen::Index>(x.plane());
  const Eigen::Index depth = static_cast<Eigen::Index>(p.in_channels) * p.kernel * p.kernel;
  ConstMatrixMap weight(p.weight.data(), p.out_channels, depth);
  ConstMatrixMap upstream(dy.data(), p.out_channels, hw);
  MatrixMap dweight(grad.weight.data(), p.out_channels, depth);
  for (int o = 0; o < p.out_channels; ++o) {
    const double* row = dy.data() + static_cast<std::size_t>(o) * x.plane();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.plane(); ++i) acc += row[i];
    grad.bias[o] += acc;
  }

  if (p.kernel == 1) {
    dweight.noalias() += upstream * ConstMatrixMap(x.data(), depth, hw).transpose();
    if (!want_input_grad) return {};
    FeatureMap dx(x.shape());
    MatrixMap(dx.data(), depth, hw).noalias() = weight.transpose() * upstream;
    return dx;
  }
  const std::vector<double> cols = im2col(x, p.kernel);
  dweight.noalias() += upstream * ConstMatrixMap(cols.data(), depth, hw).transpose();
  if (!want_input_grad) return {};
  std::vector<double> dcols(cols.size());
  MatrixMap(dcols.data(), depth, hw).noalias() = weight.transpose() * upstream;
  FeatureMap dx(x.shape());
  col2im_add(dcols, p.kernel, dx);
  return dx;
}

namespace {
thread_local ActivationTrace* g_trace = nullptr;

bool traced_positive(double v) {
  if (!g_trace->replay) {
    g_trace->positive.push_back(v > 0.0);
    return v > 0.0;
  }
  if (g_trace->cursor >= g_trace->positive.size()) throw ContractError("activation replay ran past the trace");
  return g_trace->positive[g_trace->cursor++];
}
}  // namespace

ScopedActivationTrace::ScopedActivationTrace(ActivationTrace& trace) : previous_(g_trace) { g_trace = &trace; }
ScopedActivationTrace::~ScopedActivationTrace() { g_trace = previous_; }

FeatureMap leaky_relu(FeatureMap x, double slope) {
  if (g_trace) {
    for (double& v : x.values()) v = traced_positive(v) ? v : slope * v;
    return x;
  }
  for (double& v : x.values()) v = v > 0.0 ? v : slope * v;
  return x;
}

void leaky_relu_backward_inplace(FeatureMap& dy, const FeatureMap& y, double slope) {
  require_same_shape(dy, y, "leaky_relu_backward");
  double* d = dy.data();
  const double* o = y.data();
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (!(o[i] > 0.0)) d[i] *= slope;
  }
}

FeatureMap cell_forward(const FeatureMap& x, const ConvParams& p, double slope, CellCache* cache) {
  FeatureMap y = leaky_relu(conv2d(x, p), slope);
  if (cache) {
    cache->input = x;
    cache->output = y;
  }
  return y;
}

FeatureMap cell_backward(const CellCache& cache, const ConvParams& p, double slope, const FeatureMap& dy,
                         ConvParams& grad, bool want_input_grad) {
  FeatureMap d = dy;
  leaky_relu_backward_inplace(d, cache.output, slope);
  return conv2d_backward(cache.input, p, d, grad, want_input_grad);
}

ResBlockParams ResBlockParams::zeros(int channels) {
  return {ConvParams::zeros(channels, channels), ConvParams::zeros(channels, channels)};
}

FeatureMap residual_block_forward(const FeatureMap& x, const ResBlockParams& p, double slope, ResBlockCache* cache) {
  if (p.first.in_channels != p.second.out_channels || p.first.out_channels != p.second.in_channels) {
    throw ContractError("residual_block_forward: block does not preserve channels (" + conv_desc(p.first) + ", " +
                        conv_desc(p.second) + ")");
  }
  FeatureMap hidden = leaky_relu(conv2d(x, p.first), slope);
  FeatureMap y = conv2d(hidden, p.second);
  y += x;
  if (cache) {
    cache->input = x;
    cache->hidden = std::move(hidden);
  }
  return y;
}

FeatureMap residual_block_backward(const ResBlockCache& cache, const ResBlockParams& p, double slope,
                                   const FeatureMap& dy, ResBlockParams& grad) {
  FeatureMap dhidden = conv2d_backward(cache.hidden, p.second, dy, grad.second);
  leaky_relu_backward_inplace(dhidden, cache.hidden, slope);
  FeatureMap dx = conv2d_backward(cache.input, p.first, dhidden, grad.first);
  dx += dy;
  return dx;
}

AttentionParams AttentionParams::zeros(int channels, int reduction_ratio) {
  if (reduction_ratio < 1 || channels % reduction_ratio != 0) {
    throw ConfigError("attention: reduction ratio " + std::to_string(reduction_ratio) + " does not divide " +
                      std::to_string(channels) + " channels");
  }
  const int reduced = channels / reduction_ratio;
  return {ConvParams::zeros(channels, reduced, 1), ConvParams::zeros(reduced, channels, 1)};
}

std::vector<double> attention_scale(const FeatureMap& x, const AttentionParams& p, AttentionCache* cache) {
  if (p.reduce.kernel != 1 || p.expand.kernel != 1 || p.reduce.in_channels != x.channels() ||
      p.expand.in_channels != p.reduce.out_channels || p.expand.out_channels != x.channels()) {
    throw ContractError("attention_forward: input " + x.shape().str() + " does not match " + conv_desc(p.reduce) +
                        " / " + conv_desc(p.expand));
  }
  std::vector<double> pooled(x.channels());
  for (int c = 0; c < x.channels(); ++c) {
    double acc = 0.0;
    for (double v : x.channel(c)) acc += v;
    pooled[c] = acc / static_cast<double>(x.plane());
  }
  std::vector<double> hidden = dense(p.reduce, pooled);
  for (double& v : hidden) {
    const bool on = g_trace ? traced_positive(v) : v > 0.0;
    v = on ? v : 0.0;
  }
  std::vector<double> scale = dense(p.expand, hidden);
  for (double& v : scale) v = sigmoid(v);
  if (cache) {
    cache->input = x;
    cache->pooled = std::move(pooled);
    cache->hidden = std::move(hidden);
    cache->scale = scale;
  }
  return scale;
}

FeatureMap apply_channel_scale(const FeatureMap& x, std::span<const double> scale) {
  if (scale.size() != static_cast<std::size_t>(x.channels())) {
    throw ContractError("apply_channel_scale: " + std::to_string(scale.size()) + " scales for " + x.shape().str());
  }
  FeatureMap y = x;
  for (int c = 0; c < x.channels(); ++c) {
    for (double& v : y.channel(c)) v *= scale[c];
  }
  return y;
}

FeatureMap attention_forward(const FeatureMap& x, const AttentionParams& p, AttentionCache* cache) {
  const std::vector<double> scale = attention_scale(x, p, cache);
  return apply_channel_scale(x, scale);
}

FeatureMap attention_backward(const AttentionCache& cache, const AttentionParams& p, const FeatureMap& dy,
                              AttentionParams& grad) {
  const FeatureMap& x = cache.input;
  require_same_shape(x, dy, "attention_backward");
  const int channels = x.channels();
  FeatureMap dx = apply_channel_scale(dy, cache.scale);

  // d(loss)/d(pre-sigmoid logits)
  std::vector<double> dlogit(channels);
  for (int c = 0; c < channels; ++c) {
    double ds = 0.0;
    const auto xc = x.channel(c);
    const auto dc = dy.channel(c);
    for (std::size_t i = 0; i < xc.size(); ++i) ds += xc[i] * dc[i];
    dlogit[c] = ds * cache.scale[c] * (1.0 - cache.scale[c]);
  }
  const int reduced = p.reduce.out_channels;
  std::vector<double> dhidden(reduced, 0.0);
  for (int o = 0; o < channels; ++o) {
    grad.expand.bias[o] += dlogit[o];
    for (int i = 0; i < reduced; ++i) {
      grad.expand.weight[static_cast<std::size_t>(o) * reduced + i] += dlogit[o] * cache.hidden[i];
      dhidden[i] += p.expand.weight[static_cast<std::size_t>(o) * reduced + i] * dlogit[o];
    }
  }
  std::vector<double> dpooled(channels, 0.0);
  for (int o = 0; o < reduced; ++o) {
    if (!(cache.hidden[o] > 0.0)) continue;
    grad.reduce.bias[o] += dhidden[o];
    for (int i = 0; i < channels; ++i) {
      grad.reduce.weight[static_cast<std::size_t>(o) * channels + i] += dhidden[o] * cache.pooled[i];
      dpooled[i] += p.reduce.weight[static_cast<std::size_t>(o) * channels + i] * dhidden[o];
    }
  }
  const double inv_area = 1.0 / static_cast<double>(x.plane());
  for (int c = 0; c < channels; ++c) {
    const double g = dpooled[c] * inv_area;
    for (double& v : dx.channel(c)) v += g;
  }
  return dx;
}

ModulationParams ModulationParams::zeros(int in_channels, int width, std::optional<int> reduction_ratio) {
  ModulationParams p;
  p.squeeze = ConvParams::zeros(in_channels, width, 1);
  p.conv = ConvParams::zeros(width, width, 3);
  if (reduction_ratio) p.attention = AttentionParams::zeros(width, *reduction_ratio);
  return p;
}

std::size_t ModulationParams::param_count() const {
  return squeeze.param_count() + conv.param_count() + (attention ? attention->param_count() : 0);
}

FeatureMap modulation_block_forward(const FeatureMap& x, const ModulationParams& p, double slope,
                                    bool attention_enabled, ModulationCache* cache) {
  if (attention_enabled && !p.attention) {
    throw ConfigError("modulation_block_forward: attention requested but block has no attention parameters");
  }
  FeatureMap a = cell_forward(x, p.squeeze, slope, cache ? &cache->squeeze : nullptr);
  FeatureMap b = cell_forward(a, p.conv, slope, cache ? &cache->conv : nullptr);
  if (cache) cache->attended = attention_enabled;
  if (!attention_enabled) return b;
  return attention_forward(b, *p.attention, cache ? &cache->attention : nullptr);
}

FeatureMap modulation_block_backward(const ModulationCache& cache, const ModulationParams& p, double slope,
                                     const FeatureMap& dy, ModulationParams& grad) {
  FeatureMap d = cache.attended ? attention_backward(cache.attention, *p.attention, dy, *grad.attention) : dy;
  d = cell_backward(cache.conv, p.conv, slope, d, grad.conv);
  return cell_backward(cache.squeeze, p.squeeze, slope, d, grad.squeeze);
}

FeatureMap pixel_shuffle(const FeatureMap& x, int factor) {
  if (factor < 1 || x.channels() % (factor * factor) != 0) {
    throw ContractError("pixel_shuffle: " + std::to_string(x.channels()) + " channels not divisible by " +
                      std::to_string(factor) + "^2");
  }
  const int out_c = x.channels() / (factor * factor);
  FeatureMap y(out_c, x.height() * factor, x.width() * factor);
  for (int c = 0; c < out_c; ++c) {
    for (int di = 0; di < factor; ++di) {
      for (int dj = 0; dj < factor; ++dj) {
        const int src_c = c * factor * factor + di * factor + dj;
        for (int i = 0; i < x.height(); ++i) {
          for (int j = 0; j < x.width(); ++j) y.at(c, i * factor + di, j * factor + dj) = x.at(src_c, i, j);
        }
      }
    }
  }
  return y;
}

FeatureMap pixel_unshuffle(const FeatureMap& x, int factor) {
  if (factor < 1 || x.height() % factor != 0 || x.width() % factor != 0) {
    throw ContractError("pixel_unshuffle: " + x.shape().str() + " not divisible by factor " + std::to_string(factor));
  }
  const int in_h = x.height() / factor;
  const int in_w = x.width() / factor;
  FeatureMap y(x.channels() * factor * factor, in_h, in_w);
  for (int c = 0; c < x.channels(); ++c) {
    for (int di = 0; di < factor; ++di) {
      for (int dj = 0; dj < factor; ++dj) {
        const int dst_c = c * factor * factor + di * factor + dj;
        for (int i = 0; i < in_h; ++i) {
          for (int j = 0; j < in_w; ++j) y.at(dst_c, i, j) = x.at(c, i * factor + di, j * factor + dj);
        }
      }
    }
  }
  return y;
}

double cubic_weight(double t) {
  constexpr double a = -0.5;
  const double at = std::abs(t);
  if (at <= 1.0) return ((a + 2.0) * at - (a + 3.0)) * at * at + 1.0;
  if (at < 2.0) return ((a * at - 5.0 * a) * at + 8.0 * a) * at - 4.0 * a;
  return 0.0;
}

namespace {

struct Taps {
  int index[4];
  double weight[4];
};

std::vector<Taps> bicubic_taps(int in_size, int out_size, double scale) {
  std::vector<Taps> taps(out_size);
  for (int o = 0; o < out_size; ++o) {
    const double src = (o + 0.5) / scale - 0.5;
    const int base = static_cast<int>(std::floor(src));
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
      const int i = base - 1 + k;
      taps[o].index[k] = std::clamp(i, 0, in_size - 1);
      taps[o].weight[k] = cubic_weight(src - i);
      total += taps[o].weight[k];
    }
    for (double& w : taps[o].weight) w /= total;
  }
  return taps;
}

}  // namespace

FeatureMap bicubic_resize(const FeatureMap& frame, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("bicubic_resize: scale must be positive, got " + std::to_string(scale));
  }
  const int in_h = frame.height();
  const int in_w = frame.width();
  const int out_h = std::max(1, static_cast<int>(std::lround(in_h * scale)));
  const int out_w = std::max(1, static_cast<int>(std::lround(in_w * scale)));
  const std::vector<Taps> col_taps = bicubic_taps(in_w, out_w, scale);
  const std::vector<Taps> row_taps = bicubic_taps(in_h, out_h, scale);

  FeatureMap out(frame.channels(), out_h, out_w);
  std::vector<double> horizontal(static_cast<std::size_t>(in_h) * out_w);
  for (int c = 0; c < frame.channels(); ++c) {
    const double* src = frame.channel(c).data();
    for (int y = 0; y < in_h; ++y) {
      const double* row = src + static_cast<std::size_t>(y) * in_w;
      for (int x = 0; x < out_w; ++x) {
        const Taps& t = col_taps[x];
        horizontal[static_cast<std::size_t>(y) * out_w + x] = t.weight[0] * row[t.index[0]] +
                                                              t.weight[1] * row[t.index[1]] +
                                                              t.weight[2] * row[t.index[2]] +
                                                              t.weight[3] * row[t.index[3]];
      }
    }
    double* dst = out.channel(c).data();
    for (int y = 0; y < out_h; ++y) {
      const Taps& t = row_taps[y];
      const double* r0 = horizontal.data() + static_cast<std::size_t>(t.index[0]) * out_w;
      const double* r1 = horizontal.data() + static_cast<std::size_t>(t.index[1]) * out_w;
      const double* r2 = horizontal.data() + static_cast<std::size_t>(t.index[2]) * out_w;
      const double* r3 = horizontal.data() + static_cast<std::size_t>(t.index[3]) * out_w;
      double* d = dst + static_cast<std::size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        d[x] = t.weight[0] * r0[x] + t.weight[1] * r1[x] + t.weight[2] * r2[x] + t.weight[3] * r3[x];
      }
    }
  }
  return out;
}

}  // namespace rgan
