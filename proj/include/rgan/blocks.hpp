#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rgan/tensor.hpp"

namespace rgan {

inline constexpr double kDefaultSlope = 0.1;

// Square convolution kernel (1x1 or 3x3), zero padding kernel/2, stride 1.
// weight layout is [out][in][k][k]; bias is [out].
struct ConvParams {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  std::vector<double> weight;
  std::vector<double> bias;

  static ConvParams zeros(int in_channels, int out_channels, int kernel = 3);
  std::size_t param_count() const { return weight.size() + bias.size(); }
  bool empty() const { return weight.empty(); }
  bool operator==(const ConvParams&) const = default;
};

FeatureMap conv2d(const FeatureMap& x, const ConvParams& p);

// Accumulates dL/dweight and dL/dbias into `grad` and returns dL/dx.
// When want_input_grad is false the returned map is empty.
FeatureMap conv2d_backward(const FeatureMap& x, const ConvParams& p, const FeatureMap& dy, ConvParams& grad,
                           bool want_input_grad = true);

// While installed on the calling thread, records for every (leaky) ReLU input
// whether it was positive, or with replay set, applies the recorded pattern
// instead of testing the sign. The gradient check uses it to tell which
// finite-difference probes straddled a kink and to difference them within one
// linear region.
struct ActivationTrace {
  std::vector<bool> positive;
  bool replay = false;
  std::size_t cursor = 0;
};

class ScopedActivationTrace {
 public:
  explicit ScopedActivationTrace(ActivationTrace& trace);
  ~ScopedActivationTrace();
  ScopedActivationTrace(const ScopedActivationTrace&) = delete;
  ScopedActivationTrace& operator=(const ScopedActivationTrace&) = delete;

 private:
  ActivationTrace* previous_;
};

FeatureMap leaky_relu(FeatureMap x, double slope);
// Multiplies dy by the LeakyReLU derivative, read off the activation output y.
void leaky_relu_backward_inplace(FeatureMap& dy, const FeatureMap& y, double slope);

// A cell is a 3x3 convolution followed by LeakyReLU.
struct CellCache {
  FeatureMap input;
  FeatureMap output;
};

FeatureMap cell_forward(const FeatureMap& x, const ConvParams& p, double slope, CellCache* cache = nullptr);
FeatureMap cell_backward(const CellCache& cache, const ConvParams& p, double slope, const FeatureMap& dy,
                         ConvParams& grad, bool want_input_grad = true);

// x + conv(LeakyReLU(conv(x)))
struct ResBlockParams {
  ConvParams first;
  ConvParams second;

  static ResBlockParams zeros(int channels);
  std::size_t param_count() const { return first.param_count() + second.param_count(); }
  bool operator==(const ResBlockParams&) const = default;
};

struct ResBlockCache {
  FeatureMap input;
  FeatureMap hidden;
};

FeatureMap residual_block_forward(const FeatureMap& x, const ResBlockParams& p, double slope,
                                  ResBlockCache* cache = nullptr);
FeatureMap residual_block_backward(const ResBlockCache& cache, const ResBlockParams& p, double slope,
                                   const FeatureMap& dy, ResBlockParams& grad);

// Squeeze-and-excitation style gate: global average pool, 1x1 reduce, ReLU,
// 1x1 expand, sigmoid, per-channel rescale of the input.
struct AttentionParams {
  ConvParams reduce;  // C -> C / ratio, kernel 1
  ConvParams expand;  // C / ratio -> C, kernel 1

  static AttentionParams zeros(int channels, int reduction_ratio);
  std::size_t param_count() const { return reduce.param_count() + expand.param_count(); }
  bool operator==(const AttentionParams&) const = default;
};

struct AttentionCache {
  FeatureMap input;
  std::vector<double> pooled;
  std::vector<double> hidden;
  std::vector<double> scale;
};

// Per-channel gate s in (0, 1) for input x.
std::vector<double> attention_scale(const FeatureMap& x, const AttentionParams& p, AttentionCache* cache = nullptr);
FeatureMap apply_channel_scale(const FeatureMap& x, std::span<const double> scale);
FeatureMap attention_forward(const FeatureMap& x, const AttentionParams& p, AttentionCache* cache = nullptr);
FeatureMap attention_backward(const AttentionCache& cache, const AttentionParams& p, const FeatureMap& dy,
                              AttentionParams& grad);

// 1x1 conv, LeakyReLU, 3x3 conv, LeakyReLU, optional attention gate.
struct ModulationParams {
  ConvParams squeeze;  // in -> width, kernel 1
  ConvParams conv;     // width -> width, kernel 3
  std::optional<AttentionParams> attention;

  static ModulationParams zeros(int in_channels, int width, std::optional<int> reduction_ratio);
  std::size_t param_count() const;
  bool operator==(const ModulationParams&) const = default;
};

struct ModulationCache {
  CellCache squeeze;
  CellCache conv;
  AttentionCache attention;
  bool attended = false;
};

FeatureMap modulation_block_forward(const FeatureMap& x, const ModulationParams& p, double slope,
                                    bool attention_enabled, ModulationCache* cache = nullptr);
FeatureMap modulation_block_backward(const ModulationCache& cache, const ModulationParams& p, double slope,
                                     const FeatureMap& dy, ModulationParams& grad);

// out[c, r*i + di, r*j + dj] = x[c*r*r + di*r + dj, i, j]
FeatureMap pixel_shuffle(const FeatureMap& x, int factor);
// Exact inverse of pixel_shuffle; also its adjoint.
FeatureMap pixel_unshuffle(const FeatureMap& x, int factor);

// Keys cubic kernel, a = -0.5.
double cubic_weight(double t);

// Separable bicubic interpolation, half-pixel centres, edge replication.
// Output size is round(in * scale) per axis.
FeatureMap bicubic_resize(const FeatureMap& frame, double scale);

}  // namespace rgan
