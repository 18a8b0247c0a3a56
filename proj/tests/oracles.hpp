#pragma once
// Brute-force reference implementations. Each one follows the textbook
// formula directly and shares no code with the library beyond the
// FeatureMap container.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "rgan/blocks.hpp"
#include "rgan/model_config.hpp"
#include "rgan/net.hpp"
#include "rgan/tensor.hpp"

namespace oracle {

using rgan::FeatureMap;

inline FeatureMap random_map(int c, int h, int w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  FeatureMap m(c, h, w);
  for (double& v : m.values()) v = d(rng);
  return m;
}

inline rgan::ConvParams random_conv(int in, int out, int k, std::mt19937_64& rng, double scale = 0.5) {
  rgan::ConvParams p = rgan::ConvParams::zeros(in, out, k);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (double& v : p.weight) v = d(rng);
  for (double& v : p.bias) v = d(rng);
  return p;
}

// Zero-padded, stride-1 "same" convolution by nested loops.
inline FeatureMap conv(const FeatureMap& x, const rgan::ConvParams& p) {
  const int k = p.kernel;
  const int pad = k / 2;
  FeatureMap y(p.out_channels, x.height(), x.width());
  for (int o = 0; o < p.out_channels; ++o) {
    for (int r = 0; r < x.height(); ++r) {
      for (int c = 0; c < x.width(); ++c) {
        double acc = p.bias[o];
        for (int i = 0; i < p.in_channels; ++i) {
          for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
              const int yy = r + dy - pad;
              const int xx = c + dx - pad;
              if (yy < 0 || yy >= x.height() || xx < 0 || xx >= x.width()) continue;
              acc += p.weight[((static_cast<std::size_t>(o) * p.in_channels + i) * k + dy) * k + dx] * x.at(i, yy, xx);
            }
          }
        }
        y.at(o, r, c) = acc;
      }
    }
  }
  return y;
}

inline FeatureMap lrelu(FeatureMap x, double slope) {
  for (double& v : x.values()) {
    if (v < 0.0) v *= slope;
  }
  return x;
}

inline FeatureMap cell(const FeatureMap& x, const rgan::ConvParams& p, double slope) { return lrelu(conv(x, p), slope); }

inline FeatureMap residual(const FeatureMap& x, const rgan::ResBlockParams& p, double slope) {
  FeatureMap y = conv(cell(x, p.first, slope), p.second);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += x.data()[i];
  return y;
}

inline std::vector<double> attention_scale(const FeatureMap& x, const rgan::AttentionParams& p) {
  const int C = x.channels();
  const int R = p.reduce.out_channels;
  std::vector<double> pooled(C, 0.0);
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < x.height(); ++y) {
      for (int w = 0; w < x.width(); ++w) pooled[c] += x.at(c, y, w);
    }
    pooled[c] /= static_cast<double>(x.height() * x.width());
  }
  std::vector<double> hidden(R);
  for (int j = 0; j < R; ++j) {
    double acc = p.reduce.bias[j];
    for (int c = 0; c < C; ++c) acc += p.reduce.weight[static_cast<std::size_t>(j) * C + c] * pooled[c];
    hidden[j] = acc > 0.0 ? acc : 0.0;
  }
  std::vector<double> s(C);
  for (int c = 0; c < C; ++c) {
    double acc = p.expand.bias[c];
    for (int j = 0; j < R; ++j) acc += p.expand.weight[static_cast<std::size_t>(c) * R + j] * hidden[j];
    s[c] = 1.0 / (1.0 + std::exp(-acc));
  }
  return s;
}

inline FeatureMap attention(const FeatureMap& x, const rgan::AttentionParams& p) {
  const std::vector<double> s = oracle::attention_scale(x, p);
  FeatureMap y = x;
  for (int c = 0; c < x.channels(); ++c) {
    for (int r = 0; r < x.height(); ++r) {
      for (int w = 0; w < x.width(); ++w) y.at(c, r, w) *= s[c];
    }
  }
  return y;
}

inline FeatureMap modulation(const FeatureMap& x, const rgan::ModulationParams& p, double slope, bool att) {
  FeatureMap y = cell(cell(x, p.squeeze, slope), p.conv, slope);
  return att ? attention(y, *p.attention) : y;
}

struct Tam {
  FeatureMap features;  // [w - 3, H, W]
  FeatureMap weights;   // [3, H, W]
};

// raw has 3 slots of w/3 channels; slot k's first channel is its logit.
inline Tam tam_gate(const FeatureMap& raw) {
  const int s = raw.channels() / 3;
  Tam t{FeatureMap(raw.channels() - 3, raw.height(), raw.width()), FeatureMap(3, raw.height(), raw.width())};
  for (int y = 0; y < raw.height(); ++y) {
    for (int x = 0; x < raw.width(); ++x) {
      double e[3];
      double sum = 0.0;
      for (int k = 0; k < 3; ++k) sum += e[k] = std::exp(raw.at(k * s, y, x));
      for (int k = 0; k < 3; ++k) {
        const double wk = e[k] / sum;
        t.weights.at(k, y, x) = wk;
        for (int j = 1; j < s; ++j) t.features.at(k * (s - 1) + j - 1, y, x) = wk * raw.at(k * s + j, y, x);
      }
    }
  }
  return t;
}

inline FeatureMap shuffle(const FeatureMap& x, int r) {
  const int C = x.channels() / (r * r);
  FeatureMap y(C, x.height() * r, x.width() * r);
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < x.height(); ++i) {
      for (int j = 0; j < x.width(); ++j) {
        for (int di = 0; di < r; ++di) {
          for (int dj = 0; dj < r; ++dj) y.at(c, r * i + di, r * j + dj) = x.at(c * r * r + di * r + dj, i, j);
        }
      }
    }
  }
  return y;
}

inline double keys_cubic(double t) {
  // Keys kernel, a = -0.5, written out in expanded polynomial form.
  t = std::abs(t);
  if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
  if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
  return 0.0;
}

// Per-pixel kernel sum over every input sample (indices clamped).
inline FeatureMap bicubic(const FeatureMap& in, int scale) {
  const int H = in.height() * scale;
  const int W = in.width() * scale;
  FeatureMap out(in.channels(), H, W);
  for (int c = 0; c < in.channels(); ++c) {
    for (int Y = 0; Y < H; ++Y) {
      const double sy = (Y + 0.5) / scale - 0.5;
      for (int X = 0; X < W; ++X) {
        const double sx = (X + 0.5) / scale - 0.5;
        double acc = 0.0, norm = 0.0;
        for (int i = -4; i < in.height() + 4; ++i) {
          const double wy = keys_cubic(sy - i);
          if (wy == 0.0) continue;
          for (int j = -4; j < in.width() + 4; ++j) {
            const double wx = keys_cubic(sx - j);
            if (wx == 0.0) continue;
            const int ci = std::clamp(i, 0, in.height() - 1);
            const int cj = std::clamp(j, 0, in.width() - 1);
            acc += wy * wx * in.at(c, ci, cj);
            norm += wy * wx;
          }
        }
        out.at(c, Y, X) = acc / norm;
      }
    }
  }
  return out;
}

// Direct 2-D evaluation in long double, normalised.
inline std::vector<double> gaussian2d(double sigma, int size) {
  const int c = size / 2;
  std::vector<long double> raw(static_cast<std::size_t>(size) * size);
  long double total = 0.0L;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const long double d2 = static_cast<long double>((i - c) * (i - c) + (j - c) * (j - c));
      total += raw[static_cast<std::size_t>(i) * size + j] = std::exp(-d2 / (2.0L * sigma * sigma));
    }
  }
  std::vector<double> k(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) k[i] = static_cast<double>(raw[i] / total);
  return k;
}

// Mirror without repeating the edge sample: -1 -> 1, n -> n - 2.
inline int mirror(int i, int n) {
  const int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

inline FeatureMap blur(const FeatureMap& img, double sigma, int size) {
  const std::vector<double> k = gaussian2d(sigma, size);
  const int r = size / 2;
  FeatureMap out(img.shape());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          for (int j = -r; j <= r; ++j) {
            acc += k[static_cast<std::size_t>(i + r) * size + (j + r)] *
                   img.at(c, mirror(y + i, img.height()), mirror(x + j, img.width()));
          }
        }
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

inline FeatureMap degrade(const FeatureMap& hr, double sigma, int size, int scale, int offset) {
  const FeatureMap b = blur(hr, sigma, size);
  FeatureMap lr(hr.channels(), hr.height() / scale, hr.width() / scale);
  for (int c = 0; c < lr.channels(); ++c) {
    for (int y = 0; y < lr.height(); ++y) {
      for (int x = 0; x < lr.width(); ++x) lr.at(c, y, x) = b.at(c, offset + scale * y, offset + scale * x);
    }
  }
  return lr;
}

inline double luma(double r, double g, double b) { return 16.0 + 65.481 * r + 128.553 * g + 24.966 * b; }

inline double psnr_y(const FeatureMap& a, const FeatureMap& b) {
  double se = 0.0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const double d = luma(a.at(0, y, x), a.at(1, y, x), a.at(2, y, x)) - luma(b.at(0, y, x), b.at(1, y, x), b.at(2, y, x));
      se += d * d;
    }
  }
  return 10.0 * std::log10(255.0 * 255.0 / (se / (a.height() * a.width())));
}

// Sliding 11x11 window, computed window by window.
inline double ssim_y(const FeatureMap& a, const FeatureMap& b) {
  const std::vector<double> k = gaussian2d(1.5, 11);
  const int H = a.height(), W = a.width();
  std::vector<double> ya(static_cast<std::size_t>(H) * W), yb(ya.size());
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      ya[static_cast<std::size_t>(y) * W + x] = luma(a.at(0, y, x), a.at(1, y, x), a.at(2, y, x));
      yb[static_cast<std::size_t>(y) * W + x] = luma(b.at(0, y, x), b.at(1, y, x), b.at(2, y, x));
    }
  }
  const double C1 = std::pow(0.01 * 255.0, 2), C2 = std::pow(0.03 * 255.0, 2);
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + 11 <= H; ++y) {
    for (int x = 0; x + 11 <= W; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          const double w = k[static_cast<std::size_t>(i) * 11 + j];
          const double va = ya[static_cast<std::size_t>(y + i) * W + x + j];
          const double vb = yb[static_cast<std::size_t>(y + i) * W + x + j];
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
      ++count;
    }
  }
  return total / count;
}

// Parameter total recomputed from the architecture description alone.
inline std::size_t param_count(const rgan::ModelConfig& m, const rgan::AblationSpec& s) {
  auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; };
  const std::size_t w = m.width;
  const std::size_t res = 2 * conv(w, w, 3);
  std::size_t dir = 0;
  if (s.reference_group) dir += conv(3, w, 3) + 3 * conv(w, w, 3);
  dir += conv(9, w, 3) + 3 * conv(w, w, 3);
  if (s.tam) dir += conv(w, w, 3);
  dir += conv(s.tam ? 2 * w - 3 : w, w, 3);
  dir += conv((s.reference_group ? 4 : 3) * w, w, 3);
  if (s.asm_mode == rgan::AsmMode::substitute) {
    dir += m.substitute_depth * res;
  } else {
    const bool att = s.asm_mode == rgan::AsmMode::full;
    const std::size_t r = w / m.reduction_ratio;
    auto mb = [&](std::size_t in) {
      return conv(in, w, 1) + conv(w, w, 3) + (att ? conv(w, r, 1) + conv(r, w, 1) : 0);
    };
    dir += mb(w) + mb(2 * w) + conv(3 * w, w, 3) + m.asm_resblocks * res;
  }
  dir += 2 * conv(w, w, 3);
  const std::size_t frm = conv((s.reference_group ? 3 : 2) * w, w, 3) + m.frm_resblocks * res + conv(w, m.frm_out_channels, 3);
  return (m.share_directions ? 1 : 2) * dir + frm;
}

// Module compositions built from the primitives above.

inline FeatureMap join(const std::vector<const FeatureMap*>& parts) {
  int c = 0;
  for (const FeatureMap* f : parts) c += f->channels();
  FeatureMap out(c, parts.front()->height(), parts.front()->width());
  int base = 0;
  for (const FeatureMap* f : parts) {
    for (int k = 0; k < f->channels(); ++k) {
      for (int y = 0; y < f->height(); ++y) {
        for (int x = 0; x < f->width(); ++x) out.at(base + k, y, x) = f->at(k, y, x);
      }
    }
    base += f->channels();
  }
  return out;
}

inline FeatureMap chain(FeatureMap x, const std::vector<rgan::ConvParams>& cells, double slope) {
  for (const auto& c : cells) x = cell(x, c, slope);
  return x;
}

inline FeatureMap res_chain(FeatureMap x, const std::vector<rgan::ResBlockParams>& blocks, double slope) {
  for (const auto& b : blocks) x = residual(x, b, slope);
  return x;
}

struct TgamOut {
  std::optional<FeatureMap> f_ref;
  FeatureMap f_fus;
};

inline TgamOut tgam(const rgan::FrameTriple& t, const rgan::TgamParams& p, const rgan::AblationSpec& s, double slope) {
  TgamOut o;
  if (s.reference_group) o.f_ref = chain(t.ref, p.reference, slope);
  const FeatureMap pre = chain(join({&t.prev, &t.ref, &t.next}), p.fusion, slope);
  if (s.tam) {
    const Tam a = tam_gate(cell(pre, *p.tam, slope));
    o.f_fus = cell(join({&pre, &a.features}), p.fuse, slope);
  } else {
    o.f_fus = cell(pre, p.fuse, slope);
  }
  return o;
}

inline FeatureMap asm_block(const FeatureMap& x, const rgan::AsmParams& p, rgan::AsmMode mode, double slope) {
  if (mode == rgan::AsmMode::substitute) return res_chain(x, p.substitute, slope);
  const bool att = mode == rgan::AsmMode::full;
  const FeatureMap f1 = modulation(x, p.mb1, slope, att);
  const FeatureMap f2 = modulation(join({&x, &f1}), p.mb2, slope, att);
  return res_chain(cell(join({&x, &f1, &f2}), p.fuse, slope), p.res, slope);
}

struct Step {
  FeatureMap ht, out;
  std::optional<FeatureMap> f_ref;
};

inline Step direction(const rgan::FrameTriple& t, const FeatureMap& ht, const FeatureMap& out,
                      const rgan::DirectionParams& p, const rgan::ModelConfig& m, const rgan::AblationSpec& s) {
  TgamOut g = tgam(t, p.tgam, s, m.slope);
  std::vector<const FeatureMap*> parts;
  if (g.f_ref) parts.push_back(&*g.f_ref);
  parts.push_back(&g.f_fus);
  parts.push_back(&ht);
  parts.push_back(&out);
  const FeatureMap opt = asm_block(cell(join(parts), p.aggregate, m.slope), p.asm_block, s.asm_mode, m.slope);
  return {cell(opt, p.hidden, m.slope), cell(opt, p.output, m.slope), std::move(g.f_ref)};
}

inline FeatureMap frm(const FeatureMap& pre, const FeatureMap& post, const FeatureMap* ref, const rgan::FrmParams& p,
                      const rgan::ModelConfig& m) {
  std::vector<const FeatureMap*> parts{&pre, &post};
  if (ref) parts.push_back(ref);
  const FeatureMap x = res_chain(cell(join(parts), p.fuse, m.slope), p.res, m.slope);
  return shuffle(conv(x, p.out), m.scale);
}

inline std::vector<FeatureMap> network(const std::vector<FeatureMap>& lr, const rgan::RganParams& p) {
  const auto& m = p.config;
  const std::size_t T = lr.size();
  auto triple = [&](std::size_t t) {
    return rgan::FrameTriple{lr[t == 0 ? 0 : t - 1], lr[t], lr[std::min(t + 1, T - 1)]};
  };
  const int H = lr[0].height(), W = lr[0].width();
  std::vector<FeatureMap> pre(T), post(T);
  std::vector<std::optional<FeatureMap>> refs(T);
  FeatureMap ht(m.width, H, W), out(m.width, H, W);
  for (std::size_t t = 0; t < T; ++t) {
    Step s = direction(triple(t), ht, out, p.forward, m, p.spec);
    ht = s.ht;
    out = pre[t] = s.out;
    refs[t] = std::move(s.f_ref);
  }
  ht = FeatureMap(m.width, H, W);
  out = FeatureMap(m.width, H, W);
  for (std::size_t t = T; t-- > 0;) {
    Step s = direction(triple(t), ht, out, p.backward_direction(), m, p.spec);
    ht = s.ht;
    out = post[t] = s.out;
  }
  std::vector<FeatureMap> hr(T);
  for (std::size_t t = 0; t < T; ++t) {
    hr[t] = frm(pre[t], post[t], refs[t] ? &*refs[t] : nullptr, p.frm, m);
    const FeatureMap up = bicubic(lr[t], m.scale);
    for (std::size_t i = 0; i < up.size(); ++i) hr[t].data()[i] += up.data()[i];
  }
  return hr;
}

// Largest elementwise difference relative to the oracle's largest magnitude.
inline double rel_diff(const FeatureMap& got, const FeatureMap& want) {
  if (got.shape() != want.shape()) return std::numeric_limits<double>::infinity();
  double diff = 0.0, scale = 1e-300;
  for (std::size_t i = 0; i < got.size(); ++i) {
    diff = std::max(diff, std::abs(got.data()[i] - want.data()[i]));
    scale = std::max(scale, std::abs(want.data()[i]));
  }
  return diff / scale;
}

}  // namespace oracle
