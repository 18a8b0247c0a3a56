#include "rgan/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rgan/metrics.hpp"

namespace rgan {

std::string to_string(LossKind kind) { return kind == LossKind::charbonnier ? "charbonnier" : "l1"; }

LossKind parse_loss_kind(const std::string& text) {
  if (text == "charbonnier") return LossKind::charbonnier;
  if (text == "l1") return LossKind::l1;
  throw ConfigError("unknown loss '" + text + "' (expected charbonnier or l1)");
}

void TrainConfig::validate() const {
  if (!(base_lr >= 0.0)) throw ConfigError("base_lr must be non-negative");
  if (!(decay_factor > 0.0)) throw ConfigError("decay_factor must be positive");
  if (decay_every < 1) throw ConfigError("decay_every must be at least 1");
  if (total_epochs < 1) throw ConfigError("total_epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (clip_length < 1) throw ConfigError("clip_length must be at least 1");
  if (!(loss_eps >= 0.0)) throw ConfigError("loss_eps must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam moment coefficients must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (hr_patch < 1) throw ConfigError("hr_patch must be positive");
  if (steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be non-negative");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.total_epochs) {
    throw ContractError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.total_epochs) +
                        ")");
  }
  return cfg.base_lr * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

namespace {

std::size_t check_pair(const VideoTensor& pred, const VideoTensor& target, const char* what) {
  if (pred.size() != target.size() || pred.empty()) {
    throw ContractError(std::string(what) + ": clip lengths " + std::to_string(pred.size()) + " and " +
                        std::to_string(target.size()));
  }
  std::size_t n = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    require_same_shape(pred[t], target[t], what);
    n += pred[t].size();
  }
  return n;
}

template <class F>
double elementwise_loss(const VideoTensor& pred, const VideoTensor& target, VideoTensor* grad, const char* what,
                        F&& fn) {
  const double n = static_cast<double>(check_pair(pred, target, what));
  if (grad) {
    grad->clear();
    for (const FeatureMap& p : pred) grad->emplace_back(p.shape());
  }
  // Extended accumulator keeps the sum's rounding well below what the
  // finite-difference gradient check can resolve.
  long double total = 0.0L;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double* p = pred[t].data();
    const double* q = target[t].data();
    double* g = grad ? (*grad)[t].data() : nullptr;
    for (std::size_t i = 0; i < pred[t].size(); ++i) {
      double d_value = 0.0;
      total += fn(p[i] - q[i], d_value);
      if (g) g[i] = d_value / n;
    }
  }
  return static_cast<double>(total / n);
}

}  // namespace

double charbonnier_loss(const VideoTensor& pred, const VideoTensor& target, double eps, VideoTensor* grad) {
  const double eps2 = eps * eps;
  return elementwise_loss(pred, target, grad, "charbonnier_loss", [eps2](double d, double& dd) {
    const double r = std::sqrt(d * d + eps2);
    dd = r > 0.0 ? d / r : 0.0;
    return r;
  });
}

double l1_loss(const VideoTensor& pred, const VideoTensor& target, VideoTensor* grad) {
  return elementwise_loss(pred, target, grad, "l1_loss", [](double d, double& dd) {
    dd = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    return std::abs(d);
  });
}

double training_loss(const VideoTensor& pred, const VideoTensor& target, const TrainConfig& cfg, VideoTensor* grad) {
  return cfg.loss == LossKind::charbonnier ? charbonnier_loss(pred, target, cfg.loss_eps, grad)
                                           : l1_loss(pred, target, grad);
}

AdamState make_adam_state(const RganParams& params) {
  AdamState s;
  for (const ConstParamArray& a : named_arrays(params)) {
    s.m.emplace_back(a.values->size(), 0.0);
    s.v.emplace_back(a.values->size(), 0.0);
  }
  return s;
}

void adam_update(RganParams& params, const RganParams& grad, AdamState& state, double lr, const TrainConfig& cfg) {
  std::vector<ParamArray> p = named_arrays(params);
  const std::vector<ConstParamArray> g = named_arrays(grad);
  if (p.size() != g.size() || p.size() != state.m.size() || p.size() != state.v.size()) {
    throw ContractError("adam_update: parameter, gradient and moment layouts differ");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t a = 0; a < p.size(); ++a) {
    std::vector<double>& w = *p[a].values;
    const std::vector<double>& dw = *g[a].values;
    std::vector<double>& m = state.m[a];
    std::vector<double>& v = state.v[a];
    if (dw.size() != w.size() || m.size() != w.size() || v.size() != w.size()) {
      throw ContractError("adam_update: size mismatch in " + p[a].name);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * dw[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * dw[i] * dw[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

Checkpoint start_training(const RganParams& params, const TrainConfig& cfg) {
  cfg.validate();
  Checkpoint c;
  c.params = params;
  c.optimizer = make_adam_state(params);
  c.epoch = 0;
  c.rng.seed(cfg.seed);
  c.train = cfg;
  return c;
}

namespace {

double param_norm(const RganParams& params) {
  double s = 0.0;
  for (const ConstParamArray& a : named_arrays(params)) {
    for (double v : *a.values) s += v * v;
  }
  return std::sqrt(s);
}

void scale_all(RganParams& params, double k) {
  for (ParamArray& a : named_arrays(params)) {
    for (double& v : *a.values) v *= k;
  }
}

}  // namespace

double train_step(Checkpoint& state, const std::vector<TrainSample>& batch, const TrainConfig& cfg, double lr) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  RganParams grad = state.params.zeros_like();
  double loss = 0.0;
  for (const TrainSample& s : batch) {
    ForwardCache cache;
    const VideoTensor pred = rgan_forward(s.lr, state.params, cache);
    VideoTensor d_pred;
    loss += training_loss(pred, s.hr, cfg, &d_pred);
    rgan_backward(cache, state.params, d_pred, grad);
  }
  const double k = 1.0 / static_cast<double>(batch.size());
  loss *= k;
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << state.optimizer.step << " (parameter norm " << param_norm(state.params)
        << ")";
    throw TrainingError(msg.str());
  }
  scale_all(grad, k);
  adam_update(state.params, grad, state.optimizer, lr, cfg);
  state.loss_history.push_back(loss);
  return loss;
}

void train(Checkpoint& state, const ClipSource& data, const TrainConfig& cfg, const DegradationConfig& degradation,
           int max_epochs, const TrainHooks& hooks) {
  cfg.validate();
  degradation.validate();
  if (data.size() == 0) throw DataError("train: the dataset has no clips");
  const int last = max_epochs < 0 ? cfg.total_epochs : std::min(cfg.total_epochs, state.epoch + max_epochs);
  const std::size_t n = data.size();
  const int bs = cfg.batch_size;
  const int steps = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch
                                            : std::max(1, static_cast<int>(n / static_cast<std::size_t>(bs)));
  SampleConfig sc;
  sc.hr_patch = cfg.hr_patch;
  sc.degradation = degradation;
  sc.augment = cfg.augment;

  for (int epoch = state.epoch; epoch < last; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), state.rng);
    for (int step = 0; step < steps; ++step) {
      std::vector<TrainSample> batch;
      for (int b = 0; b < bs; ++b) {
        const std::size_t idx = order[(static_cast<std::size_t>(step) * bs + b) % n];
        VideoTensor frames = data.load(idx);
        const int len = static_cast<int>(frames.size());
        if (len < cfg.clip_length) {
          throw DataError("clip " + data.id(idx) + " has " + std::to_string(len) + " frames, need " +
                          std::to_string(cfg.clip_length));
        }
        if (len > cfg.clip_length) {
          std::uniform_int_distribution<int> start(0, len - cfg.clip_length);
          const int s = start(state.rng);
          frames = VideoTensor(frames.begin() + s, frames.begin() + s + cfg.clip_length);
        }
        batch.push_back(sample_training_clip(frames, data.id(idx), sc, state.rng));
      }
      const double loss = train_step(state, batch, cfg, lr);
      if (hooks.on_step) hooks.on_step({epoch, state.optimizer.step, loss, lr});
    }
    state.epoch = epoch + 1;
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
  }
}

namespace {

double mean_psnr(const VideoTensor& pred, const VideoTensor& target) {
  double s = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    FeatureMap clamped = pred[t];
    for (double& v : clamped.values()) v = std::clamp(v, 0.0, 1.0);
    s += psnr_y(clamped, target[t]);
  }
  return s / static_cast<double>(pred.size());
}

}  // namespace

OverfitReport overfit_smoke(const VideoTensor& hr_clip, const OverfitConfig& cfg) {
  if (cfg.eval_every < 1 || cfg.max_iterations < 0) throw ConfigError("overfit_smoke: bad iteration settings");
  VideoTensor hr;
  for (const FeatureMap& f : hr_clip) hr.push_back(mod_crop(f, cfg.degradation.scale));
  TrainSample sample;
  sample.clip_id = "overfit";
  sample.hr = hr;
  sample.lr = degrade(hr, cfg.degradation);

  ModelConfig mc;
  mc.width = cfg.width;
  BuiltModel built = build_model(mc, AblationSpec{}, cfg.seed);

  TrainConfig tc;
  tc.base_lr = cfg.lr;
  tc.loss_eps = cfg.loss_eps;
  tc.seed = cfg.seed;
  Checkpoint state = start_training(built.params, tc);

  OverfitReport report;
  VideoTensor bicubic;
  for (const FeatureMap& f : sample.lr) bicubic.push_back(bicubic_resize(f, cfg.degradation.scale));
  report.bicubic_psnr = mean_psnr(bicubic, hr);
  report.model_psnr = mean_psnr(rgan_forward(sample.lr, state.params), hr);
  report.gain_db = report.model_psnr - report.bicubic_psnr;

  const std::vector<TrainSample> batch{sample};
  double best = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const double loss = train_step(state, batch, tc, cfg.lr);
    report.losses.push_back(loss);
    best = std::min(best, loss);
    report.iterations = it;
    if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
      report.best_loss.push_back(best);
      report.model_psnr = mean_psnr(rgan_forward(sample.lr, state.params), hr);
      report.gain_db = report.model_psnr - report.bicubic_psnr;
      if (report.gain_db >= cfg.target_gain_db) break;
    }
  }
  report.passed = report.gain_db >= cfg.target_gain_db;
  return report;
}

VideoTensor synthetic_clip(int frames, int height, int width, std::uint64_t seed) {
  if (frames < 1 || height < 1 || width < 1) throw ContractError("synthetic_clip: empty clip requested");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Shape {
    bool disc;
    double cy, cx, ry, rx, vy, vx;
    double color[3];
  };
  std::vector<Shape> shapes(6);
  for (Shape& s : shapes) {
    s.disc = unit(rng) < 0.5;
    s.cy = unit(rng) * height;
    s.cx = unit(rng) * width;
    s.ry = (0.08 + 0.15 * unit(rng)) * height;
    s.rx = (0.08 + 0.15 * unit(rng)) * width;
    s.vy = (unit(rng) - 0.5) * 4.0;
    s.vx = (unit(rng) - 0.5) * 4.0;
    for (double& c : s.color) c = 0.1 + 0.8 * unit(rng);
  }
  const double stripe_period = 6.0 + 6.0 * unit(rng);
  const double drift = 1.0 + unit(rng);

  VideoTensor clip;
  for (int t = 0; t < frames; ++t) {
    FeatureMap f(3, height, width);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        // Background: diagonal stripes drifting over a smooth gradient.
        const double phase = std::fmod((x + y + drift * t) / stripe_period, 1.0);
        const double stripe = phase < 0.5 ? 0.15 : 0.0;
        double px[3] = {0.2 + 0.4 * x / width + stripe, 0.3 + 0.3 * y / height + stripe, 0.5 - 0.2 * x / width};
        for (const Shape& s : shapes) {
          const double dy = (y + 0.5 - (s.cy + s.vy * t)) / s.ry;
          const double dx = (x + 0.5 - (s.cx + s.vx * t)) / s.rx;
          const bool inside = s.disc ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
          if (inside) std::copy(std::begin(s.color), std::end(s.color), px);
        }
        for (int c = 0; c < 3; ++c) f.at(c, y, x) = std::clamp(px[c], 0.0, 1.0);
      }
    }
    clip.push_back(std::move(f));
  }
  return clip;
}

}  // namespace rgan
