#include "rgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rgan/train.hpp"

namespace rgan {

GradCheckReport grad_check(const GradCheckConfig& cfg) {
  ModelConfig mc;
  mc.width = cfg.width;
  mc.reduction_ratio = 3;
  mc.slope = cfg.slope;
  InitOptions init;
  init.zero_residual_output = false;
  RganParams params = build_model(mc, cfg.spec, cfg.seed, init).params;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VideoTensor lr, hr;
  for (int t = 0; t < cfg.frames; ++t) {
    FeatureMap a(3, cfg.size, cfg.size);
    for (double& v : a.values()) v = unit(rng);
    lr.push_back(std::move(a));
    FeatureMap b(3, cfg.size * mc.scale, cfg.size * mc.scale);
    for (double& v : b.values()) v = unit(rng);
    hr.push_back(std::move(b));
  }
  auto loss_of = [&](const RganParams& p, ActivationTrace& trace) {
    ScopedActivationTrace scope(trace);
    return charbonnier_loss(rgan_forward(lr, p), hr, cfg.loss_eps);
  };
  ActivationTrace base;
  loss_of(params, base);

  RganParams analytic = params.zeros_like();
  {
    ForwardCache cache;
    const VideoTensor pred = rgan_forward(lr, params, cache);
    VideoTensor d_pred;
    charbonnier_loss(pred, hr, cfg.loss_eps, &d_pred);
    rgan_backward(cache, params, d_pred, analytic);
  }

  std::vector<ParamArray> arrays = named_arrays(params);
  const std::vector<ConstParamArray> grads = named_arrays(static_cast<const RganParams&>(analytic));
  int per_array = std::max(1, cfg.samples_per_array);
  while (per_array * static_cast<int>(arrays.size()) < cfg.min_samples) ++per_array;

  GradCheckReport report;
  report.variant = cfg.spec.label();
  for (std::size_t a = 0; a < arrays.size(); ++a) {
    std::vector<double>& values = *arrays[a].values;
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    ArrayCheck check{arrays[a].name, 0, 0, 0.0};
    for (int s = 0; s < per_array; ++s) {
      const std::size_t i = pick(rng);
      const double exact = (*grads[a].values)[i];
      auto difference = [&](bool frozen) {
        const double original = values[i];
        ActivationTrace t_up, t_down;
        if (frozen) {
          t_up = base;
          t_up.replay = true;
          t_down = t_up;
        }
        values[i] = original + cfg.step;
        const double up = loss_of(params, t_up);
        values[i] = original - cfg.step;
        const double down = loss_of(params, t_down);
        values[i] = original;
        const double numeric = (up - down) / (2.0 * cfg.step);
        const double denom = std::max({std::abs(numeric), std::abs(exact), cfg.floor});
        const bool kinked = !frozen && (t_up.positive != base.positive || t_down.positive != base.positive);
        return std::pair{std::abs(numeric - exact) / denom, kinked};
      };
      auto [err, kinked] = difference(false);
      if (kinked) {
        err = difference(true).first;
        ++check.kinked;
      }
      check.max_rel_error = std::max(check.max_rel_error, err);
      ++check.samples;
      ++report.samples;
    }
    if (check.max_rel_error > report.max_rel_error) {
      report.max_rel_error = check.max_rel_error;
      report.worst_array = check.name;
    }
    report.kinked += check.kinked;
    if (check.max_rel_error > cfg.tolerance) report.failures.push_back(check.name);
    report.arrays.push_back(std::move(check));
  }
  report.passed = report.failures.empty() && report.samples >= cfg.min_samples;
  return report;
}

}  // namespace rgan
