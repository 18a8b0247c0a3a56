#include "rgan/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rgan/image_io.hpp"
#include "rgan/metrics.hpp"

namespace rgan {

Upscaler bicubic_upscaler(int scale) {
  return [scale](const std::string&, const VideoTensor& lr) {
    VideoTensor out;
    for (const FeatureMap& f : lr) out.push_back(bicubic_resize(f, scale));
    return out;
  };
}

Upscaler model_upscaler(const RganParams& params, int tile) {
  return [&params, tile](const std::string&, const VideoTensor& lr) {
    return tile > 0 ? tiled_forward(lr, params, tile) : rgan_forward(lr, params);
  };
}

VideoTensor tiled_forward(const VideoTensor& lr, const RganParams& params, int tile, int overlap) {
  if (tile < 1 || overlap < 0) throw ConfigError("tiled_forward: tile must be positive and overlap non-negative");
  const Shape3 s = video_frame_shape(lr);
  const int r = params.config.scale;
  VideoTensor out(lr.size(), FeatureMap(3, s.height * r, s.width * r));
  for (int y0 = 0; y0 < s.height; y0 += tile) {
    const int y1 = std::min(y0 + tile, s.height);
    const int ey0 = std::max(0, y0 - overlap);
    const int ey1 = std::min(s.height, y1 + overlap);
    for (int x0 = 0; x0 < s.width; x0 += tile) {
      const int x1 = std::min(x0 + tile, s.width);
      const int ex0 = std::max(0, x0 - overlap);
      const int ex1 = std::min(s.width, x1 + overlap);
      VideoTensor piece;
      for (const FeatureMap& f : lr) piece.push_back(crop(f, ey0, ex0, ey1 - ey0, ex1 - ex0));
      const VideoTensor hr = rgan_forward(piece, params);
      for (std::size_t t = 0; t < lr.size(); ++t) {
        for (int c = 0; c < 3; ++c) {
          for (int y = y0 * r; y < y1 * r; ++y) {
            for (int x = x0 * r; x < x1 * r; ++x) {
              out[t].at(c, y, x) = hr[t].at(c, y - ey0 * r, x - ex0 * r);
            }
          }
        }
      }
    }
  }
  return out;
}

namespace {

SequenceMetrics measure_sequence(const std::string& id, const VideoTensor& gt_raw, const Upscaler& up,
                                 const EvalConfig& cfg) {
  SequenceMetrics m;
  m.id = id;
  try {
    VideoTensor gt;
    for (const FeatureMap& f : gt_raw) gt.push_back(mod_crop(f, cfg.degradation.scale));
    VideoTensor lr = degrade(gt, cfg.degradation);
    if (cfg.quantize) {
      for (FeatureMap& f : lr) f = quantize8(f);
    }
    VideoTensor sr = up(id, lr);
    if (sr.size() != gt.size()) {
      throw ContractError("upscaler returned " + std::to_string(sr.size()) + " frames for " +
                          std::to_string(gt.size()));
    }
    double psnr_sum = 0.0;
    double ssim_sum = 0.0;
    int finite = 0;
    for (std::size_t t = 0; t < gt.size(); ++t) {
      const FeatureMap out = cfg.quantize ? quantize8(sr[t]) : sr[t];
      const double p = psnr_y(out, gt[t], cfg.crop_border);
      if (std::isinf(p)) {
        ++m.infinite_frames;
      } else {
        psnr_sum += p;
        ++finite;
      }
      ssim_sum += ssim_y(out, gt[t], cfg.crop_border);
    }
    m.frames = static_cast<int>(gt.size());
    m.psnr = finite > 0 ? psnr_sum / finite : kInfinitePsnr;
    m.ssim = ssim_sum / static_cast<double>(gt.size());
  } catch (const std::exception& e) {
    m.failed = true;
    m.error = e.what();
  }
  return m;
}

MetricReport run_all(std::size_t n, const std::function<std::pair<std::string, VideoTensor>(std::size_t)>& load,
                     const Upscaler& up, const EvalConfig& cfg) {
  cfg.degradation.validate();
  std::vector<SequenceMetrics> results(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        auto [id, frames] = load(i);
        results[i] = measure_sequence(id, frames, up, cfg);
      } catch (const std::exception& e) {
        results[i].id = "#" + std::to_string(i);
        results[i].failed = true;
        results[i].error = e.what();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(n)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  MetricReport r;
  r.degradation = cfg.degradation;
  r.crop_border = cfg.crop_border;
  r.sequences = std::move(results);
  double psnr_sum = 0.0, ssim_sum = 0.0;
  int psnr_n = 0, ssim_n = 0;
  for (const SequenceMetrics& s : r.sequences) {
    if (s.failed) {
      ++r.failed_sequences;
      continue;
    }
    r.total_frames += s.frames;
    ssim_sum += s.ssim;
    ++ssim_n;
    if (std::isinf(s.psnr)) {
      ++r.infinite_sequences;
    } else {
      psnr_sum += s.psnr;
      ++psnr_n;
    }
  }
  r.mean_psnr = psnr_n > 0 ? psnr_sum / psnr_n : kInfinitePsnr;
  r.mean_ssim = ssim_n > 0 ? ssim_sum / ssim_n : 0.0;
  return r;
}

}  // namespace

MetricReport evaluate_clips(const std::vector<NamedClip>& gt, const Upscaler& up, const EvalConfig& cfg) {
  return run_all(
      gt.size(), [&](std::size_t i) { return std::pair{gt[i].id, gt[i].frames}; }, up, cfg);
}

MetricReport evaluate_dataset(const std::filesystem::path& root, const Upscaler& up, const EvalConfig& cfg) {
  const std::vector<ClipRecord> recs = scan_dataset(root, DatasetLayout::sequence_dirs);
  MetricReport r = run_all(
      recs.size(), [&](std::size_t i) { return std::pair{recs[i].id, load_clip(recs[i])}; }, up, cfg);
  r.dataset = root.string();
  return r;
}

namespace {

nlohmann::ordered_json number_or_inf(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

std::string report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["variant"] = r.variant;
  j["dataset"] = r.dataset;
  j["degradation"] = {{"sigma", r.degradation.sigma},
                      {"scale", r.degradation.scale},
                      {"kernel_size", r.degradation.kernel_size},
                      {"decimation_offset", r.degradation.decimation_offset}};
  j["crop_border"] = r.crop_border;
  j["ssim_windows"] = r.ssim_windows;
  j["mean_psnr"] = number_or_inf(r.mean_psnr);
  j["mean_ssim"] = r.mean_ssim;
  j["infinite_sequences"] = r.infinite_sequences;
  j["failed_sequences"] = r.failed_sequences;
  j["total_frames"] = r.total_frames;
  nlohmann::ordered_json seqs = nlohmann::ordered_json::array();
  for (const SequenceMetrics& s : r.sequences) {
    nlohmann::ordered_json e;
    e["id"] = s.id;
    e["frames"] = s.frames;
    e["psnr"] = number_or_inf(s.psnr);
    e["ssim"] = s.ssim;
    e["infinite_frames"] = s.infinite_frames;
    e["failed"] = s.failed;
    if (s.failed) e["error"] = s.error;
    seqs.push_back(std::move(e));
  }
  j["sequences"] = std::move(seqs);
  return j.dump(2) + "\n";
}

std::string report_table(const MetricReport& r) {
  std::ostringstream o;
  o << std::fixed;
  o << std::left << std::setw(24) << "sequence" << std::right << std::setw(8) << "frames" << std::setw(10) << "PSNR"
    << std::setw(9) << "SSIM" << "\n";
  auto psnr_text = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
  };
  for (const SequenceMetrics& s : r.sequences) {
    o << std::left << std::setw(24) << s.id << std::right;
    if (s.failed) {
      o << "  FAILED: " << s.error << "\n";
      continue;
    }
    o << std::setw(8) << s.frames << std::setw(10) << psnr_text(s.psnr) << std::setw(9) << std::setprecision(4)
      << s.ssim << "\n";
  }
  o << std::left << std::setw(24) << "mean" << std::right << std::setw(8) << r.total_frames << std::setw(10)
    << psnr_text(r.mean_psnr) << std::setw(9) << std::setprecision(4) << r.mean_ssim << "\n";
  if (r.failed_sequences > 0) o << r.failed_sequences << " sequence(s) failed\n";
  if (r.infinite_sequences > 0) o << r.infinite_sequences << " sequence(s) with infinite PSNR left out of the mean\n";
  return o.str();
}

namespace {

std::string device_descriptor() {
  std::ifstream in("/proc/cpuinfo");
  std::string model = "unknown cpu";
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", 1 thread, float64";
}

}  // namespace

BenchReport benchmark(const RganParams& params, const BenchConfig& cfg) {
  if (cfg.frames < 1) throw ContractError("benchmark: zero frames after warmup, nothing to measure");
  if (cfg.height < 1 || cfg.width < 1 || cfg.warmup < 0) throw ContractError("benchmark: bad input size or warmup");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VideoTensor lr;
  for (int t = 0; t < cfg.frames; ++t) {
    FeatureMap f(3, cfg.height, cfg.width);
    for (double& v : f.values()) v = unit(rng);
    lr.push_back(std::move(f));
  }
  for (int w = 0; w < cfg.warmup; ++w) rgan_forward(lr, params);
  FrameTimings timings;
  rgan_forward(lr, params, &timings);

  BenchReport r;
  r.height = cfg.height;
  r.width = cfg.width;
  r.warmup = cfg.warmup;
  r.device = device_descriptor();
  for (double s : timings.seconds) r.frame_ms.push_back(s * 1e3);
  std::vector<double> sorted = r.frame_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.median_ms = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  r.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  return r;
}

std::string bench_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["device"] = r.device;
  j["height"] = r.height;
  j["width"] = r.width;
  j["warmup"] = r.warmup;
  j["frames"] = r.frame_ms.size();
  j["median_ms"] = r.median_ms;
  j["p95_ms"] = r.p95_ms;
  j["frame_ms"] = r.frame_ms;
  return j.dump(2) + "\n";
}

}  // namespace rgan
