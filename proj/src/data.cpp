#include "rgan/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "rgan/image_io.hpp"

namespace rgan {

namespace fs = std::filesystem;

void DegradationConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("degradation: sigma must be positive");
  if (scale < 1) throw ConfigError("degradation: scale must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("degradation: kernel_size must be odd, got " + std::to_string(kernel_size));
  }
  if (decimation_offset < 0 || decimation_offset >= scale) {
    throw ConfigError("degradation: decimation_offset must lie in [0, scale)");
  }
}

std::vector<double> gaussian_kernel_1d(double sigma, int size) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian_kernel: sigma must be positive");
  if (size < 1 || size % 2 == 0) throw ConfigError("gaussian_kernel: size must be odd, got " + std::to_string(size));
  const int centre = size / 2;
  std::vector<double> k(size);
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - centre;
    k[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

std::vector<double> gaussian_kernel(double sigma, int size) {
  const std::vector<double> k1 = gaussian_kernel_1d(sigma, size);
  std::vector<double> k(static_cast<std::size_t>(size) * size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) k[static_cast<std::size_t>(i) * size + j] = k1[i] * k1[j];
  }
  return k;
}

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

FeatureMap gaussian_blur(const FeatureMap& image, double sigma, int size) {
  const std::vector<double> k = gaussian_kernel_1d(sigma, size);
  const int r = size / 2;
  const int h = image.height();
  const int w = image.width();
  FeatureMap tmp(image.shape());
  FeatureMap out(image.shape());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * image.at(c, y, reflect101(x + i, w));
        tmp.at(c, y, x) = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(c, reflect101(y + i, h), x);
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

FeatureMap degrade(const FeatureMap& hr, const DegradationConfig& cfg) {
  cfg.validate();
  if (hr.height() % cfg.scale != 0 || hr.width() % cfg.scale != 0) {
    throw ContractError("degrade: " + hr.shape().str() + " is not divisible by scale " + std::to_string(cfg.scale));
  }
  const FeatureMap blurred = gaussian_blur(hr, cfg.sigma, cfg.kernel_size);
  FeatureMap lr(hr.channels(), hr.height() / cfg.scale, hr.width() / cfg.scale);
  for (int c = 0; c < lr.channels(); ++c) {
    for (int y = 0; y < lr.height(); ++y) {
      for (int x = 0; x < lr.width(); ++x) {
        lr.at(c, y, x) = blurred.at(c, y * cfg.scale + cfg.decimation_offset, x * cfg.scale + cfg.decimation_offset);
      }
    }
  }
  return lr;
}

VideoTensor degrade(const VideoTensor& hr, const DegradationConfig& cfg) {
  VideoTensor lr;
  lr.reserve(hr.size());
  for (const FeatureMap& f : hr) lr.push_back(degrade(f, cfg));
  return lr;
}

FeatureMap mod_crop(const FeatureMap& image, int scale) {
  const int h = image.height() - image.height() % scale;
  const int w = image.width() - image.width() % scale;
  if (h == image.height() && w == image.width()) return image;
  return crop(image, 0, 0, h, w);
}

FrameTriple triple_at(const VideoTensor& seq, std::size_t t) {
  if (seq.empty()) throw ContractError("pad_sequence: sequence is empty");
  if (t >= seq.size()) throw ContractError("pad_sequence: index out of range");
  const std::size_t prev = t == 0 ? 0 : t - 1;
  const std::size_t next = std::min(t + 1, seq.size() - 1);
  return {seq[prev], seq[t], seq[next]};
}

std::vector<FrameTriple> pad_sequence(const VideoTensor& seq) {
  if (seq.empty()) throw ContractError("pad_sequence: sequence is empty");
  std::vector<FrameTriple> out;
  out.reserve(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) out.push_back(triple_at(seq, t));
  return out;
}

namespace {

// Digit runs compare by value, so "frame2" sorts before "frame10".
bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ei = i, ej = j;
      while (ei < a.size() && std::isdigit(static_cast<unsigned char>(a[ei]))) ++ei;
      while (ej < b.size() && std::isdigit(static_cast<unsigned char>(b[ej]))) ++ej;
      std::string na = a.substr(i, ei - i), nb = b.substr(j, ej - j);
      na.erase(0, std::min(na.find_first_not_of('0'), na.size()));
      nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size()));
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ei;
      j = ej;
      continue;
    }
    if (a[i] != b[j]) return a[i] < b[j];
    ++i;
    ++j;
  }
  if ((a.size() - i) != (b.size() - j)) return a.size() - i < b.size() - j;
  return a < b;
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return natural_less(a.filename().string(), b.filename().string());
  });
  return files;
}

void fill_resolution(ClipRecord& rec) {
  for (const fs::path& f : rec.frames) {
    const ImageSize sz = png_size(f);
    if (rec.width == 0) {
      rec.width = sz.width;
      rec.height = sz.height;
    } else if (sz.width != rec.width || sz.height != rec.height) {
      throw DataError("clip " + rec.id + ": mixed resolutions, " + f.string() + " is " + std::to_string(sz.width) +
                      "x" + std::to_string(sz.height) + " but earlier frames are " + std::to_string(rec.width) +
                      "x" + std::to_string(rec.height));
    }
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<ClipRecord> scan_dataset(const fs::path& root, DatasetLayout layout, const std::string& list_file) {
  if (!fs::is_directory(root)) throw DataError("dataset root " + root.string() + " is not a directory");
  std::vector<ClipRecord> records;

  if (layout == DatasetLayout::sequence_dirs) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const fs::path& dir : dirs) {
      ClipRecord rec;
      rec.id = dir.filename().string();
      rec.frames = sorted_pngs(dir);
      if (rec.frames.empty()) throw DataError("clip " + rec.id + ": no PNG frames in " + dir.string());
      fill_resolution(rec);
      records.push_back(std::move(rec));
    }
    return records;
  }

  const fs::path list_path = root / list_file;
  if (!fs::exists(list_path)) return records;
  std::ifstream in(list_path);
  if (!in) throw DataError("cannot read list file " + list_path.string());
  std::string line;
  std::vector<std::string> ids;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) ids.push_back(line);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (const std::string& id : ids) {
    fs::path dir = root / "sequences" / id;
    if (!fs::is_directory(dir)) dir = root / id;
    if (!fs::is_directory(dir)) throw DataError("clip " + id + ": directory not found under " + root.string());
    ClipRecord rec;
    rec.id = id;
    for (int i = 1; i <= 7; ++i) {
      const fs::path frame = dir / ("im" + std::to_string(i) + ".png");
      if (!fs::exists(frame)) throw DataError("clip " + id + ": missing frame " + frame.string());
      rec.frames.push_back(frame);
    }
    fill_resolution(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

VideoTensor load_clip(const ClipRecord& rec) {
  VideoTensor frames;
  frames.reserve(rec.frames.size());
  for (const fs::path& f : rec.frames) frames.push_back(read_png(f));
  return frames;
}

FeatureMap rotate90(const FeatureMap& image) {
  // Counter-clockwise: out[y][x] = in[x][W-1-y].
  const int h = image.height();
  const int w = image.width();
  FeatureMap out(image.channels(), w, h);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < w; ++y) {
      for (int x = 0; x < h; ++x) out.at(c, y, x) = image.at(c, x, w - 1 - y);
    }
  }
  return out;
}

FeatureMap flip_horizontal(const FeatureMap& image) {
  FeatureMap out(image.shape());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) out.at(c, y, x) = image.at(c, y, image.width() - 1 - x);
    }
  }
  return out;
}

FeatureMap flip_vertical(const FeatureMap& image) {
  FeatureMap out(image.shape());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) out.at(c, y, x) = image.at(c, image.height() - 1 - y, x);
    }
  }
  return out;
}

FeatureMap augment(const FeatureMap& image, const Augmentation& aug) {
  FeatureMap out = aug.flip_h ? flip_horizontal(image) : image;
  if (aug.flip_v) out = flip_vertical(out);
  for (int i = 0; i < ((aug.rotations % 4) + 4) % 4; ++i) out = rotate90(out);
  return out;
}

FeatureMap crop(const FeatureMap& image, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > image.height() ||
      left + width > image.width()) {
    throw ContractError("crop: box (" + std::to_string(top) + ", " + std::to_string(left) + ", " +
                        std::to_string(height) + "x" + std::to_string(width) + ") outside " + image.shape().str());
  }
  FeatureMap out(image.channels(), height, width);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < height; ++y) {
      const double* src = image.channel(c).data() + static_cast<std::size_t>(top + y) * image.width() + left;
      std::copy(src, src + width, out.channel(c).data() + static_cast<std::size_t>(y) * width);
    }
  }
  return out;
}

TrainSample make_sample(const VideoTensor& frames, const std::string& clip_id, int top, int left,
                        const Augmentation& aug, const SampleConfig& cfg) {
  const Shape3 s = video_frame_shape(frames);
  if (s.height < cfg.hr_patch || s.width < cfg.hr_patch) {
    throw DataError("clip " + clip_id + ": frames " + std::to_string(s.width) + "x" + std::to_string(s.height) +
                    " are smaller than the " + std::to_string(cfg.hr_patch) + " crop");
  }
  TrainSample sample;
  sample.clip_id = clip_id;
  sample.augmentation = aug;
  sample.crop_top = top;
  sample.crop_left = left;
  for (const FeatureMap& f : frames) {
    sample.hr.push_back(augment(crop(f, top, left, cfg.hr_patch, cfg.hr_patch), aug));
  }
  sample.lr = degrade(sample.hr, cfg.degradation);
  return sample;
}

TrainSample sample_training_clip(const VideoTensor& frames, const std::string& clip_id, const SampleConfig& cfg,
                                 std::mt19937_64& rng) {
  const Shape3 s = video_frame_shape(frames);
  if (s.height < cfg.hr_patch || s.width < cfg.hr_patch) {
    throw DataError("clip " + clip_id + ": frames " + std::to_string(s.width) + "x" + std::to_string(s.height) +
                    " are smaller than the " + std::to_string(cfg.hr_patch) + " crop");
  }
  std::uniform_int_distribution<int> top_dist(0, s.height - cfg.hr_patch);
  std::uniform_int_distribution<int> left_dist(0, s.width - cfg.hr_patch);
  const int top = top_dist(rng);
  const int left = left_dist(rng);
  Augmentation aug;
  if (cfg.augment) {
    std::uniform_int_distribution<int> rot(0, 3);
    std::uniform_int_distribution<int> coin(0, 1);
    aug.rotations = rot(rng);
    aug.flip_h = coin(rng) == 1;
    aug.flip_v = coin(rng) == 1;
  }
  return make_sample(frames, clip_id, top, left, aug, cfg);
}

TrainSample sample_training_clip(const ClipRecord& rec, const SampleConfig& cfg, std::mt19937_64& rng) {
  return sample_training_clip(load_clip(rec), rec.id, cfg, rng);
}

}  // namespace rgan
