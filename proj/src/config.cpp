#include "rgan/config.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rgan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  try {
    const long long x = std::stoll(v, &used);
    if (used == v.size() && x >= std::numeric_limits<int>::min() && x <= std::numeric_limits<int>::max()) {
      return static_cast<int>(x);
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  try {
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  try {
    if (!v.empty() && v[0] != '-') {
      const unsigned long long x = std::stoull(v, &used);
      if (used == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "width",       "scale",        "sigma",       "kernel_size",  "decim_offset", "base_lr",
      "decay_factor", "decay_every", "total_epochs", "batch_size",  "clip_length",  "loss",
      "loss_eps",    "seed",         "ablation.rg", "ablation.tam", "ablation.asm_mode"};
  return keys;
}

void RunConfig::validate() const {
  model.validate();
  degradation.validate();
  train.validate();
  if (model.scale != degradation.scale) throw ConfigError("model and degradation scales differ");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "width") {
    cfg.model.width = parse_int(key, value);
  } else if (key == "scale") {
    cfg.model.scale = cfg.degradation.scale = parse_int(key, value);
    cfg.model.frm_out_channels = 3 * cfg.model.scale * cfg.model.scale;
  } else if (key == "sigma") {
    cfg.degradation.sigma = parse_double(key, value);
  } else if (key == "kernel_size") {
    cfg.degradation.kernel_size = parse_int(key, value);
  } else if (key == "decim_offset") {
    cfg.degradation.decimation_offset = parse_int(key, value);
  } else if (key == "base_lr") {
    cfg.train.base_lr = parse_double(key, value);
  } else if (key == "decay_factor") {
    cfg.train.decay_factor = parse_double(key, value);
  } else if (key == "decay_every") {
    cfg.train.decay_every = parse_int(key, value);
  } else if (key == "total_epochs") {
    cfg.train.total_epochs = parse_int(key, value);
  } else if (key == "batch_size") {
    cfg.train.batch_size = parse_int(key, value);
  } else if (key == "clip_length") {
    cfg.train.clip_length = parse_int(key, value);
  } else if (key == "loss") {
    cfg.train.loss = parse_loss_kind(value);
  } else if (key == "loss_eps") {
    cfg.train.loss_eps = parse_double(key, value);
  } else if (key == "seed") {
    cfg.train.seed = parse_u64(key, value);
  } else if (key == "ablation.rg") {
    cfg.spec.reference_group = parse_bool(key, value);
  } else if (key == "ablation.tam") {
    cfg.spec.tam = parse_bool(key, value);
  } else if (key == "ablation.asm_mode") {
    cfg.spec.asm_mode = parse_asm_mode(value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::set<std::string> seen;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path.string());
}

std::string render_config(const RunConfig& c) {
  std::ostringstream o;
  o << "width = " << c.model.width << "\n"
    << "scale = " << c.model.scale << "\n"
    << "sigma = " << fmt(c.degradation.sigma) << "\n"
    << "kernel_size = " << c.degradation.kernel_size << "\n"
    << "decim_offset = " << c.degradation.decimation_offset << "\n"
    << "base_lr = " << fmt(c.train.base_lr) << "\n"
    << "decay_factor = " << fmt(c.train.decay_factor) << "\n"
    << "decay_every = " << c.train.decay_every << "\n"
    << "total_epochs = " << c.train.total_epochs << "\n"
    << "batch_size = " << c.train.batch_size << "\n"
    << "clip_length = " << c.train.clip_length << "\n"
    << "loss = " << to_string(c.train.loss) << "\n"
    << "loss_eps = " << fmt(c.train.loss_eps) << "\n"
    << "seed = " << c.train.seed << "\n"
    << "ablation.rg = " << (c.spec.reference_group ? "true" : "false") << "\n"
    << "ablation.tam = " << (c.spec.tam ? "true" : "false") << "\n"
    << "ablation.asm_mode = " << to_string(c.spec.asm_mode) << "\n";
  return o.str();
}

}  // namespace rgan
