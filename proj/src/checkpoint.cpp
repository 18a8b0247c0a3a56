#include "rgan/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace rgan {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); }
void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); }
void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}
void put_doubles(std::string& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void raw(void* dst, std::size_t n, const std::string& field) {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated while reading " + field);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const std::string& field) {
    std::uint32_t v;
    raw(&v, sizeof v, field);
    return v;
  }
  std::uint64_t u64(const std::string& field) {
    std::uint64_t v;
    raw(&v, sizeof v, field);
    return v;
  }
  std::string str(const std::string& field) {
    const std::uint64_t n = u64(field);
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated while reading " + field);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(const std::string& field, std::size_t expected) {
    const std::uint64_t n = u64(field);
    if (n != expected) {
      throw DataError("checkpoint: " + field + " has " + std::to_string(n) + " values, expected " +
                      std::to_string(expected));
    }
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double), field);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

using Fields = std::map<std::string, std::string>;

const std::string& field(const Fields& f, const std::string& key) {
  auto it = f.find(key);
  if (it == f.end()) throw DataError("checkpoint: missing field " + key);
  return it->second;
}

int int_field(const Fields& f, const std::string& key) {
  const std::string& s = field(f, key);
  std::size_t used = 0;
  try {
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return static_cast<int>(v);
  } catch (const std::exception&) {
  }
  throw DataError("checkpoint: field " + key + " is not an integer: '" + s + "'");
}

std::uint64_t u64_field(const Fields& f, const std::string& key) {
  const std::string& s = field(f, key);
  std::size_t used = 0;
  try {
    const unsigned long long v = std::stoull(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError("checkpoint: field " + key + " is not an unsigned integer: '" + s + "'");
}

double double_field(const Fields& f, const std::string& key) {
  const std::string& s = field(f, key);
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError("checkpoint: field " + key + " is not a number: '" + s + "'");
}

bool bool_field(const Fields& f, const std::string& key) {
  const std::string& s = field(f, key);
  if (s == "true") return true;
  if (s == "false") return false;
  throw DataError("checkpoint: field " + key + " is not a boolean: '" + s + "'");
}

}  // namespace

std::string config_echo(const ModelConfig& m, const AblationSpec& s, const TrainConfig& t) {
  std::ostringstream o;
  o << "model.width=" << m.width << "\n"
    << "model.scale=" << m.scale << "\n"
    << "model.frm_out_channels=" << m.frm_out_channels << "\n"
    << "model.frm_resblocks=" << m.frm_resblocks << "\n"
    << "model.asm_resblocks=" << m.asm_resblocks << "\n"
    << "model.substitute_depth=" << m.substitute_depth << "\n"
    << "model.slope=" << fmt_double(m.slope) << "\n"
    << "model.reduction_ratio=" << m.reduction_ratio << "\n"
    << "model.share_directions=" << fmt_bool(m.share_directions) << "\n"
    << "ablation.rg=" << fmt_bool(s.reference_group) << "\n"
    << "ablation.tam=" << fmt_bool(s.tam) << "\n"
    << "ablation.asm_mode=" << to_string(s.asm_mode) << "\n"
    << "train.base_lr=" << fmt_double(t.base_lr) << "\n"
    << "train.decay_factor=" << fmt_double(t.decay_factor) << "\n"
    << "train.decay_every=" << t.decay_every << "\n"
    << "train.total_epochs=" << t.total_epochs << "\n"
    << "train.batch_size=" << t.batch_size << "\n"
    << "train.clip_length=" << t.clip_length << "\n"
    << "train.loss=" << to_string(t.loss) << "\n"
    << "train.loss_eps=" << fmt_double(t.loss_eps) << "\n"
    << "train.beta1=" << fmt_double(t.beta1) << "\n"
    << "train.beta2=" << fmt_double(t.beta2) << "\n"
    << "train.adam_eps=" << fmt_double(t.adam_eps) << "\n"
    << "train.seed=" << t.seed << "\n"
    << "train.hr_patch=" << t.hr_patch << "\n"
    << "train.steps_per_epoch=" << t.steps_per_epoch << "\n"
    << "train.augment=" << fmt_bool(t.augment) << "\n";
  return o.str();
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);

  std::ostringstream rng;
  rng << ckpt.rng;
  std::string header = config_echo(ckpt.params.config, ckpt.params.spec, ckpt.train);
  header += "epoch=" + std::to_string(ckpt.epoch) + "\n";
  header += "rng=" + rng.str() + "\n";
  put_str(out, header);

  const std::vector<ConstParamArray> arrays = named_arrays(ckpt.params);
  if (ckpt.optimizer.m.size() != arrays.size() || ckpt.optimizer.v.size() != arrays.size()) {
    throw ContractError("serialize_checkpoint: optimizer state does not match the parameter layout");
  }
  put_u64(out, arrays.size());
  for (const ConstParamArray& a : arrays) {
    put_str(out, a.name);
    put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
    for (int d : a.shape) put_u32(out, static_cast<std::uint32_t>(d));
    put_doubles(out, *a.values);
  }
  put_u64(out, static_cast<std::uint64_t>(ckpt.optimizer.step));
  for (const auto& m : ckpt.optimizer.m) put_doubles(out, m);
  for (const auto& v : ckpt.optimizer.v) put_doubles(out, v);
  put_doubles(out, ckpt.loss_history);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  char magic[sizeof kCheckpointMagic];
  in.raw(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw DataError("checkpoint: bad magic");
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }

  Fields f;
  std::istringstream header(in.str("header"));
  for (std::string line; std::getline(header, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint: malformed header line '" + line + "'");
    f[line.substr(0, eq)] = line.substr(eq + 1);
  }

  ModelConfig m;
  m.width = int_field(f, "model.width");
  m.scale = int_field(f, "model.scale");
  m.frm_out_channels = int_field(f, "model.frm_out_channels");
  m.frm_resblocks = int_field(f, "model.frm_resblocks");
  m.asm_resblocks = int_field(f, "model.asm_resblocks");
  m.substitute_depth = int_field(f, "model.substitute_depth");
  m.slope = double_field(f, "model.slope");
  m.reduction_ratio = int_field(f, "model.reduction_ratio");
  m.share_directions = bool_field(f, "model.share_directions");
  AblationSpec s;
  s.reference_group = bool_field(f, "ablation.rg");
  s.tam = bool_field(f, "ablation.tam");
  try {
    s.asm_mode = parse_asm_mode(field(f, "ablation.asm_mode"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: field ablation.asm_mode: ") + e.what());
  }
  TrainConfig t;
  t.base_lr = double_field(f, "train.base_lr");
  t.decay_factor = double_field(f, "train.decay_factor");
  t.decay_every = int_field(f, "train.decay_every");
  t.total_epochs = int_field(f, "train.total_epochs");
  t.batch_size = int_field(f, "train.batch_size");
  t.clip_length = int_field(f, "train.clip_length");
  try {
    t.loss = parse_loss_kind(field(f, "train.loss"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: field train.loss: ") + e.what());
  }
  t.loss_eps = double_field(f, "train.loss_eps");
  t.beta1 = double_field(f, "train.beta1");
  t.beta2 = double_field(f, "train.beta2");
  t.adam_eps = double_field(f, "train.adam_eps");
  t.seed = u64_field(f, "train.seed");
  t.hr_patch = int_field(f, "train.hr_patch");
  t.steps_per_epoch = int_field(f, "train.steps_per_epoch");
  t.augment = bool_field(f, "train.augment");

  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: model config invalid: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.params = RganParams::zeros(m, s);
  ckpt.train = t;
  ckpt.epoch = int_field(f, "epoch");
  std::istringstream rng(field(f, "rng"));
  rng >> ckpt.rng;
  if (rng.fail()) throw DataError("checkpoint: field rng is malformed");

  std::vector<ParamArray> arrays = named_arrays(ckpt.params);
  const std::uint64_t count = in.u64("array count");
  if (count != arrays.size()) {
    throw DataError("checkpoint: " + std::to_string(count) + " parameter arrays, the configuration implies " +
                    std::to_string(arrays.size()));
  }
  for (ParamArray& a : arrays) {
    const std::string name = in.str("array name");
    if (name != a.name) throw DataError("checkpoint: expected array " + a.name + ", found " + name);
    const std::uint32_t rank = in.u32(name + " rank");
    std::vector<int> shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<int>(in.u32(name + " shape")));
    if (shape != a.shape) throw DataError("checkpoint: array " + name + " has the wrong shape");
    *a.values = in.doubles(name, a.values->size());
  }
  ckpt.optimizer.step = static_cast<std::int64_t>(in.u64("optimizer.step"));
  for (const ParamArray& a : arrays) ckpt.optimizer.m.push_back(in.doubles("optimizer.m." + a.name, a.values->size()));
  for (const ParamArray& a : arrays) ckpt.optimizer.v.push_back(in.doubles("optimizer.v." + a.name, a.values->size()));
  const std::uint64_t n_loss = in.u64("loss_history");
  ckpt.loss_history.resize(n_loss);
  in.raw(ckpt.loss_history.data(), n_loss * sizeof(double), "loss_history");
  if (!in.done()) throw DataError("checkpoint: trailing bytes after loss_history");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_checkpoint(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& em, const AblationSpec& es) {
  Checkpoint ckpt = load_checkpoint(path);
  const ModelConfig& m = ckpt.params.config;
  const AblationSpec& s = ckpt.params.spec;
  auto reject = [&](const std::string& key, const std::string& got, const std::string& want) {
    throw ConfigError(path.string() + ": checkpoint " + key + "=" + got + " does not match expected " + want);
  };
  if (m.width != em.width) reject("model.width", std::to_string(m.width), std::to_string(em.width));
  if (m.scale != em.scale) reject("model.scale", std::to_string(m.scale), std::to_string(em.scale));
  if (m.frm_out_channels != em.frm_out_channels) {
    reject("model.frm_out_channels", std::to_string(m.frm_out_channels), std::to_string(em.frm_out_channels));
  }
  if (m.frm_resblocks != em.frm_resblocks) {
    reject("model.frm_resblocks", std::to_string(m.frm_resblocks), std::to_string(em.frm_resblocks));
  }
  if (m.asm_resblocks != em.asm_resblocks) {
    reject("model.asm_resblocks", std::to_string(m.asm_resblocks), std::to_string(em.asm_resblocks));
  }
  if (m.substitute_depth != em.substitute_depth) {
    reject("model.substitute_depth", std::to_string(m.substitute_depth), std::to_string(em.substitute_depth));
  }
  if (m.slope != em.slope) reject("model.slope", fmt_double(m.slope), fmt_double(em.slope));
  if (m.reduction_ratio != em.reduction_ratio) {
    reject("model.reduction_ratio", std::to_string(m.reduction_ratio), std::to_string(em.reduction_ratio));
  }
  if (m.share_directions != em.share_directions) {
    reject("model.share_directions", fmt_bool(m.share_directions), fmt_bool(em.share_directions));
  }
  if (s.reference_group != es.reference_group) {
    reject("ablation.rg", fmt_bool(s.reference_group), fmt_bool(es.reference_group));
  }
  if (s.tam != es.tam) reject("ablation.tam", fmt_bool(s.tam), fmt_bool(es.tam));
  if (s.asm_mode != es.asm_mode) reject("ablation.asm_mode", to_string(s.asm_mode), to_string(es.asm_mode));
  return ckpt;
}

}  // namespace rgan
