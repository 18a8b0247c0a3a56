#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rgan/data.hpp"
#include "rgan/model_config.hpp"
#include "rgan/train.hpp"

namespace rgan {

// Everything a run can be configured with. `scale` feeds both the model and
// the degradation; `seed` drives initialisation, sampling and shuffling.
struct RunConfig {
  ModelConfig model;
  AblationSpec spec;
  DegradationConfig degradation;
  TrainConfig train;

  bool operator==(const RunConfig&) const = default;
  void validate() const;
};

// The accepted keys, in echo order.
const std::vector<std::string>& config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Flat "key = value" lines; '#' starts a comment. Later files and flags
// override earlier values, so callers apply defaults, then files, then flags.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "<text>");
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Parses back to the same RunConfig.
std::string render_config(const RunConfig& cfg);

}  // namespace rgan
