#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rgan/train.hpp"

namespace rgan {

inline constexpr char kCheckpointMagic[8] = {'R', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: magic, version, a key=value text block echoing the model, ablation
// and training configuration plus epoch and rng state, then every named
// parameter array (name, shape, raw little-endian doubles), the Adam moments
// in the same order, and the loss history.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also rejects a file whose model or ablation differs from the expected one.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected_model,
                           const AblationSpec& expected_spec);

// Text echo of the configuration fields, one key=value per line.
std::string config_echo(const ModelConfig& model, const AblationSpec& spec, const TrainConfig& train);

}  // namespace rgan
