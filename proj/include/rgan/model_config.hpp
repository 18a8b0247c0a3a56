#pragma once

#include <string>
#include <vector>

namespace rgan {

enum class AsmMode {
  full,          // modulation blocks with attention (RGAN)
  substitute,    // plain residual chain in place of the whole module (RGAN-N)
  no_attention,  // modulation blocks without their attention gate (RGAN-S)
};

std::string to_string(AsmMode mode);
AsmMode parse_asm_mode(const std::string& text);

// Which components of the network are present.
struct AblationSpec {
  bool reference_group = true;
  bool tam = true;
  AsmMode asm_mode = AsmMode::full;

  bool operator==(const AblationSpec&) const = default;
  std::string label() const;
};

// The six configurations studied: full, three grouping ablations, and two
// attention-supplementation ablations.
std::vector<AblationSpec> standard_variants();
AblationSpec variant_from_label(const std::string& label);

struct ModelConfig {
  int width = 39;             // trunk channels, multiple of 3
  int scale = 4;
  int frm_out_channels = 48;  // must equal 3 * scale^2
  int frm_resblocks = 3;
  int asm_resblocks = 3;
  int substitute_depth = 7;   // residual blocks replacing the module in RGAN-N
  double slope = 0.1;         // LeakyReLU negative slope
  int reduction_ratio = 3;    // attention bottleneck, must divide width
  bool share_directions = false;

  bool operator==(const ModelConfig&) const = default;
  // Throws ConfigError naming the first violated constraint.
  void validate() const;
};

}  // namespace rgan
