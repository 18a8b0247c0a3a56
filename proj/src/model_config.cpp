#include "rgan/model_config.hpp"

#include "rgan/tensor.hpp"

namespace rgan {

std::string to_string(AsmMode mode) {
  switch (mode) {
    case AsmMode::full: return "full";
    case AsmMode::substitute: return "substitute";
    case AsmMode::no_attention: return "no_attention";
  }
  return "unknown";
}

AsmMode parse_asm_mode(const std::string& text) {
  if (text == "full") return AsmMode::full;
  if (text == "substitute") return AsmMode::substitute;
  if (text == "no_attention") return AsmMode::no_attention;
  throw ConfigError("unknown asm_mode '" + text + "' (expected full, substitute or no_attention)");
}

std::string AblationSpec::label() const {
  if (asm_mode == AsmMode::substitute) return reference_group && tam ? "RGAN-N" : "RGAN-N(custom)";
  if (asm_mode == AsmMode::no_attention) return reference_group && tam ? "RGAN-S" : "RGAN-S(custom)";
  if (reference_group && tam) return "RGAN";
  if (reference_group) return "RGAN-noTAM";
  if (tam) return "RGAN-noRG";
  return "RGAN-noRG-noTAM";
}

std::vector<AblationSpec> standard_variants() {
  return {
      {true, true, AsmMode::full},       {false, false, AsmMode::full}, {false, true, AsmMode::full},
      {true, false, AsmMode::full},      {true, true, AsmMode::substitute},
      {true, true, AsmMode::no_attention},
  };
}

AblationSpec variant_from_label(const std::string& label) {
  for (const AblationSpec& s : standard_variants()) {
    if (s.label() == label) return s;
  }
  throw ConfigError("unknown model variant '" + label + "'");
}

void ModelConfig::validate() const {
  if (width < 6 || width % 3 != 0) {
    throw ConfigError("width must be a multiple of 3 and at least 6, got " + std::to_string(width));
  }
  if (scale != 4) throw ConfigError("scale must be 4, got " + std::to_string(scale));
  if (frm_out_channels != 3 * scale * scale) {
    throw ConfigError("frm_out_channels must equal 3 * scale^2 = " + std::to_string(3 * scale * scale) + ", got " +
                      std::to_string(frm_out_channels));
  }
  if (frm_resblocks < 0 || asm_resblocks < 0 || substitute_depth < 1) {
    throw ConfigError("block counts must be non-negative (substitute_depth >= 1)");
  }
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("slope must lie in (0, 1)");
  if (reduction_ratio < 1 || width % reduction_ratio != 0) {
    throw ConfigError("reduction_ratio " + std::to_string(reduction_ratio) + " must divide width " +
                      std::to_string(width));
  }
}

}  // namespace rgan
