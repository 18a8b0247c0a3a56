#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgan/net.hpp"

namespace rgan {

struct GradCheckConfig {
  int width = 6;
  int frames = 3;
  int size = 8;  // LR height and width
  int samples_per_array = 2;
  int min_samples = 200;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error; gradients below it are compared
  // in absolute terms.
  double floor = 1e-6;
  double loss_eps = 1e-3;
  double slope = kDefaultSlope;
  std::uint64_t seed = 7;
  AblationSpec spec;
};

struct ArrayCheck {
  std::string name;
  int samples = 0;
  int kinked = 0;  // probes recomputed with the activation pattern held
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::string variant;
  int samples = 0;
  int kinked = 0;
  double max_rel_error = 0.0;
  std::string worst_array;
  std::vector<ArrayCheck> arrays;
  std::vector<std::string> failures;  // arrays whose error exceeds the tolerance
  bool passed = false;
};

// Analytic gradient of a Charbonnier loss on a random tiny instance against
// central finite differences, sampled across every named parameter array.
// When a probe's +step or -step evaluation changes the sign of some (leaky)
// ReLU input, the quotient straddles a kink and does not estimate the
// derivative at the sampled point. It is then recomputed with every
// activation held to the pattern of the unperturbed pass; that function
// agrees with the network near the sampled point, so its derivative there is
// the one being checked.
GradCheckReport grad_check(const GradCheckConfig& cfg);

}  // namespace rgan
