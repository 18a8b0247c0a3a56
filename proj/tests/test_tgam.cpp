#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rgan/tgam.hpp"

using namespace rgan;

namespace {

FrameTriple random_triple(int h, int w, std::mt19937_64& rng) {
  return {oracle::random_map(3, h, w, rng, 0, 1), oracle::random_map(3, h, w, rng, 0, 1),
          oracle::random_map(3, h, w, rng, 0, 1)};
}

TgamParams random_tgam(int width, const AblationSpec& spec, std::mt19937_64& rng) {
  TgamParams p = TgamParams::zeros(width, spec);
  for (auto& c : p.reference) c = oracle::random_conv(c.in_channels, c.out_channels, c.kernel, rng, 0.3);
  for (auto& c : p.fusion) c = oracle::random_conv(c.in_channels, c.out_channels, c.kernel, rng, 0.3);
  if (p.tam) p.tam = oracle::random_conv(p.tam->in_channels, p.tam->out_channels, 3, rng, 0.3);
  p.fuse = oracle::random_conv(p.fuse.in_channels, p.fuse.out_channels, 3, rng, 0.3);
  return p;
}

}  // namespace

TEST_CASE("slot softmax") {
  SUBCASE("equal logits give a third each") {
    std::mt19937_64 rng(1);
    FeatureMap raw = oracle::random_map(9, 4, 4, rng);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) raw.at(3, y, x) = raw.at(6, y, x) = raw.at(0, y, x);
    }
    const TemporalAttention a = gate_temporal_slots(raw);
    for (double v : a.weights.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("saturated logit passes its slot alone") {
    std::mt19937_64 rng(2);
    FeatureMap raw = oracle::random_map(9, 2, 2, rng);
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) {
        raw.at(0, y, x) = 1000.0;
        raw.at(3, y, x) = raw.at(6, y, x) = 0.0;
      }
    }
    const TemporalAttention a = gate_temporal_slots(raw);
    CHECK(a.features.all_finite());
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) {
        CHECK(a.weights.at(0, y, x) == 1.0);
        CHECK(a.weights.at(1, y, x) == 0.0);
        for (int j = 0; j < 2; ++j) {
          CHECK(a.features.at(j, y, x) == raw.at(1 + j, y, x));
          CHECK(a.features.at(2 + j, y, x) == 0.0);
          CHECK(a.features.at(4 + j, y, x) == 0.0);
        }
      }
    }
  }
  SUBCASE("matches the direct oracle") {
    std::mt19937_64 rng(3);
    for (int w : {6, 12}) {
      const FeatureMap raw = oracle::random_map(w, 5, 3, rng, -3, 3);
      const TemporalAttention a = gate_temporal_slots(raw);
      const oracle::Tam t = oracle::tam_gate(raw);
      CHECK(oracle::rel_diff(a.weights, t.weights) < 1e-12);
      CHECK(oracle::rel_diff(a.features, t.features) < 1e-12);
    }
  }
  SUBCASE("width not divisible by three is rejected") { CHECK_THROWS(gate_temporal_slots(FeatureMap(8, 2, 2))); }
}

TEST_CASE("reference branch ignores the neighbours") {
  std::mt19937_64 rng(4);
  const AblationSpec spec;
  const TgamParams p = random_tgam(6, spec, rng);
  FrameTriple t = random_triple(6, 6, rng);
  const FeatureMap a = reference_branch(t.ref, p.reference, 0.1);
  t.prev = oracle::random_map(3, 6, 6, rng);
  t.next = oracle::random_map(3, 6, 6, rng);
  CHECK(tgam_forward(t, p, spec, 0.1).f_ref.value() == a);
  CHECK(reference_branch(t.ref, TgamParams::zeros(6, spec).reference, 0.1) == FeatureMap(6, 6, 6));
  CHECK(oracle::rel_diff(a, oracle::chain(t.ref, p.reference, 0.1)) < 1e-12);
}

TEST_CASE("fusion branch") {
  std::mt19937_64 rng(5);
  const AblationSpec spec;
  const TgamParams p = random_tgam(6, spec, rng);
  const FrameTriple t = random_triple(16, 16, rng);
  const FeatureMap f = fusion_branch(t, p.fusion, 0.1);
  CHECK(f.shape() == Shape3{6, 16, 16});
  CHECK(oracle::rel_diff(f, oracle::chain(oracle::join({&t.prev, &t.ref, &t.next}), p.fusion, 0.1)) < 1e-12);
  const FrameTriple same{t.ref, t.ref, t.ref};
  CHECK(fusion_branch(same, TgamParams::zeros(6, spec).fusion, 0.1) == FeatureMap(6, 16, 16));
}

TEST_CASE("tgam variants") {
  std::mt19937_64 rng(6);
  for (bool rg : {false, true}) {
    for (bool tam : {false, true}) {
      const AblationSpec spec{rg, tam, AsmMode::full};
      CAPTURE(spec.label());
      const TgamParams p = random_tgam(9, spec, rng);
      const FrameTriple t = random_triple(5, 6, rng);
      const TgamFeatures f = tgam_forward(t, p, spec, 0.1);
      const oracle::TgamOut o = oracle::tgam(t, p, spec, 0.1);
      CHECK(f.f_ref.has_value() == rg);
      CHECK(f.f_att.empty() == !tam);
      CHECK(f.weights.empty() == !tam);
      if (rg) CHECK(oracle::rel_diff(*f.f_ref, *o.f_ref) < 1e-12);
      CHECK(oracle::rel_diff(f.f_fus, o.f_fus) < 1e-12);
      if (tam) CHECK(f.f_att.channels() == 6);
    }
  }
  const AblationSpec full;
  const AblationSpec other{false, true, AsmMode::full};
  CHECK_THROWS_AS(tgam_forward(random_triple(4, 4, rng), TgamParams::zeros(6, full), other, 0.1), ConfigError);
}

TEST_CASE("temporal attention weights sum to one") {
  std::mt19937_64 rng(7);
  const AblationSpec spec;
  for (int trial = 0; trial < 20; ++trial) {
    const TgamParams p = random_tgam(6, spec, rng);
    const TgamFeatures f = tgam_forward(random_triple(5, 5, rng), p, spec, 0.1);
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) {
        CHECK(f.weights.at(0, y, x) + f.weights.at(1, y, x) + f.weights.at(2, y, x) ==
              doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}
