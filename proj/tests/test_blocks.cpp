#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rgan/blocks.hpp"

using namespace rgan;

namespace {

ConvParams identity_conv(int c, int k) {
  ConvParams p = ConvParams::zeros(c, c, k);
  for (int i = 0; i < c; ++i) p.weight[((static_cast<std::size_t>(i) * c + i) * k + k / 2) * k + k / 2] = 1.0;
  return p;
}

double sum(const FeatureMap& m) { return std::accumulate(m.values().begin(), m.values().end(), 0.0); }

}  // namespace

TEST_CASE("cell with identity kernel passes non-negative input") {
  std::mt19937_64 rng(1);
  const FeatureMap x = oracle::random_map(4, 5, 6, rng, 0.0, 1.0);
  CHECK(cell_forward(x, identity_conv(4, 3), kDefaultSlope) == x);
}

TEST_CASE("zero kernel gives the bias everywhere") {
  std::mt19937_64 rng(2);
  const FeatureMap x = oracle::random_map(3, 4, 4, rng);
  ConvParams p = ConvParams::zeros(3, 2, 3);
  p.bias = {0.25, 1.5};
  const FeatureMap y = cell_forward(x, p, kDefaultSlope);
  for (int y0 = 0; y0 < 4; ++y0) {
    for (int x0 = 0; x0 < 4; ++x0) {
      CHECK(y.at(0, y0, x0) == 0.25);
      CHECK(y.at(1, y0, x0) == 1.5);
    }
  }
}

TEST_CASE("conv2d matches nested loops") {
  std::mt19937_64 rng(3);
  for (int k : {1, 3}) {
    const FeatureMap x = oracle::random_map(4, 5, 5, rng);
    const ConvParams p = oracle::random_conv(4, 6, k, rng);
    CHECK(oracle::rel_diff(conv2d(x, p), oracle::conv(x, p)) < 1e-12);
  }
  const FeatureMap x = oracle::random_map(7, 8, 3, rng);
  const ConvParams p = oracle::random_conv(7, 2, 3, rng);
  CHECK(oracle::rel_diff(cell_forward(x, p, 0.2), oracle::cell(x, p, 0.2)) < 1e-12);
}

TEST_CASE("conv2d rejects a channel mismatch") {
  const FeatureMap x(3, 4, 4);
  CHECK_THROWS_AS(conv2d(x, ConvParams::zeros(2, 2, 3)), ContractError);
}

TEST_CASE("conv2d backward matches finite differences") {
  std::mt19937_64 rng(4);
  const FeatureMap x = oracle::random_map(3, 4, 5, rng);
  ConvParams p = oracle::random_conv(3, 2, 3, rng);
  const FeatureMap dy = oracle::random_map(2, 4, 5, rng);
  auto loss = [&](const FeatureMap& in, const ConvParams& q) {
    const FeatureMap y = oracle::conv(in, q);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * dy.data()[i];
    return s;
  };
  ConvParams grad = ConvParams::zeros(3, 2, 3);
  const FeatureMap dx = conv2d_backward(x, p, dy, grad);
  // The loss is linear in both, so central differences are exact up to roundoff.
  const double h = 1e-3;
  for (std::size_t i = 0; i < p.weight.size(); i += 5) {
    ConvParams a = p, b = p;
    a.weight[i] += h;
    b.weight[i] -= h;
    CHECK(grad.weight[i] == doctest::Approx((loss(x, a) - loss(x, b)) / (2 * h)).epsilon(1e-9));
  }
  for (std::size_t i = 0; i < p.bias.size(); ++i) {
    ConvParams a = p, b = p;
    a.bias[i] += h;
    b.bias[i] -= h;
    CHECK(grad.bias[i] == doctest::Approx((loss(x, a) - loss(x, b)) / (2 * h)).epsilon(1e-9));
  }
  for (std::size_t i = 0; i < x.size(); i += 3) {
    FeatureMap a = x, b = x;
    a.data()[i] += h;
    b.data()[i] -= h;
    CHECK(dx.data()[i] == doctest::Approx((loss(a, p) - loss(b, p)) / (2 * h)).epsilon(1e-9));
  }
}

TEST_CASE("residual block") {
  std::mt19937_64 rng(5);
  const FeatureMap x = oracle::random_map(4, 6, 6, rng);
  SUBCASE("zero branch is the identity") { CHECK(residual_block_forward(x, ResBlockParams::zeros(4), 0.1) == x); }
  SUBCASE("zero input and zero biases give zero") {
    ResBlockParams p{oracle::random_conv(4, 4, 3, rng), oracle::random_conv(4, 4, 3, rng)};
    std::fill(p.first.bias.begin(), p.first.bias.end(), 0.0);
    std::fill(p.second.bias.begin(), p.second.bias.end(), 0.0);
    const FeatureMap y = residual_block_forward(FeatureMap(4, 6, 6), p, 0.1);
    CHECK(y == FeatureMap(4, 6, 6));
  }
  SUBCASE("matches the oracle") {
    const ResBlockParams p{oracle::random_conv(4, 4, 3, rng), oracle::random_conv(4, 4, 3, rng)};
    CHECK(oracle::rel_diff(residual_block_forward(x, p, 0.1), oracle::residual(x, p, 0.1)) < 1e-12);
  }
}

TEST_CASE("channel attention") {
  std::mt19937_64 rng(6);
  const FeatureMap x = oracle::random_map(6, 5, 7, rng);
  AttentionParams p{oracle::random_conv(6, 2, 1, rng), oracle::random_conv(2, 6, 1, rng)};

  SUBCASE("matches the oracle") {
    CHECK(oracle::rel_diff(attention_forward(x, p), oracle::attention(x, p)) < 1e-12);
    const auto s = attention_scale(x, p);
    const auto want = oracle::attention_scale(x, p);
    for (int c = 0; c < 6; ++c) CHECK(s[c] == doctest::Approx(want[c]).epsilon(1e-12));
  }
  SUBCASE("unit gate leaves the input unchanged") {
    const std::vector<double> ones(6, 1.0);
    CHECK(apply_channel_scale(x, ones) == x);
  }
  SUBCASE("saturated gate is numerically one") {
    std::fill(p.expand.weight.begin(), p.expand.weight.end(), 0.0);
    std::fill(p.expand.bias.begin(), p.expand.bias.end(), 1e3);
    CHECK(attention_forward(x, p) == x);
  }
  SUBCASE("zero input stays zero") {
    const FeatureMap z(6, 5, 7);
    CHECK(attention_forward(z, p) == z);
  }
}

TEST_CASE("modulation block") {
  std::mt19937_64 rng(7);
  SUBCASE("zero parameters give zero") {
    const FeatureMap x = oracle::random_map(8, 5, 5, rng);
    const FeatureMap y = modulation_block_forward(x, ModulationParams::zeros(8, 4, 2), 0.1, true);
    CHECK(y == FeatureMap(4, 5, 5));
  }
  SUBCASE("identity composition selects the leading channels") {
    const FeatureMap x = oracle::random_map(8, 5, 5, rng, 0.0, 1.0);
    ModulationParams p = ModulationParams::zeros(8, 4, std::nullopt);
    for (int c = 0; c < 4; ++c) p.squeeze.weight[static_cast<std::size_t>(c) * 8 + c] = 1.0;
    p.conv = identity_conv(4, 3);
    CHECK(modulation_block_forward(x, p, 0.1, false) == slice_channels(x, 0, 4));
  }
  SUBCASE("matches the oracle with and without the gate") {
    const FeatureMap x = oracle::random_map(8, 6, 4, rng);
    ModulationParams p = ModulationParams::zeros(8, 6, 3);
    p.squeeze = oracle::random_conv(8, 6, 1, rng);
    p.conv = oracle::random_conv(6, 6, 3, rng);
    p.attention = AttentionParams{oracle::random_conv(6, 2, 1, rng), oracle::random_conv(2, 6, 1, rng)};
    for (bool att : {true, false}) {
      CHECK(oracle::rel_diff(modulation_block_forward(x, p, 0.1, att), oracle::modulation(x, p, 0.1, att)) < 1e-12);
    }
  }
}

TEST_CASE("pixel shuffle") {
  SUBCASE("2x2 definition") {
    FeatureMap x(4, 1, 1);
    for (int c = 0; c < 4; ++c) x.at(c, 0, 0) = c + 1.0;
    const FeatureMap y = pixel_shuffle(x, 2);
    CHECK(y.shape() == Shape3{1, 2, 2});
    CHECK(y.at(0, 0, 0) == 1.0);
    CHECK(y.at(0, 0, 1) == 2.0);
    CHECK(y.at(0, 1, 0) == 3.0);
    CHECK(y.at(0, 1, 1) == 4.0);
  }
  std::mt19937_64 rng(8);
  const FeatureMap x = oracle::random_map(48, 3, 5, rng);
  const FeatureMap y = pixel_shuffle(x, 4);
  CHECK(y.shape() == Shape3{3, 12, 20});
  CHECK(y == oracle::shuffle(x, 4));
  CHECK(sum(y) == doctest::Approx(sum(x)).epsilon(1e-12));
  CHECK(pixel_unshuffle(y, 4) == x);
  CHECK_THROWS_AS(pixel_shuffle(FeatureMap(5, 2, 2), 2), ContractError);
}

TEST_CASE("bicubic resize") {
  SUBCASE("kernel values") {
    CHECK(cubic_weight(0.0) == 1.0);
    CHECK(cubic_weight(1.0) == 0.0);
    CHECK(cubic_weight(2.0) == 0.0);
    for (double t : {0.1, 0.5, 1.3, 1.9}) CHECK(cubic_weight(t) == doctest::Approx(oracle::keys_cubic(t)).epsilon(1e-14));
  }
  SUBCASE("constant frame stays constant") {
    const FeatureMap y = bicubic_resize(FeatureMap(3, 5, 7, 0.37), 4);
    CHECK(y.shape() == Shape3{3, 20, 28});
    for (double v : y.values()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
  }
  SUBCASE("64x64 to 256x256") { CHECK(bicubic_resize(FeatureMap(3, 64, 64), 4).shape() == Shape3{3, 256, 256}); }
  SUBCASE("ramp matches the per-pixel kernel sum") {
    FeatureMap ramp(1, 6, 8);
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 8; ++x) ramp.at(0, y, x) = 0.1 * x + 0.05 * y;
    }
    CHECK(oracle::rel_diff(bicubic_resize(ramp, 4), oracle::bicubic(ramp, 4)) < 1e-6);
  }
  SUBCASE("random frames match the oracle") {
    std::mt19937_64 rng(9);
    for (int s : {2, 3, 4}) {
      const FeatureMap x = oracle::random_map(3, 7, 5, rng);
      CHECK(oracle::rel_diff(bicubic_resize(x, s), oracle::bicubic(x, s)) < 1e-6);
    }
  }
}

TEST_CASE("activation trace replays a recorded pattern") {
  FeatureMap x(1, 1, 3);
  x.values() = {-1.0, 2.0, -3.0};
  ActivationTrace trace;
  {
    ScopedActivationTrace scope(trace);
    leaky_relu(x, 0.5);
  }
  REQUIRE(trace.positive.size() == 3);
  FeatureMap flipped = x;
  flipped.values() = {1.0, -2.0, 3.0};
  trace.replay = true;
  trace.cursor = 0;
  ScopedActivationTrace scope(trace);
  const FeatureMap y = leaky_relu(flipped, 0.5);
  CHECK(y.values() == std::vector<double>{0.5, -2.0, 1.5});
}
