#include "tinydef/spd.h"

#include <gtest/gtest.h>

#include <algorithm>

#include "tinydef/random_init.h"

using namespace tinydef;

namespace {

// Direct per-element index oracle for the forward map.
double spd_element(const Tensor4& x, int scale, int b, int k, int u, int v) {
  const int block = k / x.channels(), c = k % x.channels();
  const int i = block / scale, j = block % scale;
  return x(b, c, u * scale + i, v * scale + j);
}

std::vector<double> sorted_values(const Tensor4& t) {
  std::vector<double> v(t.values().begin(), t.values().end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(Spd, SymbolicTwoByTwoOrder) {
  // a=1, b=2, c=3, d=4 laid out [[a,b],[c,d]].
  const Tensor4 y = spd_rearrange(Tensor4({1, 1, 2, 2}, {1, 2, 3, 4}), 2);
  EXPECT_EQ(y, Tensor4({1, 4, 1, 1}, {1, 2, 3, 4}));
  EXPECT_EQ(spd_inverse(y, 2), Tensor4({1, 1, 2, 2}, {1, 2, 3, 4}));
}

TEST(Spd, BlocksAreWholeChannelSlabs) {
  // Two channels: slab (0,0) holds both channels before slab (0,1) starts.
  const Tensor4 x({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  EXPECT_EQ(spd_rearrange(x, 2),
            Tensor4({1, 8, 1, 1}, {1, 10, 2, 20, 3, 30, 4, 40}));
}

TEST(Spd, ScaleOneIsIdentity) {
  Rng rng = make_rng(1);
  const Tensor4 x = random_tensor({2, 3, 5, 7}, rng);
  EXPECT_EQ(spd_rearrange(x, 1), x);
}

TEST(Spd, MatchesIndexOracleAndPreservesValues) {
  Rng rng = make_rng(2);
  for (int scale : {2, 3, 4}) {
    const Tensor4 x = random_tensor({2, 3, 4 * scale, 2 * scale}, rng);
    const Tensor4 y = spd_rearrange(x, scale);
    ASSERT_EQ(y.shape(), (Shape4{2, 3 * scale * scale, 4, 2}));
    for (int b = 0; b < 2; ++b)
      for (int k = 0; k < y.channels(); ++k)
        for (int u = 0; u < 4; ++u)
          for (int v = 0; v < 2; ++v)
            ASSERT_EQ(y(b, k, u, v), spd_element(x, scale, b, k, u, v));
    EXPECT_EQ(sorted_values(x), sorted_values(y));
    EXPECT_EQ(spd_inverse(y, scale), x);
  }
}

TEST(Spd, RoundTripIsBitIdentical) {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor4 x = random_tensor({1 + trial % 2, 1 + trial % 4, 2 * (1 + trial % 5),
                                     2 * (1 + trial % 3)},
                                    rng, -1e6, 1e6);
    const Tensor4 y = spd_rearrange(x);
    EXPECT_EQ(spd_inverse(y), x);
    EXPECT_EQ(spd_rearrange(spd_inverse(y)), y);
  }
}

TEST(Spd, CommutesWithElementwiseMaps) {
  Rng rng = make_rng(4);
  const Tensor4 x = random_tensor({1, 2, 6, 4}, rng);
  EXPECT_EQ(spd_rearrange(activation(x, Activation::kRelu)),
            activation(spd_rearrange(x), Activation::kRelu));
}

TEST(Spd, RejectsIndivisibleInput) {
  EXPECT_THROW(spd_rearrange(Tensor4({1, 1, 3, 4}), 2), ContractViolation);
  EXPECT_THROW(spd_rearrange(Tensor4({1, 1, 4, 5}), 2), ContractViolation);
  EXPECT_THROW(spd_inverse(Tensor4({1, 3, 2, 2}), 2), ContractViolation);
}

TEST(SpdConfig, ValidatesFollowConv) {
  auto conv = [](int out, int in, int k, int stride, int pad) {
    return Conv2dParams(Tensor4({out, in, k, k}), std::nullopt, stride, pad, 1);
  };
  EXPECT_NO_THROW(SpdConfig(conv(8, 12, 3, 1, 1)));
  EXPECT_THROW(SpdConfig(conv(8, 12, 3, 1, 1), 1), ContractViolation);
  EXPECT_THROW(SpdConfig(conv(8, 12, 5, 1, 2)), ContractViolation);
  EXPECT_THROW(SpdConfig(conv(8, 12, 3, 2, 1)), ContractViolation);
  EXPECT_THROW(SpdConfig(conv(8, 12, 3, 1, 0)), ContractViolation);
  EXPECT_THROW(SpdConfig(conv(8, 6, 3, 1, 1)), ContractViolation);
}

TEST(SpdConv, CenterTapSelectsEvenSubsampling) {
  Rng rng = make_rng(5);
  const Tensor4 x = random_tensor({1, 1, 8, 6}, rng);
  Tensor4 w({1, 4, 3, 3});
  w(0, 0, 1, 1) = 1.0;
  const Tensor4 y = spdconv_forward(x, SpdConfig(Conv2dParams(w, std::nullopt, 1, 1, 1)));
  ASSERT_EQ(y.shape(), (Shape4{1, 1, 4, 3}));
  for (int u = 0; u < 4; ++u)
    for (int v = 0; v < 3; ++v) EXPECT_EQ(y(0, 0, u, v), x(0, 0, 2 * u, 2 * v));
}

TEST(SpdConv, ZeroInputGivesBias) {
  const std::vector<double> bias{0.5, -1.5};
  const Tensor4 y = spdconv_forward(
      Tensor4({1, 1, 4, 4}),
      SpdConfig(Conv2dParams(Tensor4({2, 4, 3, 3}, 0.3), bias, 1, 1, 1)));
  for (int u = 0; u < 2; ++u)
    for (int v = 0; v < 2; ++v) {
      EXPECT_EQ(y(0, 0, u, v), 0.5);
      EXPECT_EQ(y(0, 1, u, v), -1.5);
    }
}

TEST(SpdConv, OutputShape) {
  Rng rng = make_rng(6);
  const SpdConfig cfg(random_conv({16, 12}, rng));
  EXPECT_EQ(spdconv_forward(Tensor4({1, 3, 32, 32}), cfg).shape(),
            (Shape4{1, 16, 16, 16}));
  EXPECT_EQ(cfg.in_channels(), 3);
  EXPECT_EQ(cfg.out_channels(), 16);
}

TEST(SpdCost, FrozenReport) {
  const SpdCostReport r = spd_cost_report({1, 3, 32, 32}, 16);
  EXPECT_EQ(r.spdconv_macs, 442368u);
  EXPECT_EQ(r.strided_conv_macs, 110592u);
  EXPECT_DOUBLE_EQ(r.macs_per_output_ratio, 4.0);
  EXPECT_DOUBLE_EQ(r.output_elems_vs_stride1, 0.25);
}
