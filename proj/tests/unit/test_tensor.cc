#include "tinydef/tensor.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.h"
#include "tinydef/random_init.h"

using namespace tinydef;

namespace {

Tensor4 iota_tensor(Shape4 s, double start = 1.0) {
  std::vector<double> v(s.count());
  std::iota(v.begin(), v.end(), start);
  return Tensor4(s, v);
}

}  // namespace

TEST(Tensor, LayoutIsRowMajorBCHW) {
  const Tensor4 t = iota_tensor({2, 3, 4, 5}, 0.0);
  EXPECT_EQ(t(0, 0, 0, 1), 1.0);
  EXPECT_EQ(t(0, 0, 1, 0), 5.0);
  EXPECT_EQ(t(0, 1, 0, 0), 20.0);
  EXPECT_EQ(t(1, 0, 0, 0), 60.0);
  EXPECT_EQ(t.plane(1, 2).front(), 100.0);
}

TEST(Tensor, RejectsBadConstruction) {
  EXPECT_THROW(Tensor4(Shape4{1, 1, 2, 2}, std::vector<double>(3)), ContractViolation);
  EXPECT_THROW(Tensor4(Shape4{1, 1, 1, 1}, std::vector<double>{NAN}), ContractViolation);
  EXPECT_THROW(Tensor4(Shape4{0, 1, 1, 1}), ContractViolation);
}

TEST(Conv2d, HandComputedBoxFilter) {
  const Tensor4 x = iota_tensor({1, 1, 3, 3});
  const Conv2dParams p(Tensor4({1, 1, 3, 3}, 1.0), std::nullopt, 1, 1, 1);
  const Tensor4 y = conv2d(x, p);
  EXPECT_EQ(y(0, 0, 1, 1), 45.0);
  EXPECT_EQ(y(0, 0, 0, 0), 12.0);
  EXPECT_EQ(y(0, 0, 2, 2), 28.0);
  EXPECT_EQ(y(0, 0, 0, 1), 21.0);
}

TEST(Conv2d, IsCrossCorrelationNotConvolution) {
  const Tensor4 x = iota_tensor({1, 1, 3, 3});
  Tensor4 w({1, 1, 3, 3});
  w(0, 0, 0, 0) = 1.0;  // picks the upper-left neighbour
  const Tensor4 y = conv2d(x, Conv2dParams(w, std::nullopt, 1, 1, 1));
  EXPECT_EQ(y(0, 0, 1, 1), 1.0);
  EXPECT_EQ(y(0, 0, 2, 2), 5.0);
  EXPECT_EQ(y(0, 0, 0, 0), 0.0);
}

TEST(Conv2d, MatchesNaiveOracleOnRandomShapes) {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int groups = 1 + trial % 3;
    const int icg = 1 + trial % 2, ocg = 1 + (trial / 2) % 3;
    const int kh = 1 + 2 * (trial % 3), kw = 1 + 2 * ((trial / 3) % 2);
    const int stride = 1 + trial % 2;
    const Padding2d pad{(trial / 5) % 3, (trial / 7) % 2};
    const int h = kh + std::uniform_int_distribution<int>(0, 9)(rng);
    const int w = kw + std::uniform_int_distribution<int>(0, 9)(rng);
    const Tensor4 x = random_tensor({2, icg * groups, h, w}, rng);
    const Tensor4 wt = random_tensor({ocg * groups, icg, kh, kw}, rng);
    const auto bias = random_vector(static_cast<std::size_t>(ocg * groups), rng);
    const Tensor4 got = conv2d(x, Conv2dParams(wt, bias, stride, pad, groups));
    const Tensor4 want = oracle::conv2d(x, wt, bias, stride, pad.h, pad.w, groups);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(max_abs_diff(got, want), 1e-12) << "trial " << trial;
  }
}

TEST(Conv2d, ShapeMismatchThrows) {
  const Conv2dParams p(Tensor4({4, 2, 3, 3}), std::nullopt, 1, 1, 1);
  EXPECT_THROW(conv2d(Tensor4({1, 3, 8, 8}), p), ContractViolation);
  EXPECT_THROW(Conv2dParams(Tensor4({3, 2, 3, 3}), std::nullopt, 1, 1, 2),
               ContractViolation);
  EXPECT_THROW(Conv2dParams(Tensor4({2, 1, 3, 3}), std::vector<double>(3), 1, 1, 1),
               ContractViolation);
  const Conv2dParams big(Tensor4({1, 1, 5, 5}), std::nullopt, 1, 0, 1);
  EXPECT_THROW(conv2d(Tensor4({1, 1, 3, 3}), big), ContractViolation);
}

TEST(BatchNorm, InferenceFormula) {
  const BatchNormParams bn({2.0}, {0.5}, {1.0}, {3.0}, 1.0);
  const Tensor4 y = batchnorm_infer(Tensor4({1, 1, 1, 2}, {1.0, 5.0}), bn);
  EXPECT_DOUBLE_EQ(y(0, 0, 0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y(0, 0, 0, 1), 2.0 * 4.0 / 2.0 + 0.5);
}

TEST(BatchNorm, IdentityIsExactNoOp) {
  Rng rng = make_rng(3);
  const Tensor4 x = random_tensor({2, 4, 5, 5}, rng);
  EXPECT_EQ(batchnorm_infer(x, BatchNormParams::identity(4)), x);
}

TEST(BatchNorm, RejectsNonPositiveVariance) {
  EXPECT_THROW(BatchNormParams({1.0}, {0.0}, {0.0}, {-1.0}, 0.5), ContractViolation);
  EXPECT_THROW(BatchNormParams({1.0, 1.0}, {0.0}, {0.0}, {1.0}), ContractViolation);
}

TEST(Activation, Values) {
  EXPECT_EQ(activate(-2.0, Activation::kRelu), 0.0);
  EXPECT_EQ(activate(3.0, Activation::kRelu), 3.0);
  EXPECT_DOUBLE_EQ(activate(0.0, Activation::kSigmoid), 0.5);
  EXPECT_EQ(activate(-7.0, Activation::kIdentity), -7.0);
  EXPECT_EQ(parse_activation("sigmoid"), Activation::kSigmoid);
  EXPECT_EQ(to_string(Activation::kRelu), "relu");
  EXPECT_THROW(parse_activation("gelu"), ContractViolation);
}

TEST(Gap, MeansEachPlane) {
  const Tensor4 g = gap(iota_tensor({1, 2, 2, 2}));
  EXPECT_EQ(g.shape(), (Shape4{1, 2, 1, 1}));
  EXPECT_DOUBLE_EQ(g(0, 0, 0, 0), 2.5);
  EXPECT_DOUBLE_EQ(g(0, 1, 0, 0), 6.5);
}

TEST(Channels, SplitThenConcatRoundTrips) {
  Rng rng = make_rng(5);
  const Tensor4 x = random_tensor({2, 7, 3, 4}, rng);
  const std::vector<int> sizes{3, 4};
  const auto parts = split_channels(x, sizes);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[1](1, 0, 2, 3), x(1, 3, 2, 3));
  EXPECT_EQ(concat_channels(parts), x);
  const std::vector<int> bad{3, 3};
  EXPECT_THROW(split_channels(x, bad), ContractViolation);
}

TEST(Dft, HandComputedTwoByTwo) {
  const ComplexTensor4 f = dft2(Tensor4({1, 1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_NEAR(f(0, 0, 0, 0).real(), 10.0, 1e-15);
  EXPECT_NEAR(f(0, 0, 0, 1).real(), -2.0, 1e-15);
  EXPECT_NEAR(f(0, 0, 1, 0).real(), -4.0, 1e-15);
  EXPECT_NEAR(std::abs(f(0, 0, 1, 1)), 0.0, 1e-15);
  EXPECT_LE(f.max_abs_imag(), 1e-15);
}

TEST(Dft, ImpulseHasFlatSpectrum) {
  Tensor4 x({1, 1, 5, 3});
  x(0, 0, 0, 0) = 1.0;
  const ComplexTensor4 f = dft2(x);
  for (const auto& v : f.values()) {
    EXPECT_NEAR(v.real(), 1.0, 1e-14);
    EXPECT_NEAR(v.imag(), 0.0, 1e-14);
  }
}

TEST(Dft, MatchesNaiveDoubleSum) {
  Rng rng = make_rng(8);
  for (auto [h, w] : {std::pair{8, 8}, {5, 7}, {1, 6}, {12, 4}}) {
    const Tensor4 x = random_tensor({1, 2, h, w}, rng);
    const ComplexTensor4 f = dft2(x);
    for (int c = 0; c < 2; ++c) {
      std::vector<std::complex<double>> plane(x.plane(0, c).begin(),
                                              x.plane(0, c).end());
      const auto want = oracle::dft2_plane(plane, h, w, false);
      double scale = 0.0, err = 0.0;
      for (std::size_t i = 0; i < want.size(); ++i) {
        scale = std::max(scale, std::abs(want[i]));
        err = std::max(err, std::abs(want[i] - f.plane(0, c)[i]));
      }
      EXPECT_LE(err, 1e-8 * scale) << h << "x" << w;
    }
  }
}

TEST(Dft, RoundTripAndParseval) {
  Rng rng = make_rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + trial % 9, w = 2 + trial % 11;
    const Tensor4 x = random_tensor({2, 3, h, w}, rng);
    const ComplexTensor4 f = dft2(x);
    const ComplexTensor4 back = idft2(f);
    EXPECT_LE(max_abs_diff(back.real(), x), 1e-8 * x.max_abs());
    EXPECT_LE(back.max_abs_imag(), 1e-8 * x.max_abs());
    double e_space = 0.0, e_freq = 0.0;
    for (double v : x.values()) e_space += v * v;
    for (const auto& v : f.values()) e_freq += std::norm(v);
    e_freq /= static_cast<double>(h * w);
    EXPECT_NEAR(e_freq, e_space, 1e-6 * e_space);
  }
}

TEST(Dft, ComplexInputMatchesNaive) {
  Rng rng = make_rng(10);
  ComplexTensor4 z(Shape4{1, 1, 6, 5});
  for (auto& v : z.values()) v = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
  const ComplexTensor4 f = dft2(z);
  const std::vector<std::complex<double>> plane(z.values().begin(), z.values().end());
  const auto want = oracle::dft2_plane(plane, 6, 5, false);
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_LE(std::abs(want[i] - f.values()[i]), 1e-12);
  }
  const auto inv = oracle::dft2_plane(want, 6, 5, true);
  const ComplexTensor4 zi = idft2(f);
  for (std::size_t i = 0; i < inv.size(); ++i) {
    EXPECT_LE(std::abs(inv[i] - zi.values()[i]), 1e-12);
  }
}

TEST(Elementwise, AddScaleAndDiff) {
  const Tensor4 a = iota_tensor({1, 1, 1, 3});
  const Tensor4 b = scale(a, 2.0);
  EXPECT_EQ(add(a, b), Tensor4({1, 1, 1, 3}, {3, 6, 9}));
  EXPECT_EQ(max_abs_diff(a, b), 3.0);
  EXPECT_THROW(add(a, Tensor4({1, 1, 3, 1})), ContractViolation);
}
