#include "tinydef/csdmam.h"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.h"

using namespace tinydef;

namespace {

FscaParams pinned_fsca(int c, double chan, double spatial) {
  return {zero_conv1x1(c), zero_conv1x1(c), chan, spatial};
}

// Every branch off, projections identity, FSCA silenced.
DmamParams quiet_dmam(int c, int k) {
  return {identity_conv1x1(c),
          k,
          depthwise_center(c, k, k, 0.0),
          depthwise_center(c, 1, k, 0.0),
          depthwise_center(c, k, 1, 0.0),
          depthwise_center(c, 1, 1, 0.0),
          pinned_fsca(c, 0.0, 0.0),
          identity_conv1x1(c)};
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST(Fsca, PinnedOnesIsIdentity) {
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor4 x = random_tensor({1 + trial % 2, 1 + trial % 4, 3 + trial % 6, 2 + trial % 7}, rng);
    FscaTrace tr;
    const Tensor4 y = fsca_forward(x, pinned_fsca(x.channels(), 1.0, 1.0), &tr);
    EXPECT_LE(max_abs_diff(y, x), 1e-8 * x.max_abs());
    EXPECT_LE(tr.max_imag_residue, 1e-8 * x.max_abs());
    EXPECT_DOUBLE_EQ(tr.imag_tolerance, 1e-8 * x.max_abs());
  }
}

TEST(Fsca, PinnedWeightsMultiply) {
  Rng rng = make_rng(2);
  const Tensor4 x = random_tensor({1, 3, 8, 8}, rng);
  const Tensor4 y = fsca_forward(x, pinned_fsca(3, 0.5, 0.25));
  EXPECT_LE(max_abs_diff(y, scale(x, 0.125)), 1e-12);
}

TEST(Fsca, LearnedAttentionMatchesDirectFormula) {
  Rng rng = make_rng(3);
  const int c = 4;
  const Tensor4 x = random_tensor({2, c, 6, 5}, rng);
  const Conv2dParams ca = random_conv({c, c, 1, 1, 1, {0, 0}}, rng);
  const Conv2dParams sa = random_conv({c, c, 1, 1, 1, {0, 0}}, rng);
  const Tensor4 y = fsca_forward(x, {ca, sa, std::nullopt, std::nullopt});
  for (int b = 0; b < 2; ++b) {
    std::vector<double> mean(c, 0.0);
    for (int ch = 0; ch < c; ++ch) {
      for (double v : x.plane(b, ch)) mean[ch] += v;
      mean[ch] /= 30.0;
    }
    for (int o = 0; o < c; ++o) {
      double zc = (*ca.bias())[o], zs = (*sa.bias())[o];
      for (int i = 0; i < c; ++i) {
        zc += ca.weights()(o, i, 0, 0) * mean[i];
        zs += sa.weights()(o, i, 0, 0) * mean[i];
      }
      const double w = sigmoid(zc) * sigmoid(zs);
      for (int r = 0; r < 6; ++r)
        for (int q = 0; q < 5; ++q) EXPECT_NEAR(y(b, o, r, q), w * x(b, o, r, q), 1e-12);
    }
  }
}

TEST(Fsca, RejectsWrongConvShape) {
  FscaParams p = pinned_fsca(3, 1.0, 1.0);
  EXPECT_THROW(fsca_forward(Tensor4({1, 2, 4, 4}), p), ContractViolation);
}

TEST(Dmam, QuietBlockReturnsInput) {
  Rng rng = make_rng(4);
  const Tensor4 x = random_tensor({1, 3, 9, 7}, rng);
  DmamTaps taps;
  EXPECT_EQ(dmam_forward(x, quiet_dmam(3, 5), &taps), x);
  EXPECT_EQ(taps.projected, x);
  EXPECT_EQ(taps.branch_sum, x);
}

TEST(Dmam, EachBranchAddsItsResponse) {
  Rng rng = make_rng(5);
  const Tensor4 x = random_tensor({1, 2, 7, 7}, rng);
  DmamParams p = quiet_dmam(2, 3);
  p.dw_11 = depthwise_center(2, 1, 1, 1.0);
  EXPECT_LE(max_abs_diff(dmam_forward(x, p), scale(x, 2.0)), 1e-15);
  p.dw_1k = depthwise_center(2, 1, 3, 1.0);
  p.dw_k1 = depthwise_center(2, 3, 1, 1.0);
  p.dw_kk = depthwise_center(2, 3, 3, 1.0);
  p.fsca = pinned_fsca(2, 1.0, 1.0);
  EXPECT_LE(max_abs_diff(dmam_forward(x, p), scale(x, 6.0)), 1e-12);
}

TEST(Dmam, StripBranchMatchesOracle) {
  Rng rng = make_rng(6);
  const int c = 2, k = 7;
  const Tensor4 x = random_tensor({1, c, 10, 12}, rng);
  DmamParams p = quiet_dmam(c, k);
  p.dw_1k = random_conv({c, c, 1, k, 1, {0, k / 2}, c}, rng);
  const Tensor4 want = add(
      x, oracle::conv2d(x, p.dw_1k.weights(), *p.dw_1k.bias(), 1, 0, k / 2, c));
  EXPECT_LE(max_abs_diff(dmam_forward(x, p), want), 1e-12);
}

TEST(Dmam, RandomBlockIsFiniteAndShapePreserving) {
  Rng rng = make_rng(7);
  const Tensor4 x = random_tensor({2, 4, 12, 10}, rng);
  const Tensor4 y = dmam_forward(x, random_dmam(4, kDefaultStripKernel, rng));
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_TRUE(y.all_finite());
}

TEST(Dmam, ValidatesShapes) {
  DmamParams p = quiet_dmam(2, 3);
  p.k = 4;
  EXPECT_THROW(dmam_forward(Tensor4({1, 2, 4, 4}), p), ContractViolation);
  p = quiet_dmam(2, 3);
  p.dw_1k = depthwise_center(2, 1, 5, 0.0);
  EXPECT_THROW(dmam_forward(Tensor4({1, 2, 4, 4}), p), ContractViolation);
  p = quiet_dmam(2, 3);
  p.dw_kk = Conv2dParams(Tensor4({2, 2, 3, 3}), std::nullopt, 1, 1, 1);
  EXPECT_THROW(dmam_forward(Tensor4({1, 2, 4, 4}), p), ContractViolation);
}

TEST(Csp, BranchChannelCount) {
  EXPECT_EQ(csp_branch_channels(2, 0.5), 1);
  EXPECT_EQ(csp_branch_channels(8, 0.5), 4);
  EXPECT_EQ(csp_branch_channels(5, 0.5), 3);
  EXPECT_EQ(csp_branch_channels(3, 0.1), 1);
  EXPECT_EQ(csp_branch_channels(3, 0.9), 2);
  EXPECT_THROW(csp_branch_channels(1, 0.5), ContractViolation);
  EXPECT_THROW(csp_branch_channels(4, 0.0), ContractViolation);
  EXPECT_THROW(csp_branch_channels(4, 1.0), ContractViolation);
}

TEST(Csdmam, TapsAreConsistent) {
  Rng rng = make_rng(8);
  const Tensor4 x = random_tensor({1, 6, 8, 8}, rng);
  const CsdmamParams p = random_csdmam(6, 5, rng);
  CsdmamTaps taps;
  const Tensor4 y = csdmam_forward(x, p, &taps);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(taps.output, y);
  const std::vector<int> sizes{3, 3};
  const auto halves = split_channels(x, sizes);
  EXPECT_EQ(taps.branch_in, halves[0]);
  EXPECT_EQ(taps.identity_half, halves[1]);
  const Tensor4 parts[] = {taps.dmam_out, taps.identity_half};
  EXPECT_EQ(taps.pre_merge, concat_channels(parts));
  EXPECT_EQ(taps.dmam_out, dmam_forward(halves[0], p.inner));
  EXPECT_EQ(taps.inner.projected, conv2d(halves[0], p.inner.proj_in));
}

TEST(Csdmam, QuietBlockWithIdentityMergeIsIdentity) {
  Rng rng = make_rng(9);
  const Tensor4 x = random_tensor({2, 4, 5, 6}, rng);
  const CsdmamParams p{quiet_dmam(2, 3), identity_conv1x1(4), 0.5};
  EXPECT_EQ(csdmam_forward(x, p), x);
}

TEST(Csdmam, MergeWidthMismatchThrows) {
  const CsdmamParams p{quiet_dmam(2, 3), identity_conv1x1(5), 0.5};
  EXPECT_THROW(csdmam_forward(Tensor4({1, 4, 4, 4}), p), ContractViolation);
}
