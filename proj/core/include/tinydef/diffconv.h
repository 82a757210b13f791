// Edge-enhanced convolution (EEConv): a 3x3 block whose training form sums
// central, horizontal and vertical difference convolutions with a vanilla
// branch, and whose inference form is one fused 3x3 kernel with batch norm
// folded in. Also the residual block and ResNet stage built on top of it.
#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "tinydef/random_init.h"
#include "tinydef/tensor.h"

namespace tinydef {

// Difference-kernel transforms. Each maps a raw (out, in, 3, 3) kernel to the
// plain 3x3 kernel that computes the same response, and throws
// ContractViolation for any other spatial size.
//
//   cdc: center tap debited by the tap sum, so the kernel sums to zero.
//   hdc: W(i,j) - W(i,2-j), antisymmetric about the middle column.
//   vdc: W(i,j) - W(2-i,j), antisymmetric about the middle row.
Tensor4 cdc_effective_kernel(const Tensor4& w);
Tensor4 hdc_effective_kernel(const Tensor4& w);
Tensor4 vdc_effective_kernel(const Tensor4& w);

// Which branches enter the training-time sum. kDifferenceOnly drops the
// vanilla branch.
enum class BranchMode { kAllFour, kDifferenceOnly };

struct ConvBranchSet {
  Tensor4 w_cdc, w_hdc, w_vdc, w_van;
  std::vector<double> b_cdc, b_hdc, b_vdc, b_van;
  BatchNormParams bn;
  Activation act = Activation::kRelu;
  BranchMode mode = BranchMode::kAllFour;

  int out_channels() const { return w_van.batch(); }
  int in_channels() const { return w_van.channels(); }

  // Throws ContractViolation if kernels disagree in shape, are not 3x3,
  // biases have the wrong length, or bn is sized for another channel count.
  void validate() const;

  // Summed effective kernel and bias (W_sum, b_sum) before batch norm.
  Tensor4 summed_kernel() const;
  std::vector<double> summed_bias() const;
};

struct FusedConv {
  Tensor4 w_final;
  std::vector<double> b_final;
  Activation act = Activation::kRelu;

  int out_channels() const { return w_final.batch(); }
  int in_channels() const { return w_final.channels(); }
  Conv2dParams as_conv() const;
};

// Training form: every branch runs on its own over pixel differences of the
// zero-padded input, the responses are summed, then batch norm and act.
Tensor4 eeconv_forward_train(const Tensor4& x, const ConvBranchSet& branches);
FusedConv fuse(const ConvBranchSet& branches);
Tensor4 eeconv_forward_fused(const Tensor4& x, const FusedConv& fused);

// --- cost accounting ------------------------------------------------------

struct ConvShape {
  int batch = 1;
  int in_channels = 1;
  int out_channels = 1;
  int height = 1;  // input spatial size
  int width = 1;
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  int padding = 1;
  int groups = 1;
};

// Multiply-accumulates: out_elems * in_channels_per_group * k_h * k_w.
std::uint64_t flop_count(const ConvShape& s);
// A fused EEConv is a single 3x3 same-padded convolution.
std::uint64_t eeconv_fused_macs(int batch, int in_channels, int out_channels,
                                int height, int width);
// Training form evaluated branch by branch: four 3x3 convolutions.
std::uint64_t eeconv_branchwise_macs(int batch, int in_channels,
                                     int out_channels, int height, int width);

// --- residual block -------------------------------------------------------

struct ProjectionShortcut {
  Conv2dParams conv;  // 1x1, carries the stride
  BatchNormParams bn;
};

// out = act(eeconv(act(bn1(conv1(x)))) + shortcut(x)); the shortcut is the
// identity when absent.
struct EEBlockParams {
  Conv2dParams conv1;
  BatchNormParams bn1;
  std::variant<ConvBranchSet, FusedConv> eeconv;
  std::optional<ProjectionShortcut> shortcut;
  Activation act = Activation::kRelu;
};

Tensor4 eeblock_forward(const Tensor4& x, const EEBlockParams& p);

// Same block with the EEConv slot replaced by its fused form.
EEBlockParams fuse_block(const EEBlockParams& p);

Tensor4 ee_resnet_stage(const Tensor4& x, std::span<const EEBlockParams> blocks);

// ResNet basic-block layout: stage i has width base_width * 2^i and its first
// block downsamples by 2 (except stage 0) through a projection shortcut.
struct EEResNetLayout {
  int in_channels = 3;
  int base_width = 64;
  std::vector<int> blocks_per_stage{2, 2, 2, 2};
};

using EEResNet = std::vector<std::vector<EEBlockParams>>;

ConvBranchSet random_branch_set(int in_channels, int out_channels, Rng& rng);
EEBlockParams random_eeblock(int in_channels, int out_channels, int stride,
                             Rng& rng);
EEResNet build_ee_resnet(const EEResNetLayout& layout, Rng& rng);

// Runs every stage in order; when `trace` is given, the output shape of each
// stage is appended to it.
Tensor4 ee_resnet_forward(const Tensor4& x, const EEResNet& net,
                          std::vector<Shape4>* trace = nullptr);

}  // namespace tinydef
