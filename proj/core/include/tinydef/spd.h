// Space-to-depth downsampling: every scale x scale spatial block is moved into
// the channel axis, block offset (i, j) contributing one full C-channel slab
// at channel offset (i * scale + j) * C. No value is dropped.
#pragma once

#include <cstdint>

#include "tinydef/tensor.h"

namespace tinydef {

inline constexpr int kDefaultSpdScale = 2;

Tensor4 spd_rearrange(const Tensor4& x, int scale = kDefaultSpdScale);
Tensor4 spd_inverse(const Tensor4& xp, int scale = kDefaultSpdScale);

// Rearrangement followed by a 3x3, stride-1, same-padded convolution whose
// input channel count is C * scale^2.
class SpdConfig {
 public:
  explicit SpdConfig(Conv2dParams follow_conv, int scale = kDefaultSpdScale);

  int scale() const { return scale_; }
  const Conv2dParams& follow_conv() const { return follow_conv_; }
  int in_channels() const { return follow_conv_.in_channels() / (scale_ * scale_); }
  int out_channels() const { return follow_conv_.out_channels(); }

 private:
  Conv2dParams follow_conv_;
  int scale_;
};

Tensor4 spdconv_forward(const Tensor4& x, const SpdConfig& cfg);

// MAC comparison between SPD + 3x3 stride-1 conv and a plain 3x3 stride-2
// conv producing the same output resolution and channel count.
struct SpdCostReport {
  std::uint64_t spdconv_macs = 0;
  std::uint64_t strided_conv_macs = 0;
  double macs_per_output_ratio = 0.0;  // spdconv / strided, per output element
  double output_elems_vs_stride1 = 0.0;
};

SpdCostReport spd_cost_report(const Shape4& input, int out_channels,
                              int scale = kDefaultSpdScale);

}  // namespace tinydef
