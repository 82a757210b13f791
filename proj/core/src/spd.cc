#include "tinydef/spd.h"

#include <string>

#include "tinydef/diffconv.h"

namespace tinydef {

Tensor4 spd_rearrange(const Tensor4& x, int scale) {
  if (scale < 1) throw ContractViolation("spd: scale must be >= 1");
  if (x.height() % scale != 0 || x.width() % scale != 0) {
    throw ContractViolation("spd: spatial dims " + to_string(x.shape()) +
                            " not divisible by scale " + std::to_string(scale));
  }
  const int c_in = x.channels();
  const int oh = x.height() / scale, ow = x.width() / scale;
  Tensor4 out(Shape4{x.batch(), c_in * scale * scale, oh, ow});
  for (int b = 0; b < x.batch(); ++b) {
    for (int i = 0; i < scale; ++i) {
      for (int j = 0; j < scale; ++j) {
        const int slab = (i * scale + j) * c_in;
        for (int c = 0; c < c_in; ++c) {
          for (int u = 0; u < oh; ++u) {
            for (int v = 0; v < ow; ++v) {
              out(b, slab + c, u, v) = x(b, c, u * scale + i, v * scale + j);
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor4 spd_inverse(const Tensor4& xp, int scale) {
  if (scale < 1) throw ContractViolation("spd_inverse: scale must be >= 1");
  const int blocks = scale * scale;
  if (xp.channels() % blocks != 0) {
    throw ContractViolation("spd_inverse: channels " +
                            std::to_string(xp.channels()) +
                            " not divisible by scale^2");
  }
  const int c_out = xp.channels() / blocks;
  Tensor4 out(Shape4{xp.batch(), c_out, xp.height() * scale, xp.width() * scale});
  for (int b = 0; b < xp.batch(); ++b) {
    for (int i = 0; i < scale; ++i) {
      for (int j = 0; j < scale; ++j) {
        const int slab = (i * scale + j) * c_out;
        for (int c = 0; c < c_out; ++c) {
          for (int u = 0; u < xp.height(); ++u) {
            for (int v = 0; v < xp.width(); ++v) {
              out(b, c, u * scale + i, v * scale + j) = xp(b, slab + c, u, v);
            }
          }
        }
      }
    }
  }
  return out;
}

SpdConfig::SpdConfig(Conv2dParams follow_conv, int scale)
    : follow_conv_(std::move(follow_conv)), scale_(scale) {
  if (scale_ < 2) throw ContractViolation("SpdConfig: scale must be >= 2");
  if (follow_conv_.kernel_h() != 3 || follow_conv_.kernel_w() != 3) {
    throw ContractViolation("SpdConfig: follow conv must be 3x3");
  }
  if (follow_conv_.stride() != 1) {
    throw ContractViolation("SpdConfig: follow conv must have stride 1");
  }
  if (follow_conv_.pad_h() != 1 || follow_conv_.pad_w() != 1) {
    throw ContractViolation("SpdConfig: follow conv must use same padding");
  }
  if (follow_conv_.in_channels() % (scale_ * scale_) != 0) {
    throw ContractViolation(
        "SpdConfig: follow conv input channels must be a multiple of scale^2");
  }
}

Tensor4 spdconv_forward(const Tensor4& x, const SpdConfig& cfg) {
  return conv2d(spd_rearrange(x, cfg.scale()), cfg.follow_conv());
}

SpdCostReport spd_cost_report(const Shape4& input, int out_channels,
                              int scale) {
  const int c = input.channels;
  SpdCostReport r;
  r.spdconv_macs = flop_count(ConvShape{input.batch, c * scale * scale,
                                        out_channels, input.height / scale,
                                        input.width / scale, 3, 3, 1, 1, 1});
  r.strided_conv_macs = flop_count(ConvShape{input.batch, c, out_channels,
                                             input.height, input.width, 3, 3,
                                             scale, 1, 1});
  r.macs_per_output_ratio = static_cast<double>(r.spdconv_macs) /
                            static_cast<double>(r.strided_conv_macs);
  r.output_elems_vs_stride1 = 1.0 / (scale * scale);
  return r;
}

}  // namespace tinydef
