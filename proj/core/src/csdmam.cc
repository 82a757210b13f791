#include "tinydef/csdmam.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace tinydef {

namespace {

void require_pointwise(const Conv2dParams& c, int channels, const char* what) {
  if (c.kernel_h() != 1 || c.kernel_w() != 1 || c.in_channels() != channels ||
      c.out_channels() != channels || c.groups() != 1 || c.stride() != 1) {
    throw ContractViolation(std::string(what) + ": expected 1x1 conv " +
                            std::to_string(channels) + " -> " +
                            std::to_string(channels));
  }
}

void require_depthwise(const Conv2dParams& c, int channels, int kh, int kw,
                       const char* what) {
  if (c.groups() != channels || c.in_channels() != channels ||
      c.out_channels() != channels || c.kernel_h() != kh ||
      c.kernel_w() != kw || c.stride() != 1 || c.pad_h() != kh / 2 ||
      c.pad_w() != kw / 2) {
    throw ContractViolation(std::string(what) + ": expected depthwise " +
                            std::to_string(kh) + "x" + std::to_string(kw) +
                            " same-padded conv over " +
                            std::to_string(channels) + " channels");
  }
}

// Per-(batch, channel) attention weights, shape (B, C, 1, 1).
Tensor4 attention_weights(const Tensor4& pooled, const Conv2dParams& conv,
                          const std::optional<double>& pinned) {
  if (pinned) return Tensor4(pooled.shape(), *pinned);
  return activation(conv2d(pooled, conv), Activation::kSigmoid);
}

}  // namespace

void FscaParams::validate(int channels) const {
  require_pointwise(chan_attn_conv, channels, "fsca chan_attn_conv");
  require_pointwise(sc_attn_conv, channels, "fsca sc_attn_conv");
}

Tensor4 fsca_forward(const Tensor4& x, const FscaParams& p, FscaTrace* trace) {
  p.validate(x.channels());
  const Tensor4 pooled = gap(x);
  const Tensor4 a_c =
      attention_weights(pooled, p.chan_attn_conv, p.pinned_channel_attn);

  ComplexTensor4 spectrum = dft2(x);
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      const double w = a_c(b, c, 0, 0);
      for (auto& v : spectrum.plane(b, c)) v *= w;
    }
  }
  const ComplexTensor4 spatial = idft2(spectrum);

  const double residue = spatial.max_abs_imag();
  const double tolerance = 1e-8 * x.max_abs();
  if (trace) {
    trace->max_imag_residue = residue;
    trace->imag_tolerance = tolerance;
  }
  if (residue > tolerance) {
    throw ConsistencyError("fsca: imaginary residue " + std::to_string(residue) +
                           " exceeds " + std::to_string(tolerance));
  }

  Tensor4 out = spatial.real();
  const Tensor4 a_sc =
      attention_weights(pooled, p.sc_attn_conv, p.pinned_spatial_attn);
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      const double w = a_sc(b, c, 0, 0);
      for (double& v : out.plane(b, c)) v *= w;
    }
  }
  return out;
}

void DmamParams::validate(int channels) const {
  if (k < 1 || k % 2 == 0) {
    throw ContractViolation("dmam: strip kernel size must be odd and >= 1");
  }
  require_pointwise(proj_in, channels, "dmam proj_in");
  require_pointwise(proj_out, channels, "dmam proj_out");
  require_depthwise(dw_kk, channels, k, k, "dmam dw_kk");
  require_depthwise(dw_1k, channels, 1, k, "dmam dw_1k");
  require_depthwise(dw_k1, channels, k, 1, "dmam dw_k1");
  require_depthwise(dw_11, channels, 1, 1, "dmam dw_11");
  fsca.validate(channels);
}

Tensor4 dmam_forward(const Tensor4& x, const DmamParams& p, DmamTaps* taps) {
  p.validate(x.channels());
  const Tensor4 xn = conv2d(x, p.proj_in);
  const Tensor4 f = fsca_forward(xn, p.fsca);

  // Fixed summation order: residual, 1xk, kx1, kxk, 1x1, fsca.
  Tensor4 y = x;
  y = add(y, conv2d(xn, p.dw_1k));
  y = add(y, conv2d(xn, p.dw_k1));
  y = add(y, conv2d(xn, p.dw_kk));
  y = add(y, conv2d(xn, p.dw_11));
  y = add(y, f);

  Tensor4 out = conv2d(y, p.proj_out);
  if (taps) *taps = DmamTaps{xn, f, y};
  return out;
}

int csp_branch_channels(int channels, double split_ratio) {
  if (channels < 2) {
    throw ContractViolation("csdmam: need at least 2 channels");
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw ContractViolation("csdmam: split_ratio must lie in (0, 1)");
  }
  const int n = static_cast<int>(std::lround(channels * split_ratio));
  return std::clamp(n, 1, channels - 1);
}

int CsdmamParams::branch_channels(int channels) const {
  return csp_branch_channels(channels, split_ratio);
}

Tensor4 csdmam_forward(const Tensor4& x, const CsdmamParams& p,
                       CsdmamTaps* taps) {
  const int nb = p.branch_channels(x.channels());
  const int sizes[] = {nb, x.channels() - nb};
  auto halves = split_channels(x, sizes);
  if (p.merge_conv.in_channels() != x.channels()) {
    throw ContractViolation("csdmam: merge conv expects " +
                            std::to_string(p.merge_conv.in_channels()) +
                            " channels, halves total " +
                            std::to_string(x.channels()));
  }

  DmamTaps inner;
  Tensor4 processed = dmam_forward(halves[0], p.inner, taps ? &inner : nullptr);
  const Tensor4 parts[] = {processed, halves[1]};
  Tensor4 merged_in = concat_channels(parts);
  Tensor4 out = conv2d(merged_in, p.merge_conv);
  if (taps) {
    *taps = CsdmamTaps{std::move(halves[0]), std::move(halves[1]),
                       std::move(processed), std::move(merged_in), out,
                       std::move(inner)};
  }
  return out;
}

Conv2dParams identity_conv1x1(int channels) {
  Tensor4 w(Shape4{channels, channels, 1, 1});
  for (int c = 0; c < channels; ++c) w(c, c, 0, 0) = 1.0;
  return Conv2dParams(std::move(w), std::nullopt);
}

Conv2dParams zero_conv1x1(int channels) {
  return Conv2dParams(Tensor4(Shape4{channels, channels, 1, 1}), std::nullopt);
}

Conv2dParams depthwise_center(int channels, int kh, int kw, double center) {
  Tensor4 w(Shape4{channels, 1, kh, kw});
  for (int c = 0; c < channels; ++c) w(c, 0, kh / 2, kw / 2) = center;
  return Conv2dParams(std::move(w), std::nullopt, 1, Padding2d{kh / 2, kw / 2},
                      channels);
}

DmamParams random_dmam(int channels, int k, Rng& rng) {
  auto pointwise = [&](double s) {
    return random_conv(ConvSpec{channels, channels, 1, 1, 1, {0, 0}, 1, true},
                       rng, s);
  };
  auto depthwise = [&](int kh, int kw) {
    return random_conv(ConvSpec{channels, channels, kh, kw, 1,
                                {kh / 2, kw / 2}, channels, true},
                       rng, 1.0 / std::sqrt(static_cast<double>(kh * kw)));
  };
  Conv2dParams proj_in = pointwise(0.5);
  Conv2dParams dw_kk = depthwise(k, k);
  Conv2dParams dw_1k = depthwise(1, k);
  Conv2dParams dw_k1 = depthwise(k, 1);
  Conv2dParams dw_11 = depthwise(1, 1);
  FscaParams fsca{pointwise(1.0), pointwise(1.0), std::nullopt, std::nullopt};
  Conv2dParams proj_out = pointwise(0.5);
  return DmamParams{std::move(proj_in), k,
                    std::move(dw_kk),   std::move(dw_1k),
                    std::move(dw_k1),   std::move(dw_11),
                    std::move(fsca),    std::move(proj_out)};
}

CsdmamParams random_csdmam(int channels, int k, Rng& rng) {
  const int nb = csp_branch_channels(channels, 0.5);
  DmamParams inner = random_dmam(nb, k, rng);
  Conv2dParams merge = random_conv(
      ConvSpec{channels, channels, 1, 1, 1, {0, 0}, 1, true}, rng, 0.5);
  return CsdmamParams{std::move(inner), std::move(merge), 0.5};
}

}  // namespace tinydef
