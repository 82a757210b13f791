// Cross-stage dual-domain multi-scale attention (CSDMAM).
//
// The inner block (DMAM) projects its input with a 1x1 conv, then sums four
// depthwise branches (k x k, 1 x k, k x 1, 1 x 1) and a frequency-domain
// attention branch (FSCA) on top of an identity residual, and projects back.
// The cross-stage wrapper runs DMAM on one channel half only and merges it
// with the untouched half through a 1x1 conv.
#pragma once

#include <optional>

#include "tinydef/random_init.h"
#include "tinydef/tensor.h"

namespace tinydef {

inline constexpr int kDefaultStripKernel = 31;

// Both attention convs are 1x1, C -> C, applied to the pooled descriptor.
// The pinned values replace sigmoid(conv(gap(x))) by a constant; tests use
// them to isolate the Fourier path.
struct FscaParams {
  Conv2dParams chan_attn_conv;
  Conv2dParams sc_attn_conv;
  std::optional<double> pinned_channel_attn;
  std::optional<double> pinned_spatial_attn;

  void validate(int channels) const;
};

struct FscaTrace {
  double max_imag_residue = 0.0;
  double imag_tolerance = 0.0;
};

// Imaginary residue of the inverse transform above 1e-8 * max|x| raises
// ConsistencyError.
Tensor4 fsca_forward(const Tensor4& x, const FscaParams& p,
                     FscaTrace* trace = nullptr);

struct DmamParams {
  Conv2dParams proj_in;  // 1x1, C -> C
  int k = kDefaultStripKernel;
  Conv2dParams dw_kk;
  Conv2dParams dw_1k;
  Conv2dParams dw_k1;
  Conv2dParams dw_11;
  FscaParams fsca;
  Conv2dParams proj_out;  // 1x1, C -> C

  void validate(int channels) const;
};

struct DmamTaps {
  Tensor4 projected;   // X_n
  Tensor4 fsca;        // FSCA branch output
  Tensor4 branch_sum;  // residual plus all branches, before proj_out
};

Tensor4 dmam_forward(const Tensor4& x, const DmamParams& p,
                     DmamTaps* taps = nullptr);

// Channels routed through DMAM for a C-channel input, in [1, C-1].
int csp_branch_channels(int channels, double split_ratio);

struct CsdmamParams {
  DmamParams inner;
  Conv2dParams merge_conv;  // 1x1 over [branch half, identity half]
  double split_ratio = 0.5;

  int branch_channels(int channels) const;
};

struct CsdmamTaps {
  Tensor4 branch_in;
  Tensor4 identity_half;
  Tensor4 dmam_out;
  Tensor4 pre_merge;
  Tensor4 output;
  DmamTaps inner;
};

Tensor4 csdmam_forward(const Tensor4& x, const CsdmamParams& p,
                       CsdmamTaps* taps = nullptr);

// Convenience constructors.
Conv2dParams identity_conv1x1(int channels);
Conv2dParams zero_conv1x1(int channels);
// Depthwise kernel of size kh x kw, same padding; a single tap of `center`
// at the middle, zeros elsewhere.
Conv2dParams depthwise_center(int channels, int kh, int kw, double center);

DmamParams random_dmam(int channels, int k, Rng& rng);
CsdmamParams random_csdmam(int channels, int k, Rng& rng);

}  // namespace tinydef
