#include "tinydef/diffconv.h"

#include <string>
#include <type_traits>

namespace tinydef {

namespace {

void require_3x3(const Tensor4& w, const char* what) {
  if (w.height() != 3 || w.width() != 3) {
    throw ContractViolation(std::string(what) + ": kernel must be 3x3, got " +
                            std::to_string(w.height()) + "x" +
                            std::to_string(w.width()));
  }
}

void require_len(const std::vector<double>& v, int n, const char* what) {
  if (static_cast<int>(v.size()) != n) {
    throw ContractViolation(std::string(what) + " must have length " +
                            std::to_string(n));
  }
}

enum class DiffKind { kCentral, kHorizontal, kVertical, kVanilla };

double padded(const Tensor4& x, int b, int c, int y, int xx) {
  if (y < 0 || y >= x.height() || xx < 0 || xx >= x.width()) return 0.0;
  return x(b, c, y, xx);
}

// One branch evaluated directly on pixel differences over the zero-padded
// input, without going through an effective kernel.
Tensor4 branch_response(const Tensor4& x, const Tensor4& w,
                        const std::vector<double>& bias, DiffKind kind) {
  if (x.channels() != w.channels()) {
    throw ContractViolation("eeconv: input has " + std::to_string(x.channels()) +
                            " channels, kernel expects " +
                            std::to_string(w.channels()));
  }
  Tensor4 out(Shape4{x.batch(), w.batch(), x.height(), x.width()});
  for (int b = 0; b < x.batch(); ++b) {
    for (int o = 0; o < w.batch(); ++o) {
      for (int y = 0; y < x.height(); ++y) {
        for (int xx = 0; xx < x.width(); ++xx) {
          double acc = bias[static_cast<std::size_t>(o)];
          for (int i = 0; i < w.channels(); ++i) {
            for (int r = 0; r < 3; ++r) {
              for (int c = 0; c < 3; ++c) {
                const int yy = y + r - 1, xc = xx + c - 1;
                double v = padded(x, b, i, yy, xc);
                switch (kind) {
                  case DiffKind::kCentral:
                    v -= x(b, i, y, xx);
                    break;
                  case DiffKind::kHorizontal:
                    v -= padded(x, b, i, yy, xx + 1 - c);
                    break;
                  case DiffKind::kVertical:
                    v -= padded(x, b, i, y + 1 - r, xc);
                    break;
                  case DiffKind::kVanilla:
                    break;
                }
                acc += w(o, i, r, c) * v;
              }
            }
          }
          out(b, o, y, xx) = acc;
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor4 cdc_effective_kernel(const Tensor4& w) {
  require_3x3(w, "cdc_effective_kernel");
  Tensor4 out = w;
  for (int o = 0; o < w.batch(); ++o) {
    for (int i = 0; i < w.channels(); ++i) {
      double sum = 0.0;
      for (double v : w.plane(o, i)) sum += v;
      out(o, i, 1, 1) = w(o, i, 1, 1) - sum;
    }
  }
  return out;
}

Tensor4 hdc_effective_kernel(const Tensor4& w) {
  require_3x3(w, "hdc_effective_kernel");
  Tensor4 out(w.shape());
  for (int o = 0; o < w.batch(); ++o) {
    for (int i = 0; i < w.channels(); ++i) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          out(o, i, r, c) = w(o, i, r, c) - w(o, i, r, 2 - c);
        }
      }
    }
  }
  return out;
}

Tensor4 vdc_effective_kernel(const Tensor4& w) {
  require_3x3(w, "vdc_effective_kernel");
  Tensor4 out(w.shape());
  for (int o = 0; o < w.batch(); ++o) {
    for (int i = 0; i < w.channels(); ++i) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          out(o, i, r, c) = w(o, i, r, c) - w(o, i, 2 - r, c);
        }
      }
    }
  }
  return out;
}

void ConvBranchSet::validate() const {
  require_3x3(w_van, "ConvBranchSet");
  for (const Tensor4* w : {&w_cdc, &w_hdc, &w_vdc}) {
    if (w->shape() != w_van.shape()) {
      throw ContractViolation("ConvBranchSet: branch kernels differ in shape");
    }
  }
  const int oc = out_channels();
  require_len(b_cdc, oc, "ConvBranchSet b_cdc");
  require_len(b_hdc, oc, "ConvBranchSet b_hdc");
  require_len(b_vdc, oc, "ConvBranchSet b_vdc");
  require_len(b_van, oc, "ConvBranchSet b_van");
  if (bn.channels() != oc) {
    throw ContractViolation("ConvBranchSet: bn channel count != out_channels");
  }
}

Tensor4 ConvBranchSet::summed_kernel() const {
  validate();
  Tensor4 sum = cdc_effective_kernel(w_cdc);
  sum = add(sum, hdc_effective_kernel(w_hdc));
  sum = add(sum, vdc_effective_kernel(w_vdc));
  if (mode == BranchMode::kAllFour) sum = add(sum, w_van);
  return sum;
}

std::vector<double> ConvBranchSet::summed_bias() const {
  validate();
  std::vector<double> b(b_cdc.size());
  for (std::size_t c = 0; c < b.size(); ++c) {
    b[c] = b_cdc[c] + b_hdc[c] + b_vdc[c];
    if (mode == BranchMode::kAllFour) b[c] += b_van[c];
  }
  return b;
}

Conv2dParams FusedConv::as_conv() const {
  return Conv2dParams(w_final, b_final, 1, same_padding(3), 1);
}

Tensor4 eeconv_forward_train(const Tensor4& x, const ConvBranchSet& branches) {
  branches.validate();
  Tensor4 sum = branch_response(x, branches.w_cdc, branches.b_cdc, DiffKind::kCentral);
  sum = add(sum, branch_response(x, branches.w_hdc, branches.b_hdc,
                                 DiffKind::kHorizontal));
  sum = add(sum, branch_response(x, branches.w_vdc, branches.b_vdc,
                                 DiffKind::kVertical));
  if (branches.mode == BranchMode::kAllFour) {
    sum = add(sum, branch_response(x, branches.w_van, branches.b_van,
                                   DiffKind::kVanilla));
  }
  return activation(batchnorm_infer(sum, branches.bn), branches.act);
}

FusedConv fuse(const ConvBranchSet& branches) {
  Tensor4 w = branches.summed_kernel();
  std::vector<double> b = branches.summed_bias();
  const BatchNormParams& bn = branches.bn;
  for (int c = 0; c < w.batch(); ++c) {
    const double alpha = bn.scale(c);
    for (int i = 0; i < w.channels(); ++i) {
      for (double& v : w.plane(c, i)) v *= alpha;
    }
    b[c] = alpha * (b[c] - bn.mean()[c]) + bn.beta()[c];
  }
  return FusedConv{std::move(w), std::move(b), branches.act};
}

Tensor4 eeconv_forward_fused(const Tensor4& x, const FusedConv& fused) {
  require_3x3(fused.w_final, "eeconv_forward_fused");
  return activation(conv2d(x, fused.as_conv()), fused.act);
}

std::uint64_t flop_count(const ConvShape& s) {
  if (s.groups < 1 || s.in_channels % s.groups != 0 ||
      s.out_channels % s.groups != 0 || s.stride < 1) {
    throw ContractViolation("flop_count: invalid conv shape");
  }
  const int oh = s.height + 2 * s.padding - s.kernel_h;
  const int ow = s.width + 2 * s.padding - s.kernel_w;
  if (oh < 0 || ow < 0) {
    throw ContractViolation("flop_count: empty output");
  }
  const std::uint64_t out_elems = static_cast<std::uint64_t>(s.batch) *
                                  s.out_channels * (oh / s.stride + 1) *
                                  (ow / s.stride + 1);
  return out_elems * static_cast<std::uint64_t>(s.in_channels / s.groups) *
         s.kernel_h * s.kernel_w;
}

std::uint64_t eeconv_fused_macs(int batch, int in_channels, int out_channels,
                                int height, int width) {
  return flop_count(ConvShape{batch, in_channels, out_channels, height, width,
                              3, 3, 1, 1, 1});
}

std::uint64_t eeconv_branchwise_macs(int batch, int in_channels,
                                     int out_channels, int height, int width) {
  return 4 * eeconv_fused_macs(batch, in_channels, out_channels, height, width);
}

Tensor4 eeblock_forward(const Tensor4& x, const EEBlockParams& p) {
  Tensor4 h = activation(batchnorm_infer(conv2d(x, p.conv1), p.bn1), p.act);
  h = std::visit(
      [&h](const auto& ee) -> Tensor4 {
        using T = std::decay_t<decltype(ee)>;
        if constexpr (std::is_same_v<T, ConvBranchSet>) {
          return eeconv_forward_train(h, ee);
        } else {
          return eeconv_forward_fused(h, ee);
        }
      },
      p.eeconv);
  Tensor4 skip =
      p.shortcut ? batchnorm_infer(conv2d(x, p.shortcut->conv), p.shortcut->bn)
                 : x;
  if (skip.shape() != h.shape()) {
    throw ContractViolation("eeblock: shortcut shape " + to_string(skip.shape()) +
                            " != main branch shape " + to_string(h.shape()));
  }
  return activation(add(h, skip), p.act);
}

EEBlockParams fuse_block(const EEBlockParams& p) {
  EEBlockParams out = p;
  if (const auto* branches = std::get_if<ConvBranchSet>(&p.eeconv)) {
    out.eeconv = fuse(*branches);
  }
  return out;
}

Tensor4 ee_resnet_stage(const Tensor4& x,
                        std::span<const EEBlockParams> blocks) {
  Tensor4 h = x;
  for (const auto& b : blocks) h = eeblock_forward(h, b);
  return h;
}

ConvBranchSet random_branch_set(int in_channels, int out_channels, Rng& rng) {
  const Shape4 ks{out_channels, in_channels, 3, 3};
  const auto oc = static_cast<std::size_t>(out_channels);
  ConvBranchSet set{
      random_tensor(ks, rng, -0.5, 0.5), random_tensor(ks, rng, -0.5, 0.5),
      random_tensor(ks, rng, -0.5, 0.5), random_tensor(ks, rng, -0.5, 0.5),
      random_vector(oc, rng),            random_vector(oc, rng),
      random_vector(oc, rng),            random_vector(oc, rng),
      random_batchnorm(out_channels, rng)};
  return set;
}

EEBlockParams random_eeblock(int in_channels, int out_channels, int stride,
                             Rng& rng) {
  Conv2dParams conv1 = random_conv(
      ConvSpec{out_channels, in_channels, 3, 3, stride, {1, 1}, 1, false}, rng,
      0.3);
  BatchNormParams bn1 = random_batchnorm(out_channels, rng);
  ConvBranchSet ee = random_branch_set(out_channels, out_channels, rng);
  std::optional<ProjectionShortcut> shortcut;
  if (stride != 1 || in_channels != out_channels) {
    shortcut = ProjectionShortcut{
        random_conv(ConvSpec{out_channels, in_channels, 1, 1, stride, {0, 0},
                             1, false},
                    rng),
        random_batchnorm(out_channels, rng)};
  }
  return EEBlockParams{std::move(conv1), std::move(bn1), std::move(ee),
                       std::move(shortcut)};
}

EEResNet build_ee_resnet(const EEResNetLayout& layout, Rng& rng) {
  if (layout.in_channels < 1 || layout.base_width < 1) {
    throw ContractViolation("build_ee_resnet: widths must be >= 1");
  }
  EEResNet net;
  int in = layout.in_channels;
  for (std::size_t s = 0; s < layout.blocks_per_stage.size(); ++s) {
    const int width = layout.base_width << s;
    std::vector<EEBlockParams> stage;
    for (int b = 0; b < layout.blocks_per_stage[s]; ++b) {
      const int stride = (b == 0 && s > 0) ? 2 : 1;
      stage.push_back(random_eeblock(in, width, stride, rng));
      in = width;
    }
    net.push_back(std::move(stage));
  }
  return net;
}

Tensor4 ee_resnet_forward(const Tensor4& x, const EEResNet& net,
                          std::vector<Shape4>* trace) {
  Tensor4 h = x;
  for (const auto& stage : net) {
    h = ee_resnet_stage(h, stage);
    if (trace) trace->push_back(h.shape());
  }
  return h;
}

}  // namespace tinydef
