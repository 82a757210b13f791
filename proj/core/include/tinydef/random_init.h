// Seeded parameter and tensor initializers shared by tests, the CLI and the
// benchmarks. All draws come from std::mt19937_64 so a seed fully determines
// the result on a given standard library.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tinydef/tensor.h"

namespace tinydef {

using Rng = std::mt19937_64;

// Derives an independent stream from (seed, stream) with a splitmix64 mix.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

double uniform(Rng& rng, double lo, double hi);
std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -0.5,
                                  double hi = 0.5);
Tensor4 random_tensor(const Shape4& shape, Rng& rng, double lo = -1.0,
                      double hi = 1.0);

// gamma in [0.5, 1.5], beta and mean in [-0.5, 0.5], variance in [0.5, 2].
BatchNormParams random_batchnorm(int channels, Rng& rng);

struct ConvSpec {
  int out_channels;
  int in_channels;
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  Padding2d padding{1, 1};
  int groups = 1;
  bool bias = true;
};

// Weights uniform in [-scale, scale]; bias (if any) in [-0.5, 0.5].
Conv2dParams random_conv(const ConvSpec& spec, Rng& rng, double scale = 0.5);

}  // namespace tinydef
