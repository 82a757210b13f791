#include "tinydef/random_init.h"

namespace tinydef {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1)));
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<double> random_vector(std::size_t n, Rng& rng, double lo,
                                  double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return v;
}

Tensor4 random_tensor(const Shape4& shape, Rng& rng, double lo, double hi) {
  return Tensor4(shape, random_vector(shape.count(), rng, lo, hi));
}

BatchNormParams random_batchnorm(int channels, Rng& rng) {
  const auto n = static_cast<std::size_t>(channels);
  auto gamma = random_vector(n, rng, 0.5, 1.5);
  auto beta = random_vector(n, rng, -0.5, 0.5);
  auto mean = random_vector(n, rng, -0.5, 0.5);
  auto var = random_vector(n, rng, 0.5, 2.0);
  return BatchNormParams(std::move(gamma), std::move(beta), std::move(mean),
                         std::move(var));
}

Conv2dParams random_conv(const ConvSpec& spec, Rng& rng, double scale) {
  Tensor4 w = random_tensor(
      Shape4{spec.out_channels, spec.in_channels / spec.groups, spec.kernel_h,
             spec.kernel_w},
      rng, -scale, scale);
  std::optional<std::vector<double>> bias;
  if (spec.bias) {
    bias = random_vector(static_cast<std::size_t>(spec.out_channels), rng);
  }
  return Conv2dParams(std::move(w), std::move(bias), spec.stride, spec.padding,
                      spec.groups);
}

}  // namespace tinydef
