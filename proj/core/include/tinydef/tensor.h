// Dense rank-4 tensors and the handful of layer primitives the rest of the
// library is built from. Everything is double precision and every operation
// is a pure function of its arguments.
#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tinydef {

// Raised when a caller breaks an operation's shape or value contract.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an internal numerical self-check fails.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape4 {
  int batch = 1;
  int channels = 1;
  int height = 1;
  int width = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(batch) * channels * height * width;
  }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * width;
  }
  bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& s);

// Values are stored row-major in (batch, channel, height, width) order.
class Tensor4 {
 public:
  Tensor4() : Tensor4(Shape4{}) {}
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  // Throws ContractViolation if the length is wrong or a value is not finite.
  Tensor4(Shape4 shape, std::vector<double> values);

  const Shape4& shape() const { return shape_; }
  int batch() const { return shape_.batch; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(int b, int c, int h, int w) const {
    return ((static_cast<std::size_t>(b) * shape_.channels + c) *
                shape_.height + h) * shape_.width + w;
  }
  double operator()(int b, int c, int h, int w) const {
    return values_[index(b, c, h, w)];
  }
  double& operator()(int b, int c, int h, int w) {
    return values_[index(b, c, h, w)];
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const double> plane(int b, int c) const;
  std::span<double> plane(int b, int c);

  bool all_finite() const;
  double max_abs() const;

  bool operator==(const Tensor4&) const = default;

 private:
  Shape4 shape_;
  std::vector<double> values_;
};

class ComplexTensor4 {
 public:
  using value_type = std::complex<double>;

  explicit ComplexTensor4(Shape4 shape);
  ComplexTensor4(Shape4 shape, std::vector<value_type> values);
  // Lifts a real tensor (imaginary parts zero).
  explicit ComplexTensor4(const Tensor4& real);

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(int b, int c, int h, int w) const {
    return ((static_cast<std::size_t>(b) * shape_.channels + c) *
                shape_.height + h) * shape_.width + w;
  }
  value_type operator()(int b, int c, int h, int w) const {
    return values_[index(b, c, h, w)];
  }
  value_type& operator()(int b, int c, int h, int w) {
    return values_[index(b, c, h, w)];
  }
  std::span<const value_type> values() const { return values_; }
  std::span<value_type> values() { return values_; }
  std::span<const value_type> plane(int b, int c) const;
  std::span<value_type> plane(int b, int c);

  Tensor4 real() const;
  double max_abs_imag() const;

 private:
  Shape4 shape_;
  std::vector<value_type> values_;
};

struct Padding2d {
  int h = 0;
  int w = 0;
};

// Weights are laid out (out_channels, in_channels / groups, k_h, k_w).
class Conv2dParams {
 public:
  Conv2dParams(Tensor4 weights, std::optional<std::vector<double>> bias,
               int stride = 1, int padding = 0, int groups = 1);
  Conv2dParams(Tensor4 weights, std::optional<std::vector<double>> bias,
               int stride, Padding2d padding, int groups = 1);

  const Tensor4& weights() const { return weights_; }
  const std::optional<std::vector<double>>& bias() const { return bias_; }
  int stride() const { return stride_; }
  int pad_h() const { return padding_.h; }
  int pad_w() const { return padding_.w; }
  int groups() const { return groups_; }
  int out_channels() const { return weights_.batch(); }
  int in_channels() const { return weights_.channels() * groups_; }
  int kernel_h() const { return weights_.height(); }
  int kernel_w() const { return weights_.width(); }

  // Output shape for an input of shape `in`; throws on any mismatch.
  Shape4 output_shape(const Shape4& in) const;

 private:
  Tensor4 weights_;
  std::optional<std::vector<double>> bias_;
  int stride_;
  Padding2d padding_;
  int groups_;
};

// "Same" padding for an odd kernel at stride 1.
constexpr int same_padding(int kernel) { return kernel / 2; }

class BatchNormParams {
 public:
  BatchNormParams(std::vector<double> gamma, std::vector<double> beta,
                  std::vector<double> mean, std::vector<double> variance,
                  double epsilon = 1e-5);

  // gamma = 1, beta = 0, mean = 0, variance = 1 - eps: an exact no-op.
  static BatchNormParams identity(int channels, double epsilon = 1e-5);

  int channels() const { return static_cast<int>(gamma_.size()); }
  const std::vector<double>& gamma() const { return gamma_; }
  const std::vector<double>& beta() const { return beta_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& variance() const { return variance_; }
  double epsilon() const { return epsilon_; }

  // gamma_c / sqrt(var_c + eps)
  double scale(int c) const;

 private:
  std::vector<double> gamma_;
  std::vector<double> beta_;
  std::vector<double> mean_;
  std::vector<double> variance_;
  double epsilon_;
};

enum class Activation { kRelu, kSigmoid, kIdentity };

std::string_view to_string(Activation a);
// Accepts "relu", "sigmoid", "identity".
Activation parse_activation(std::string_view name);
double activate(double v, Activation a);

// Zero-padded cross-correlation (no kernel flip).
Tensor4 conv2d(const Tensor4& x, const Conv2dParams& p);
Tensor4 batchnorm_infer(const Tensor4& x, const BatchNormParams& bn);
Tensor4 activation(const Tensor4& x, Activation kind);
// Global average pooling to (batch, channels, 1, 1).
Tensor4 gap(const Tensor4& x);

// Unnormalized forward transform over each (batch, channel) plane.
ComplexTensor4 dft2(const Tensor4& x);
ComplexTensor4 dft2(const ComplexTensor4& x);
// Inverse transform including the 1/(H*W) factor.
ComplexTensor4 idft2(const ComplexTensor4& xf);

Tensor4 concat_channels(std::span<const Tensor4> parts);
std::vector<Tensor4> split_channels(const Tensor4& x, std::span<const int> sizes);

// Elementwise helpers used by the composite blocks.
Tensor4 add(const Tensor4& a, const Tensor4& b);
Tensor4 scale(const Tensor4& a, double s);
double max_abs_diff(const Tensor4& a, const Tensor4& b);

}  // namespace tinydef
