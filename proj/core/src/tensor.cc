#include "tinydef/tensor.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tinydef {

namespace {

void check_shape(const Shape4& s) {
  if (s.batch < 1 || s.channels < 1 || s.height < 1 || s.width < 1) {
    throw ContractViolation("tensor dimensions must be >= 1, got " +
                            to_string(s));
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

bool finite_all(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

// Twiddle table exp(-2*pi*i*k/n) for k in [0, n). Indexing with (u*x) mod n
// keeps the argument small, which is what makes the separable transform
// agree with the direct double sum to ~1e-13.
std::vector<std::complex<double>> twiddles(int n) {
  std::vector<std::complex<double>> t(n);
  for (int k = 0; k < n; ++k) {
    const double a = -2.0 * std::numbers::pi * k / n;
    t[k] = {std::cos(a), std::sin(a)};
  }
  return t;
}

// In-place separable 2-D DFT of one plane. `inverse` conjugates the twiddles
// and applies 1/(h*w).
void transform_plane(std::span<std::complex<double>> plane, int h, int w,
                     bool inverse) {
  const auto tw_w = twiddles(w);
  const auto tw_h = twiddles(h);
  auto tw = [inverse](const std::vector<std::complex<double>>& t,
                      std::size_t k) {
    return inverse ? std::conj(t[k]) : t[k];
  };

  std::vector<std::complex<double>> line(std::max(h, w));
  for (int r = 0; r < h; ++r) {
    auto row = plane.subspan(static_cast<std::size_t>(r) * w, w);
    for (int v = 0; v < w; ++v) {
      std::complex<double> acc{0.0, 0.0};
      for (int x = 0; x < w; ++x) {
        acc += row[x] * tw(tw_w, (static_cast<std::size_t>(v) * x) % w);
      }
      line[v] = acc;
    }
    std::copy_n(line.begin(), w, row.begin());
  }
  for (int col = 0; col < w; ++col) {
    for (int u = 0; u < h; ++u) {
      std::complex<double> acc{0.0, 0.0};
      for (int y = 0; y < h; ++y) {
        acc += plane[static_cast<std::size_t>(y) * w + col] *
               tw(tw_h, (static_cast<std::size_t>(u) * y) % h);
      }
      line[u] = acc;
    }
    for (int u = 0; u < h; ++u) {
      plane[static_cast<std::size_t>(u) * w + col] = line[u];
    }
  }
  if (inverse) {
    const double norm = 1.0 / (static_cast<double>(h) * w);
    for (auto& v : plane) v *= norm;
  }
}

}  // namespace

std::string to_string(const Shape4& s) {
  std::ostringstream os;
  os << "(" << s.batch << ", " << s.channels << ", " << s.height << ", "
     << s.width << ")";
  return os.str();
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape) {
  check_shape(shape_);
  require(std::isfinite(fill), "tensor fill value must be finite");
  values_.assign(shape_.count(), fill);
}

Tensor4::Tensor4(Shape4 shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  check_shape(shape_);
  require(values_.size() == shape_.count(),
          "tensor value count does not match shape " + to_string(shape_));
  require(finite_all(values_), "tensor values must be finite");
}

std::span<const double> Tensor4::plane(int b, int c) const {
  return std::span<const double>(values_).subspan(index(b, c, 0, 0),
                                                  shape_.plane_size());
}

std::span<double> Tensor4::plane(int b, int c) {
  return std::span<double>(values_).subspan(index(b, c, 0, 0),
                                            shape_.plane_size());
}

bool Tensor4::all_finite() const { return finite_all(values_); }

double Tensor4::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

ComplexTensor4::ComplexTensor4(Shape4 shape) : shape_(shape) {
  check_shape(shape_);
  values_.assign(shape_.count(), value_type{0.0, 0.0});
}

ComplexTensor4::ComplexTensor4(Shape4 shape, std::vector<value_type> values)
    : shape_(shape), values_(std::move(values)) {
  check_shape(shape_);
  require(values_.size() == shape_.count(),
          "complex tensor value count does not match shape " +
              to_string(shape_));
}

ComplexTensor4::ComplexTensor4(const Tensor4& real) : shape_(real.shape()) {
  values_.reserve(real.size());
  for (double v : real.values()) values_.emplace_back(v, 0.0);
}

std::span<const ComplexTensor4::value_type> ComplexTensor4::plane(
    int b, int c) const {
  return std::span<const value_type>(values_).subspan(index(b, c, 0, 0),
                                                      shape_.plane_size());
}

std::span<ComplexTensor4::value_type> ComplexTensor4::plane(int b, int c) {
  return std::span<value_type>(values_).subspan(index(b, c, 0, 0),
                                                shape_.plane_size());
}

Tensor4 ComplexTensor4::real() const {
  std::vector<double> out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.push_back(v.real());
  return Tensor4(shape_, std::move(out));
}

double ComplexTensor4::max_abs_imag() const {
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, std::abs(v.imag()));
  return m;
}

Conv2dParams::Conv2dParams(Tensor4 weights,
                           std::optional<std::vector<double>> bias, int stride,
                           int padding, int groups)
    : Conv2dParams(std::move(weights), std::move(bias), stride,
                   Padding2d{padding, padding}, groups) {}

Conv2dParams::Conv2dParams(Tensor4 weights,
                           std::optional<std::vector<double>> bias, int stride,
                           Padding2d padding, int groups)
    : weights_(std::move(weights)),
      bias_(std::move(bias)),
      stride_(stride),
      padding_(padding),
      groups_(groups) {
  require(stride_ >= 1, "conv stride must be >= 1");
  require(padding_.h >= 0 && padding_.w >= 0, "conv padding must be >= 0");
  require(groups_ >= 1, "conv groups must be >= 1");
  require(out_channels() % groups_ == 0,
          "conv out_channels must be divisible by groups");
  require(weights_.all_finite(), "conv weights must be finite");
  if (bias_) {
    require(static_cast<int>(bias_->size()) == out_channels(),
            "conv bias length must equal out_channels");
    require(finite_all(*bias_), "conv bias must be finite");
  }
}

Shape4 Conv2dParams::output_shape(const Shape4& in) const {
  if (in.channels != in_channels()) {
    throw ContractViolation("conv2d expects " + std::to_string(in_channels()) +
                            " input channels, got " +
                            std::to_string(in.channels));
  }
  const int oh = (in.height + 2 * padding_.h - kernel_h());
  const int ow = (in.width + 2 * padding_.w - kernel_w());
  if (oh < 0 || ow < 0) {
    throw ContractViolation("conv2d output would be empty for input " +
                            to_string(in));
  }
  return Shape4{in.batch, out_channels(), oh / stride_ + 1, ow / stride_ + 1};
}

BatchNormParams::BatchNormParams(std::vector<double> gamma,
                                 std::vector<double> beta,
                                 std::vector<double> mean,
                                 std::vector<double> variance, double epsilon)
    : gamma_(std::move(gamma)),
      beta_(std::move(beta)),
      mean_(std::move(mean)),
      variance_(std::move(variance)),
      epsilon_(epsilon) {
  const auto n = gamma_.size();
  require(n >= 1, "batch norm needs at least one channel");
  require(beta_.size() == n && mean_.size() == n && variance_.size() == n,
          "batch norm arrays must share one length");
  require(epsilon_ > 0.0 && std::isfinite(epsilon_),
          "batch norm epsilon must be positive");
  require(finite_all(gamma_) && finite_all(beta_) && finite_all(mean_) &&
              finite_all(variance_),
          "batch norm parameters must be finite");
  for (double v : variance_) {
    require(v >= 0.0, "batch norm variance must be >= 0");
  }
}

BatchNormParams BatchNormParams::identity(int channels, double epsilon) {
  const auto n = static_cast<std::size_t>(channels);
  return BatchNormParams(std::vector<double>(n, 1.0), std::vector<double>(n),
                         std::vector<double>(n),
                         std::vector<double>(n, 1.0 - epsilon), epsilon);
}

double BatchNormParams::scale(int c) const {
  return gamma_[c] / std::sqrt(variance_[c] + epsilon_);
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kIdentity:
      return "identity";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "identity") return Activation::kIdentity;
  throw ContractViolation("unknown activation '" + std::string(name) + "'");
}

double activate(double v, Activation a) {
  switch (a) {
    case Activation::kRelu:
      return v > 0.0 ? v : 0.0;
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-v));
    case Activation::kIdentity:
      return v;
  }
  return v;
}

Tensor4 conv2d(const Tensor4& x, const Conv2dParams& p) {
  const Shape4 os = p.output_shape(x.shape());
  Tensor4 out(os);
  const Tensor4& wt = p.weights();
  const int in_per_group = wt.channels();
  const int out_per_group = p.out_channels() / p.groups();
  const int kh = p.kernel_h(), kw = p.kernel_w();
  const int ih = x.height(), iw = x.width();
  const int stride = p.stride(), ph = p.pad_h(), pw = p.pad_w();

  for (int b = 0; b < os.batch; ++b) {
    for (int oc = 0; oc < os.channels; ++oc) {
      const int g = oc / out_per_group;
      const double bias = p.bias() ? (*p.bias())[oc] : 0.0;
      auto oplane = out.plane(b, oc);
      std::fill(oplane.begin(), oplane.end(), bias);
      for (int icg = 0; icg < in_per_group; ++icg) {
        const auto iplane = x.plane(b, g * in_per_group + icg);
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            const double wv = wt(oc, icg, ky, kx);
            if (wv == 0.0) continue;
            for (int oy = 0; oy < os.height; ++oy) {
              const int y = oy * stride - ph + ky;
              if (y < 0 || y >= ih) continue;
              const double* irow = iplane.data() + static_cast<std::size_t>(y) * iw;
              double* orow = oplane.data() + static_cast<std::size_t>(oy) * os.width;
              for (int ox = 0; ox < os.width; ++ox) {
                const int xx = ox * stride - pw + kx;
                if (xx < 0 || xx >= iw) continue;
                orow[ox] += wv * irow[xx];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor4 batchnorm_infer(const Tensor4& x, const BatchNormParams& bn) {
  if (bn.channels() != x.channels()) {
    throw ContractViolation("batch norm has " + std::to_string(bn.channels()) +
                            " channels, input has " +
                            std::to_string(x.channels()));
  }
  Tensor4 out = x;
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      const double denom = std::sqrt(bn.variance()[c] + bn.epsilon());
      const double g = bn.gamma()[c], beta = bn.beta()[c], mu = bn.mean()[c];
      for (double& v : out.plane(b, c)) v = g * ((v - mu) / denom) + beta;
    }
  }
  return out;
}

Tensor4 activation(const Tensor4& x, Activation kind) {
  if (kind == Activation::kIdentity) return x;
  Tensor4 out = x;
  for (double& v : out.values()) v = activate(v, kind);
  return out;
}

Tensor4 gap(const Tensor4& x) {
  Tensor4 out(Shape4{x.batch(), x.channels(), 1, 1});
  const double n = static_cast<double>(x.shape().plane_size());
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      double sum = 0.0;
      for (double v : x.plane(b, c)) sum += v;
      out(b, c, 0, 0) = sum / n;
    }
  }
  return out;
}

ComplexTensor4 dft2(const Tensor4& x) { return dft2(ComplexTensor4(x)); }

ComplexTensor4 dft2(const ComplexTensor4& x) {
  ComplexTensor4 out = x;
  const Shape4& s = x.shape();
  for (int b = 0; b < s.batch; ++b) {
    for (int c = 0; c < s.channels; ++c) {
      transform_plane(out.plane(b, c), s.height, s.width, false);
    }
  }
  return out;
}

ComplexTensor4 idft2(const ComplexTensor4& xf) {
  ComplexTensor4 out = xf;
  const Shape4& s = xf.shape();
  for (int b = 0; b < s.batch; ++b) {
    for (int c = 0; c < s.channels; ++c) {
      transform_plane(out.plane(b, c), s.height, s.width, true);
    }
  }
  return out;
}

Tensor4 concat_channels(std::span<const Tensor4> parts) {
  require(!parts.empty(), "concat_channels needs at least one part");
  const Shape4 first = parts.front().shape();
  int total = 0;
  for (const auto& p : parts) {
    const Shape4& s = p.shape();
    require(s.batch == first.batch && s.height == first.height &&
                s.width == first.width,
            "concat_channels: batch/spatial mismatch " + to_string(s) +
                " vs " + to_string(first));
    total += s.channels;
  }
  Tensor4 out(Shape4{first.batch, total, first.height, first.width});
  for (int b = 0; b < first.batch; ++b) {
    int offset = 0;
    for (const auto& p : parts) {
      for (int c = 0; c < p.channels(); ++c) {
        const auto src = p.plane(b, c);
        std::copy(src.begin(), src.end(), out.plane(b, offset + c).begin());
      }
      offset += p.channels();
    }
  }
  return out;
}

std::vector<Tensor4> split_channels(const Tensor4& x,
                                    std::span<const int> sizes) {
  int total = 0;
  for (int s : sizes) {
    require(s >= 1, "split_channels sizes must be >= 1");
    total += s;
  }
  require(total == x.channels(),
          "split_channels sizes sum to " + std::to_string(total) +
              ", tensor has " + std::to_string(x.channels()) + " channels");
  std::vector<Tensor4> parts;
  parts.reserve(sizes.size());
  int offset = 0;
  for (int s : sizes) {
    Tensor4 part(Shape4{x.batch(), s, x.height(), x.width()});
    for (int b = 0; b < x.batch(); ++b) {
      for (int c = 0; c < s; ++c) {
        const auto src = x.plane(b, offset + c);
        std::copy(src.begin(), src.end(), part.plane(b, c).begin());
      }
    }
    parts.push_back(std::move(part));
    offset += s;
  }
  return parts;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + to_string(a.shape()) +
                                      " vs " + to_string(b.shape()));
  Tensor4 out = a;
  auto ov = out.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  return out;
}

Tensor4 scale(const Tensor4& a, double s) {
  Tensor4 out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  require(a.shape() == b.shape(), "max_abs_diff: shape mismatch");
  double m = 0.0;
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    m = std::max(m, std::abs(av[i] - bv[i]));
  }
  return m;
}

}  // namespace tinydef
