#include "tinydef/image_io.h"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace tinydef {

namespace {

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::string encode_ppm(const Tensor4& rgb) {
  if (rgb.batch() != 1 || rgb.channels() != 3) {
    throw ContractViolation("encode_ppm expects a (1, 3, H, W) tensor");
  }
  std::string out = "P6\n" + std::to_string(rgb.width()) + " " +
                    std::to_string(rgb.height()) + "\n255\n";
  out.reserve(out.size() + rgb.size());
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.push_back(static_cast<char>(to_byte(rgb(0, c, y, x))));
    }
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor4& rgb) {
  write_bytes(path, encode_ppm(rgb));
}

std::string encode_featmap_pgm(const Tensor4& x, int b) {
  if (b < 0 || b >= x.batch()) {
    throw ContractViolation("encode_featmap_pgm: batch index out of range");
  }
  std::vector<double> mean(x.shape().plane_size(), 0.0);
  for (int c = 0; c < x.channels(); ++c) {
    const auto p = x.plane(b, c);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p[i];
  }
  for (double& v : mean) v /= x.channels();
  const auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
  const double span = *hi - *lo;

  std::string out = "P5\n" + std::to_string(x.width()) + " " +
                    std::to_string(x.height()) + "\n255\n";
  for (double v : mean) {
    out.push_back(static_cast<char>(span > 0.0 ? to_byte((v - *lo) / span) : 0));
  }
  return out;
}

void write_featmap_pgm(const std::filesystem::path& path, const Tensor4& x,
                       int b) {
  write_bytes(path, encode_featmap_pgm(x, b));
}

}  // namespace tinydef
