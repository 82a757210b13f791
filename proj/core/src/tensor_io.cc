#include "tinydef/tensor_io.h"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace tinydef {

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  }
  os.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> bytes;
  is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!is) throw FormatError("t4: truncated stream");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

}  // namespace

void write_t4(std::ostream& os, const Tensor4& t) {
  const Shape4& s = t.shape();
  put_u64(os, static_cast<std::uint64_t>(s.batch));
  put_u64(os, static_cast<std::uint64_t>(s.channels));
  put_u64(os, static_cast<std::uint64_t>(s.height));
  put_u64(os, static_cast<std::uint64_t>(s.width));
  for (double v : t.values()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw FormatError("t4: write failed");
}

Tensor4 read_t4(std::istream& is) {
  std::array<int, 4> dims{};
  for (auto& d : dims) {
    const std::uint64_t v = get_u64(is);
    if (v == 0 || v > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
      throw FormatError("t4: dimension out of range");
    }
    d = static_cast<int>(v);
  }
  const Shape4 shape{dims[0], dims[1], dims[2], dims[3]};
  std::vector<double> values(shape.count());
  for (auto& v : values) {
    v = std::bit_cast<double>(get_u64(is));
    if (!std::isfinite(v)) throw FormatError("t4: non-finite value");
  }
  return Tensor4(shape, std::move(values));
}

void save_t4(const std::filesystem::path& path, const Tensor4& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("t4: cannot open " + path.string());
  write_t4(os, t);
}

Tensor4 load_t4(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("t4: cannot open " + path.string());
  return read_t4(is);
}

}  // namespace tinydef
