// The `.t4` golden-file format: four little-endian uint64 dims (b, c, h, w)
// followed by little-endian IEEE-754 doubles in row-major order.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "tinydef/tensor.h"

namespace tinydef {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_t4(std::ostream& os, const Tensor4& t);
Tensor4 read_t4(std::istream& is);

void save_t4(const std::filesystem::path& path, const Tensor4& t);
Tensor4 load_t4(const std::filesystem::path& path);

}  // namespace tinydef
