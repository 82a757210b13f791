// Binary Netpbm output: P6 for RGB images, P5 for feature-map heatmaps.
#pragma once

#include <filesystem>
#include <string>

#include "tinydef/tensor.h"

namespace tinydef {

// Expects a (1, 3, H, W) tensor with values in [0, 1]; values are clamped and
// rounded to 8 bits.
std::string encode_ppm(const Tensor4& rgb);
void write_ppm(const std::filesystem::path& path, const Tensor4& rgb);

// Mean over channels of batch item `b`, min-max stretched to 0..255. A
// constant map encodes as all zeros.
std::string encode_featmap_pgm(const Tensor4& x, int b = 0);
void write_featmap_pgm(const std::filesystem::path& path, const Tensor4& x,
                       int b = 0);

}  // namespace tinydef
