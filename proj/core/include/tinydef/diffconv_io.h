// Fused EEConv kernels on disk: `<stem>.t4` holds w_final and `<stem>.json`
// holds {out_channels, in_channels, activation, bias}.
#pragma once

#include <filesystem>

#include "tinydef/diffconv.h"

namespace tinydef {

void save_fused(const std::filesystem::path& stem, const FusedConv& fused);

// Throws FormatError when the sidecar is malformed or disagrees with the
// kernel shape.
FusedConv load_fused(const std::filesystem::path& stem);

}  // namespace tinydef
