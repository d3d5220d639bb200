#pragma once

#include <filesystem>

#include "dslnet/nn.hpp"

namespace dslnet {

// Binary checkpoint, byte-exact round trip:
//   "DSLNET-CKPT v1\n"
//   u32 param count, then per parameter: u32 name length, name bytes,
//   u32 rows, u32 cols, rows*cols float64 little-endian values,
//   then i64 optimizer step count and per parameter (same order) the AdamW
//   first and second moments as float64 payloads.
void save_checkpoint(const nn::ParamStore& store, const std::filesystem::path& path);
nn::ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace dslnet
