#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "grouprec/model.hpp"

namespace grouprec {

// Binary layout, all integers and floats little-endian:
//
//   magic        8 bytes  "GRPRCKPT"
//   version      u32
//   field count  u32, then per field: u32 name length, UTF-8 name,
//                u8 kind, u64 vocab size
//   hyperparams  u64 d, u64 heads, u64 head_dim, u64 dense_width,
//                f64 layernorm eps, u64 seed, u8 attention scale,
//                u8 criteria encoding
//   block count  u64, then per block in Model::parameters() order:
//                u32 name length, name, u64 rows, u64 cols,
//                rows*cols f64 values
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes the checkpoint and a human-readable "<path>.schema.txt" sidecar.
void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Throws CheckpointError on bad magic, unsupported version, truncation or
/// block mismatch.
Model load_checkpoint(const std::filesystem::path& path);

std::string describe_schema(const Model& model);

}  // namespace grouprec
