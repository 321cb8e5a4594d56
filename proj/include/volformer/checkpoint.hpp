#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "volformer/model.hpp"

namespace volformer {

// VVCK container, little-endian:
//   "VVCK", u16 version
//   config: u32 t, h, w, c, patch_t, patch_h, patch_w, dim, heads, layers,
//           ffn_mult, n_classes; u8 pooling; f64 layer_norm_eps
//   u32 array count, then per array: u32 name length, name bytes, u32 rank,
//   u32 extents, f32 values (row-major)
inline constexpr std::uint16_t kVvckVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams params;  // f32
};

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& config, const ModelParams& params);
// FormatError for malformed bytes; MismatchError for an unsupported version or
// arrays that disagree with the stored config.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                      const ModelParams& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Reads a checkpoint and checks it against `expected`. MismatchError names the
// first differing config field or parameter array.
Checkpoint load_checkpoint_for(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace volformer
