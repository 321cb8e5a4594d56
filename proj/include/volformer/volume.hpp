#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace volformer {

// Slice-major scan extents: T slices of H x W pixels with C channels.
struct VolumeExtents {
  std::uint32_t t = 0;
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  std::uint32_t c = 1;

  std::size_t voxels() const {
    return static_cast<std::size_t>(t) * h * w * c;
  }
  bool operator==(const VolumeExtents&) const = default;
};

std::string to_string(const VolumeExtents& e);

// A T x H x W x C scan stored row-major with C fastest.
struct Volume {
  std::string id;
  std::optional<std::string> subject_id;
  int label = 0;
  VolumeExtents extents;
  std::vector<float> voxels;

  std::size_t index(std::size_t t, std::size_t h, std::size_t w, std::size_t c = 0) const {
    return ((t * extents.h + h) * extents.w + w) * extents.c + c;
  }
  float at(std::size_t t, std::size_t h, std::size_t w, std::size_t c = 0) const {
    return voxels[index(t, h, w, c)];
  }

  // Throws DataError for zero extents, a voxel count mismatch or non-finite
  // voxels.
  void validate() const;
};

// VVOL container: "VVOL", u16 version = 1, u8 dtype = 0 (f32), u8 rank = 4,
// four u32 extents (T, H, W, C), then the voxels as f32. Little-endian
// throughout. Malformed input raises FormatError with the failing offset.
inline constexpr std::uint16_t kVvolVersion = 1;

std::vector<std::uint8_t> encode_volume(const Volume& volume);
// `id` is stored on the returned volume; label and subject stay default.
Volume decode_volume(const std::vector<std::uint8_t>& bytes, std::string id = {});

Volume read_volume(const std::filesystem::path& path);
void write_volume(const Volume& volume, const std::filesystem::path& path);

}  // namespace volformer
