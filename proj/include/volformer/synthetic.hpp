#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "volformer/manifest.hpp"
#include "volformer/volume.hpp"

namespace volformer {

struct SyntheticSpec {
  std::size_t n_per_class = 10;
  std::size_t n_classes = 3;
  VolumeExtents extents{4, 8, 8, 1};
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

// Blob center (t, h, w) of class c, in voxel coordinates. Centers sit on a
// circle of radius min(H, W) / 4 around the slice center, at angle 2 pi c / K,
// in the middle slice.
std::array<double, 3> class_blob_center(std::size_t label, std::size_t n_classes,
                                        const VolumeExtents& extents);

// Class-c volumes hold a unit-amplitude Gaussian blob at class_blob_center(c)
// (spatial width max(min(H, W) / 8, 0.75), slice width max(T / 4, 0.5)) plus
// i.i.d. N(0, noise_sigma^2) noise. Volumes come out class by class, ids
// "vol_0000", ..., each with its own subject id.
std::vector<Volume> gen_synthetic(const SyntheticSpec& spec);

// Writes <dir>/<id>.vvol for every volume plus <dir>/manifest.jsonl (relative
// paths, no split tags). Returns the manifest.
Manifest write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace volformer
