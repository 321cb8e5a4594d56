#pragma once

#include <cstddef>
#include <string>

#include "volformer/volume.hpp"

namespace volformer {

// Keeps slices [floor((T - k) / 2), floor((T - k) / 2) + k). Odd remainders
// put the extra slice at the back. DataError when T < k.
Volume select_central_slices(const Volume& volume, std::size_t k = 32);

// Per-slice bilinear resampling with corner-aligned sample positions:
// target pixel i maps to source coordinate i * (S - 1) / (N - 1), or to the
// source center (S - 1) / 2 when N == 1. Equal extents return the input.
Volume resample_slices(const Volume& volume, std::size_t target_h, std::size_t target_w);

enum class NormalizeMode { minmax, zscore };

NormalizeMode parse_normalize_mode(const std::string& name);
const char* to_string(NormalizeMode mode);

// minmax -> [0, 1]; zscore -> mean 0, population std 1. A constant volume
// maps to all zeros in either mode.
Volume normalize_intensity(const Volume& volume, NormalizeMode mode);

}  // namespace volformer
