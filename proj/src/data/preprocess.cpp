#include "volformer/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "volformer/error.hpp"

namespace volformer {

Volume select_central_slices(const Volume& volume, std::size_t k) {
  const auto& e = volume.extents;
  if (k == 0) throw DataError("central slice count must be positive");
  if (e.t < k) {
    throw DataError("volume " + volume.id + " has " + std::to_string(e.t) +
                    " slices, fewer than the " + std::to_string(k) + " requested");
  }
  const std::size_t first = (e.t - k) / 2;
  const std::size_t slice = static_cast<std::size_t>(e.h) * e.w * e.c;
  Volume out = volume;
  out.extents.t = static_cast<std::uint32_t>(k);
  out.voxels.assign(volume.voxels.begin() + static_cast<std::ptrdiff_t>(first * slice),
                    volume.voxels.begin() + static_cast<std::ptrdiff_t>((first + k) * slice));
  return out;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

std::vector<Tap> taps(std::size_t source, std::size_t target) {
  std::vector<Tap> out(target);
  for (std::size_t i = 0; i < target; ++i) {
    const double pos = target == 1
                           ? (static_cast<double>(source) - 1.0) / 2.0
                           : static_cast<double>(i) * (static_cast<double>(source) - 1.0) /
                                 (static_cast<double>(target) - 1.0);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(pos)), source - 1);
    const auto hi = std::min(lo + 1, source - 1);
    out[i] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return out;
}

}  // namespace

Volume resample_slices(const Volume& volume, std::size_t target_h, std::size_t target_w) {
  if (target_h == 0 || target_w == 0) throw DataError("resample target extents must be positive");
  const auto& e = volume.extents;
  if (e.h == target_h && e.w == target_w) return volume;

  const auto rows = taps(e.h, target_h);
  const auto cols = taps(e.w, target_w);
  Volume out = volume;
  out.extents.h = static_cast<std::uint32_t>(target_h);
  out.extents.w = static_cast<std::uint32_t>(target_w);
  out.voxels.assign(out.extents.voxels(), 0.0f);
  for (std::size_t t = 0; t < e.t; ++t) {
    for (std::size_t y = 0; y < target_h; ++y) {
      const auto& r = rows[y];
      for (std::size_t x = 0; x < target_w; ++x) {
        const auto& c = cols[x];
        for (std::size_t ch = 0; ch < e.c; ++ch) {
          const double top = (1.0 - c.frac) * volume.at(t, r.lo, c.lo, ch) +
                             c.frac * volume.at(t, r.lo, c.hi, ch);
          const double bottom = (1.0 - c.frac) * volume.at(t, r.hi, c.lo, ch) +
                                c.frac * volume.at(t, r.hi, c.hi, ch);
          out.voxels[out.index(t, y, x, ch)] =
              static_cast<float>((1.0 - r.frac) * top + r.frac * bottom);
        }
      }
    }
  }
  return out;
}

NormalizeMode parse_normalize_mode(const std::string& name) {
  if (name == "minmax") return NormalizeMode::minmax;
  if (name == "zscore") return NormalizeMode::zscore;
  throw ConfigError("normalization mode must be minmax or zscore, got \"" + name + "\"");
}

const char* to_string(NormalizeMode mode) {
  return mode == NormalizeMode::minmax ? "minmax" : "zscore";
}

Volume normalize_intensity(const Volume& volume, NormalizeMode mode) {
  Volume out = volume;
  if (volume.voxels.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(volume.voxels.begin(), volume.voxels.end());
  if (*lo_it == *hi_it) {
    std::fill(out.voxels.begin(), out.voxels.end(), 0.0f);
    return out;
  }
  if (mode == NormalizeMode::minmax) {
    const double lo = *lo_it, range = static_cast<double>(*hi_it) - lo;
    for (auto& v : out.voxels) v = static_cast<float>((v - lo) / range);
    return out;
  }
  double mean = 0.0;
  for (float v : volume.voxels) mean += v;
  mean /= static_cast<double>(volume.voxels.size());
  double var = 0.0;
  for (float v : volume.voxels) var += (v - mean) * (v - mean);
  var /= static_cast<double>(volume.voxels.size());
  const double sd = std::sqrt(var);
  for (auto& v : out.voxels) v = static_cast<float>((v - mean) / sd);
  return out;
}

}  // namespace volformer
