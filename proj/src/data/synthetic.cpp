#include "volformer/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "volformer/error.hpp"
#include "volformer/rng.hpp"

namespace volformer {

std::array<double, 3> class_blob_center(std::size_t label, std::size_t n_classes,
                                        const VolumeExtents& e) {
  const double radius = std::min(e.h, e.w) / 4.0;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(label) /
                       static_cast<double>(n_classes);
  return {(e.t - 1.0) / 2.0, (e.h - 1.0) / 2.0 + radius * std::cos(angle),
          (e.w - 1.0) / 2.0 + radius * std::sin(angle)};
}

std::vector<Volume> gen_synthetic(const SyntheticSpec& spec) {
  const auto& e = spec.extents;
  if (e.t == 0 || e.h == 0 || e.w == 0 || e.c == 0) {
    throw ConfigError("synthetic extents must be positive");
  }
  if (spec.n_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (!(spec.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");

  const double spatial = std::max(std::min(e.h, e.w) / 8.0, 0.75);
  const double slice = std::max(e.t / 4.0, 0.5);
  Rng rng(spec.seed);
  std::vector<Volume> volumes;
  volumes.reserve(spec.n_per_class * spec.n_classes);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    const auto center = class_blob_center(c, spec.n_classes, e);
    for (std::size_t i = 0; i < spec.n_per_class; ++i) {
      Volume v;
      char id[32];
      std::snprintf(id, sizeof id, "vol_%04zu", volumes.size());
      v.id = id;
      std::snprintf(id, sizeof id, "sub_%04zu", volumes.size());
      v.subject_id = id;
      v.label = static_cast<int>(c);
      v.extents = e;
      v.voxels.resize(e.voxels());
      for (std::size_t t = 0; t < e.t; ++t) {
        const double dt = (t - center[0]) / slice;
        for (std::size_t h = 0; h < e.h; ++h) {
          const double dh = (h - center[1]) / spatial;
          for (std::size_t w = 0; w < e.w; ++w) {
            const double dw = (w - center[2]) / spatial;
            const double blob = std::exp(-0.5 * (dt * dt + dh * dh + dw * dw));
            for (std::size_t ch = 0; ch < e.c; ++ch) {
              const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
              v.voxels[v.index(t, h, w, ch)] = static_cast<float>(blob + noise);
            }
          }
        }
      }
      volumes.push_back(std::move(v));
    }
  }
  return volumes;
}

Manifest write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Manifest manifest;
  manifest.class_names = default_class_names(spec.n_classes);
  manifest.base_dir = dir;
  for (const auto& v : gen_synthetic(spec)) {
    const std::string file = v.id + ".vvol";
    write_volume(v, dir / file);
    manifest.entries.push_back({file, v.label, v.subject_id, SplitTag::unassigned});
  }
  write_manifest(manifest, dir / "manifest.jsonl");
  return manifest;
}

}  // namespace volformer
