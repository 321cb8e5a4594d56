#include "volformer/volume.hpp"

#include <cmath>

#include "volformer/bytes.hpp"
#include "volformer/error.hpp"

namespace volformer {

std::string to_string(const VolumeExtents& e) {
  return std::to_string(e.t) + "x" + std::to_string(e.h) + "x" + std::to_string(e.w) + "x" +
         std::to_string(e.c);
}

void Volume::validate() const {
  if (extents.t == 0 || extents.h == 0 || extents.w == 0 || extents.c == 0) {
    throw DataError("volume " + id + ": extents must be positive, got " + to_string(extents));
  }
  if (voxels.size() != extents.voxels()) {
    throw DataError("volume " + id + ": " + std::to_string(voxels.size()) + " voxels for extents " +
                    to_string(extents));
  }
  for (float v : voxels) {
    if (!std::isfinite(v)) throw DataError("volume " + id + ": non-finite voxel");
  }
}

std::vector<std::uint8_t> encode_volume(const Volume& volume) {
  volume.validate();
  ByteWriter out;
  out.bytes("VVOL");
  out.u16(kVvolVersion);
  out.u8(0);
  out.u8(4);
  out.u32(volume.extents.t);
  out.u32(volume.extents.h);
  out.u32(volume.extents.w);
  out.u32(volume.extents.c);
  for (float v : volume.voxels) out.f32(v);
  return std::move(out.buffer());
}

Volume decode_volume(const std::vector<std::uint8_t>& bytes, std::string id) {
  ByteReader in(bytes, "VVOL");
  in.require(4, "magic");
  if (in.bytes(4) != "VVOL") throw FormatError("VVOL: bad magic", 0);
  const std::size_t version_at = in.offset();
  const auto version = in.u16();
  if (version != kVvolVersion) {
    throw FormatError("VVOL: unsupported version " + std::to_string(version), version_at);
  }
  const std::size_t dtype_at = in.offset();
  if (const auto dtype = in.u8(); dtype != 0) {
    throw FormatError("VVOL: unsupported dtype " + std::to_string(dtype), dtype_at);
  }
  const std::size_t rank_at = in.offset();
  if (const auto rank = in.u8(); rank != 4) {
    throw FormatError("VVOL: rank must be 4, got " + std::to_string(rank), rank_at);
  }
  Volume volume;
  volume.id = std::move(id);
  in.require(16, "extents");
  volume.extents.t = in.u32();
  volume.extents.h = in.u32();
  volume.extents.w = in.u32();
  volume.extents.c = in.u32();
  const auto& e = volume.extents;
  if (e.t == 0 || e.h == 0 || e.w == 0 || e.c == 0) {
    throw FormatError("VVOL: zero extent in " + to_string(e), 8);
  }
  const std::size_t count = e.voxels();
  in.require(count * 4, "voxel payload");
  if (in.remaining() != count * 4) {
    throw FormatError("VVOL: " + std::to_string(in.remaining() - count * 4) +
                          " trailing bytes after voxel payload",
                      in.offset() + count * 4);
  }
  volume.voxels.resize(count);
  for (auto& v : volume.voxels) v = in.f32();
  volume.validate();
  return volume;
}

Volume read_volume(const std::filesystem::path& path) {
  return decode_volume(read_file(path), path.stem().string());
}

void write_volume(const Volume& volume, const std::filesystem::path& path) {
  write_file(path, encode_volume(volume));
}

}  // namespace volformer
