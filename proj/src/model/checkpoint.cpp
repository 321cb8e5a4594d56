#include "volformer/checkpoint.hpp"

#include <cmath>

#include "volformer/bytes.hpp"
#include "volformer/error.hpp"

namespace volformer {

namespace {

struct ConfigField {
  const char* name;
  std::size_t ModelConfig::*member;
};

constexpr ConfigField kSizeFields[] = {
    {"t", &ModelConfig::t},
    {"h", &ModelConfig::h},
    {"w", &ModelConfig::w},
    {"c", &ModelConfig::c},
    {"patch_t", &ModelConfig::patch_t},
    {"patch_h", &ModelConfig::patch_h},
    {"patch_w", &ModelConfig::patch_w},
    {"dim", &ModelConfig::dim},
    {"heads", &ModelConfig::heads},
    {"layers", &ModelConfig::layers},
    {"ffn_mult", &ModelConfig::ffn_mult},
    {"n_classes", &ModelConfig::n_classes},
};

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw FormatError(std::string(what) + " does not fit in 32 bits", 0);
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& config, const ModelParams& params) {
  ByteWriter out;
  out.bytes("VVCK");
  out.u16(kVvckVersion);
  for (const auto& f : kSizeFields) out.u32(narrow(config.*f.member, f.name));
  out.u8(static_cast<std::uint8_t>(config.pooling));
  out.f64(config.layer_norm_eps);

  const auto arrays = params.arrays();
  out.u32(narrow(arrays.size(), "array count"));
  for (const auto& [name, tensor] : arrays) {
    out.u32(narrow(name.size(), "name length"));
    out.bytes(name);
    out.u32(narrow(tensor.rank(), "rank"));
    for (std::size_t d : tensor.shape()) out.u32(narrow(d, "extent"));
    for (double v : tensor.data()) out.f32(static_cast<float>(v));
  }
  return std::move(out.buffer());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes, "checkpoint");
  in.require(4, "magic");
  if (in.bytes(4) != "VVCK") throw FormatError("checkpoint: bad magic, expected \"VVCK\"", 0);
  const std::uint16_t version = in.u16();
  if (version != kVvckVersion) {
    throw MismatchError("version", "checkpoint format version " + std::to_string(version) +
                                       " is not supported (expected " +
                                       std::to_string(kVvckVersion) + ")");
  }
  Checkpoint ck;
  for (const auto& f : kSizeFields) ck.config.*f.member = in.u32();
  const std::size_t pooling_offset = in.offset();
  const std::uint8_t pooling = in.u8();
  if (pooling > 1) throw FormatError("checkpoint: unknown pooling code " + std::to_string(pooling), pooling_offset);
  ck.config.pooling = static_cast<Pooling>(pooling);
  ck.config.layer_norm_eps = in.f64();
  try {
    ck.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: stored config is invalid: ") + e.what(), in.offset());
  }

  ck.params = zero_params(ck.config, DType::f32);
  const auto expected = ck.params.arrays();
  const std::size_t count_offset = in.offset();
  const std::uint32_t count = in.u32();
  if (count != expected.size()) {
    throw FormatError("checkpoint: holds " + std::to_string(count) + " arrays, config implies " +
                          std::to_string(expected.size()),
                      count_offset);
  }
  for (const auto& [name, tensor] : expected) {
    const std::uint32_t name_len = in.u32();
    in.require(name_len, "array name");
    const std::string stored = in.bytes(name_len);
    if (stored != name) {
      throw MismatchError(stored, "checkpoint array \"" + stored + "\" found where \"" + name +
                                      "\" was expected");
    }
    const std::uint32_t rank = in.u32();
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    if (shape != tensor.shape()) {
      throw MismatchError(name, "checkpoint array " + name + " has shape " + to_string(shape) +
                                    ", config implies " + to_string(tensor.shape()));
    }
    in.require(4 * tensor.numel(), name + " values");
    const std::size_t values_offset = in.offset();
    auto values = Tensor(tensor).mutable_data();
    for (auto& v : values) {
      v = in.f32();
      if (!std::isfinite(v)) throw FormatError("checkpoint: non-finite value in " + name, values_offset);
    }
  }
  if (in.remaining() != 0) {
    throw FormatError("checkpoint: " + std::to_string(in.remaining()) + " trailing bytes", in.offset());
  }
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                      const ModelParams& params) {
  write_file(path, encode_checkpoint(config, params));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

Checkpoint load_checkpoint_for(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = read_checkpoint(path);
  const auto stored_layout = param_layout(ck.config);
  const auto wanted_layout = param_layout(expected);
  for (std::size_t i = 0; i < std::max(stored_layout.size(), wanted_layout.size()); ++i) {
    if (i >= stored_layout.size()) {
      throw MismatchError(wanted_layout[i].first,
                          "checkpoint lacks array " + wanted_layout[i].first);
    }
    if (i >= wanted_layout.size()) {
      throw MismatchError(stored_layout[i].first,
                          "checkpoint has unexpected array " + stored_layout[i].first);
    }
    const auto& [name, shape] = stored_layout[i];
    if (name != wanted_layout[i].first || shape != wanted_layout[i].second) {
      throw MismatchError(wanted_layout[i].first,
                          "checkpoint array " + name + " " + to_string(shape) +
                              " does not match expected " + wanted_layout[i].first + " " +
                              to_string(wanted_layout[i].second));
    }
  }
  // Same layout; remaining config fields must still agree.
  for (const auto& f : kSizeFields) {
    if (ck.config.*f.member != expected.*f.member) {
      throw MismatchError(f.name, std::string("checkpoint config field ") + f.name + " is " +
                                      std::to_string(ck.config.*f.member) + ", expected " +
                                      std::to_string(expected.*f.member));
    }
  }
  if (ck.config.pooling != expected.pooling) {
    throw MismatchError("pooling", "checkpoint pooling differs from config");
  }
  if (ck.config.layer_norm_eps != expected.layer_norm_eps) {
    throw MismatchError("layer_norm_eps", "checkpoint layer_norm_eps differs from config");
  }
  return ck;
}

}  // namespace volformer
