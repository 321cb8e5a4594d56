#include "volformer/model.hpp"

#include <cmath>

#include "volformer/error.hpp"
#include "volformer/ops.hpp"
#include "volformer/parallel.hpp"
#include "volformer/rng.hpp"
#include "volformer/tape.hpp"

namespace volformer {

Pooling parse_pooling(const std::string& name) {
  if (name == "global_average") return Pooling::global_average;
  if (name == "cls_token") return Pooling::cls_token;
  throw ConfigError("pooling must be global_average or cls_token, got \"" + name + "\"");
}

const char* to_string(Pooling pooling) {
  return pooling == Pooling::global_average ? "global_average" : "cls_token";
}

VolumeExtents ModelConfig::input_extents() const {
  return {static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(h),
          static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(c)};
}

void ModelConfig::validate() const {
  if (t == 0 || h == 0 || w == 0 || c == 0) throw ConfigError("input extents must be positive");
  if (patch_t == 0 || patch_h == 0 || patch_w == 0) {
    throw ConfigError("tubelet extents must be positive");
  }
  if (patch_t > t || patch_h > h || patch_w > w) {
    throw ConfigError("tubelet extents must not exceed the input extents");
  }
  if (dim == 0 || heads == 0) throw ConfigError("dim and heads must be positive");
  if (dim % heads != 0) {
    throw ConfigError("dim " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (ffn_mult == 0) throw ConfigError("ffn_mult must be positive");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
  if (n_classes == 0) throw ConfigError("n_classes must be positive");
  if (dropout != 0.0) throw ConfigError("dropout is not supported; it must be 0");
}

TokenGrid token_grid(const ModelConfig& config) {
  config.validate();
  TokenGrid grid{config.t / config.patch_t, config.h / config.patch_h, config.w / config.patch_w};
  if (grid.count() == 0) throw ConfigError("token grid has an empty axis");
  return grid;
}

std::vector<std::string> config_warnings(const ModelConfig& config) {
  std::vector<std::string> notes;
  const auto note = [&](const char* axis, std::size_t extent, std::size_t patch) {
    if (extent % patch != 0) {
      notes.push_back(std::string(axis) + " extent " + std::to_string(extent) +
                      " is not a multiple of tubelet extent " + std::to_string(patch) + "; the last " +
                      std::to_string(extent % patch) + " are dropped");
    }
  };
  note("slice", config.t, config.patch_t);
  note("height", config.h, config.patch_h);
  note("width", config.w, config.patch_w);
  return notes;
}

namespace {

template <typename Fn>
void for_each_field(ModelParams& p, Fn&& fn) {
  fn("embed.weight", p.w_embed);
  fn("embed.bias", p.b_embed);
  fn("pos_embed", p.pos_embed);
  if (p.cls_token.defined()) fn("cls_token", p.cls_token);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string prefix = "layers." + std::to_string(i) + ".";
    fn(prefix + "ln1.gamma", l.ln1_gamma);
    fn(prefix + "ln1.beta", l.ln1_beta);
    fn(prefix + "attn.q.weight", l.w_q);
    fn(prefix + "attn.q.bias", l.b_q);
    fn(prefix + "attn.k.weight", l.w_k);
    fn(prefix + "attn.k.bias", l.b_k);
    fn(prefix + "attn.v.weight", l.w_v);
    fn(prefix + "attn.v.bias", l.b_v);
    fn(prefix + "attn.out.weight", l.w_o);
    fn(prefix + "attn.out.bias", l.b_o);
    fn(prefix + "ln2.gamma", l.ln2_gamma);
    fn(prefix + "ln2.beta", l.ln2_beta);
    fn(prefix + "ffn.fc1.weight", l.w_1);
    fn(prefix + "ffn.fc1.bias", l.b_1);
    fn(prefix + "ffn.fc2.weight", l.w_2);
    fn(prefix + "ffn.fc2.bias", l.b_2);
  }
  fn("norm.gamma", p.norm_gamma);
  fn("norm.beta", p.norm_beta);
  fn("head.weight", p.w_cls);
  fn("head.bias", p.b_cls);
}

ModelParams map_fields(const ModelParams& source, const auto& fn) {
  ModelParams out = source;
  for_each_field(out, [&](const std::string&, Tensor& t) { t = fn(t); });
  return out;
}

bool is_projection(const std::string& name) {
  const auto ends_with = [&](const std::string& suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".weight") || name == "cls_token";
}

bool is_gamma(const std::string& name) {
  return name.size() >= 6 && name.compare(name.size() - 6, 6, ".gamma") == 0;
}

}  // namespace

std::vector<NamedTensor> ModelParams::arrays() const {
  std::vector<NamedTensor> out;
  auto& self = const_cast<ModelParams&>(*this);
  for_each_field(self, [&](const std::string& name, Tensor& t) { out.push_back({name, t}); });
  return out;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t total = 0;
  for (const auto& a : arrays()) total += a.tensor.numel();
  return total;
}

ModelParams ModelParams::clone() const {
  return map_fields(*this, [](const Tensor& t) { return t.clone(); });
}

ModelParams ModelParams::to(DType dtype) const {
  return map_fields(*this, [dtype](const Tensor& t) { return t.to(dtype); });
}

void ModelParams::set_requires_grad(bool flag) {
  for_each_field(*this, [flag](const std::string&, Tensor& t) { t.set_requires_grad(flag); });
}

ModelParams zero_params(const ModelConfig& config, DType dtype) {
  const TokenGrid grid = token_grid(config);
  const std::size_t d = config.dim, hidden = config.ffn_mult * config.dim;
  const bool cls = config.pooling == Pooling::cls_token;
  const auto z = [dtype](Shape s) { return Tensor::zeros(std::move(s), dtype); };

  ModelParams p;
  p.w_embed = z({config.token_width(), d});
  p.b_embed = z({d});
  p.pos_embed = z({grid.count() + (cls ? 1 : 0), d});
  if (cls) p.cls_token = z({1, d});
  p.layers.resize(config.layers);
  for (auto& l : p.layers) {
    l.ln1_gamma = z({d});
    l.ln1_beta = z({d});
    l.w_q = z({d, d});
    l.b_q = z({d});
    l.w_k = z({d, d});
    l.b_k = z({d});
    l.w_v = z({d, d});
    l.b_v = z({d});
    l.w_o = z({d, d});
    l.b_o = z({d});
    l.ln2_gamma = z({d});
    l.ln2_beta = z({d});
    l.w_1 = z({d, hidden});
    l.b_1 = z({hidden});
    l.w_2 = z({hidden, d});
    l.b_2 = z({d});
  }
  p.norm_gamma = z({d});
  p.norm_beta = z({d});
  p.w_cls = z({d, config.n_classes});
  p.b_cls = z({config.n_classes});
  return p;
}

std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& config) {
  std::vector<std::pair<std::string, Shape>> layout;
  for (const auto& a : zero_params(config).arrays()) layout.emplace_back(a.name, a.tensor.shape());
  return layout;
}

std::size_t count_params(const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& [name, shape] : param_layout(config)) total += numel(shape);
  return total;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed, DType dtype) {
  ModelParams p = zero_params(config, dtype);
  Rng rng(seed, 0x1417);
  for (auto& [name, tensor] : p.arrays()) {
    auto values = tensor.mutable_data();
    if (is_projection(name)) {
      for (auto& v : values) v = round_to(dtype, 0.02 * rng.truncated_normal(2.0));
    } else if (is_gamma(name)) {
      for (auto& v : values) v = 1.0;
    }
  }
  return p;
}

Tensor extract_tubelets(const Volume& volume, const ModelConfig& config, DType dtype) {
  const auto& e = volume.extents;
  if (e.c != config.c) {
    throw DimensionError("volume " + volume.id + " has " + std::to_string(e.c) +
                         " channels, config expects " + std::to_string(config.c));
  }
  if (e.t < config.patch_t || e.h < config.patch_h || e.w < config.patch_w) {
    throw DimensionError("volume " + volume.id + " (" + to_string(e) +
                         ") is smaller than one tubelet");
  }
  if (volume.voxels.size() != e.voxels()) {
    throw DimensionError("volume " + volume.id + " voxel count does not match its extents");
  }
  const std::size_t nt = e.t / config.patch_t, nh = e.h / config.patch_h, nw = e.w / config.patch_w;
  const std::size_t width = config.token_width();
  std::vector<double> rows;
  rows.reserve(nt * nh * nw * width);
  for (std::size_t it = 0; it < nt; ++it) {
    for (std::size_t ih = 0; ih < nh; ++ih) {
      for (std::size_t iw = 0; iw < nw; ++iw) {
        for (std::size_t dt = 0; dt < config.patch_t; ++dt) {
          for (std::size_t dh = 0; dh < config.patch_h; ++dh) {
            for (std::size_t dw = 0; dw < config.patch_w; ++dw) {
              for (std::size_t ch = 0; ch < e.c; ++ch) {
                rows.push_back(volume.at(it * config.patch_t + dt, ih * config.patch_h + dh,
                                         iw * config.patch_w + dw, ch));
              }
            }
          }
        }
      }
    }
  }
  return Tensor::from({nt * nh * nw, width}, std::move(rows), dtype);
}

Tensor embed(const Tensor& tokens, const ModelParams& params, const ModelConfig& config) {
  if (tokens.rank() != 2 || tokens.dim(1) != params.w_embed.dim(0)) {
    throw DimensionError("embed: token matrix " + to_string(tokens.shape()) +
                         " does not match embedding weights " +
                         to_string(params.w_embed.shape()));
  }
  const bool cls = config.pooling == Pooling::cls_token;
  const std::size_t n = tokens.dim(0) + (cls ? 1 : 0);
  if (params.pos_embed.dim(0) != n) {
    throw DimensionError("embed: " + std::to_string(n) + " positions but the positional table has " +
                         std::to_string(params.pos_embed.dim(0)) + " rows");
  }
  Tensor z = ops::add_row(ops::matmul(tokens, params.w_embed), params.b_embed);
  if (cls) z = ops::concat_rows({params.cls_token, z});
  return ops::add(z, params.pos_embed);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, Tensor* weights) {
  if (q.rank() != 2 || k.shape() != q.shape() || v.rank() != 2 || v.dim(0) != k.dim(0)) {
    throw DimensionError("attention: incompatible Q/K/V shapes " + to_string(q.shape()) + ", " +
                         to_string(k.shape()) + ", " + to_string(v.shape()));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  const Tensor scores = ops::scale(ops::matmul(q, ops::transpose(k)), scale);
  const Tensor alpha = ops::softmax(scores, 1);
  if (weights) *weights = alpha;
  return ops::matmul(alpha, v);
}

Tensor mhsa(const Tensor& x, const EncoderLayer& layer, const ModelConfig& config,
            AttentionTrace* trace) {
  if (x.rank() != 2 || x.dim(1) != config.dim) {
    throw DimensionError("mhsa: input " + to_string(x.shape()) + " does not have width " +
                         std::to_string(config.dim));
  }
  if (config.heads == 0 || config.dim % config.heads != 0 || layer.w_q.dim(1) != config.dim) {
    throw ConfigError("mhsa: head count does not divide the projection width");
  }
  const std::size_t dh = config.head_dim();
  const Tensor q = ops::add_row(ops::matmul(x, layer.w_q), layer.b_q);
  const Tensor k = ops::add_row(ops::matmul(x, layer.w_k), layer.b_k);
  const Tensor v = ops::add_row(ops::matmul(x, layer.w_v), layer.b_v);
  std::vector<Tensor> heads;
  heads.reserve(config.heads);
  for (std::size_t i = 0; i < config.heads; ++i) {
    Tensor weights;
    heads.push_back(attention(ops::slice_cols(q, i * dh, dh), ops::slice_cols(k, i * dh, dh),
                              ops::slice_cols(v, i * dh, dh), trace ? &weights : nullptr));
    if (trace) trace->weights.push_back(weights);
  }
  const Tensor merged = config.heads == 1 ? heads.front() : ops::concat_cols(heads);
  return ops::add_row(ops::matmul(merged, layer.w_o), layer.b_o);
}

Tensor ffn(const Tensor& x, const EncoderLayer& layer) {
  const Tensor hidden = ops::relu(ops::add_row(ops::matmul(x, layer.w_1), layer.b_1));
  return ops::add_row(ops::matmul(hidden, layer.w_2), layer.b_2);
}

Tensor encoder_block(const Tensor& x, const EncoderLayer& layer, const ModelConfig& config,
                     AttentionTrace* trace) {
  const double eps = config.layer_norm_eps;
  const Tensor y =
      ops::add(x, mhsa(ops::layer_norm(x, layer.ln1_gamma, layer.ln1_beta, eps), layer, config, trace));
  return ops::add(y, ffn(ops::layer_norm(y, layer.ln2_gamma, layer.ln2_beta, eps), layer));
}

Tensor classify_logits(const Tensor& z, const ModelParams& params, const ModelConfig& config) {
  const Tensor normed = ops::layer_norm(z, params.norm_gamma, params.norm_beta, config.layer_norm_eps);
  Tensor pooled;
  if (config.pooling == Pooling::cls_token) {
    const std::size_t first = 0;
    pooled = ops::gather_rows(normed, std::span(&first, 1));
  } else {
    pooled = ops::mean_rows(normed);
  }
  return ops::add_row(ops::matmul(pooled, params.w_cls), params.b_cls);
}

Tensor pool_and_classify(const Tensor& z, const ModelParams& params, const ModelConfig& config) {
  return ops::softmax(classify_logits(z, params, config), 1);
}

Tensor forward_tokens(const Tensor& tokens, const ModelParams& params, const ModelConfig& config,
                      AttentionTrace* trace) {
  if (params.layers.size() != config.layers) {
    throw ConfigError("parameters hold " + std::to_string(params.layers.size()) +
                      " layers, config expects " + std::to_string(config.layers));
  }
  Tensor z = embed(tokens, params, config);
  for (const auto& layer : params.layers) z = encoder_block(z, layer, config, trace);
  return classify_logits(z, params, config);
}

Tensor forward_logits(const Volume& volume, const ModelParams& params, const ModelConfig& config,
                      AttentionTrace* trace) {
  if (volume.extents != config.input_extents()) {
    throw DimensionError("volume " + volume.id + " has extents " + to_string(volume.extents) +
                         ", model expects " + to_string(config.input_extents()));
  }
  return forward_tokens(extract_tubelets(volume, config, params.dtype()), params, config, trace);
}

Tensor forward(std::span<const Volume> volumes, const ModelParams& params,
               const ModelConfig& config) {
  if (volumes.empty()) throw DimensionError("forward: empty batch");
  std::vector<Tensor> rows(volumes.size());
  const auto run = [&](std::size_t i) {
    rows[i] = ops::softmax(forward_logits(volumes[i], params, config), 1);
  };
  if (active_tape() != nullptr) {
    for (std::size_t i = 0; i < volumes.size(); ++i) run(i);
  } else {
    parallel_for(volumes.size(), run);
  }
  return ops::concat_rows(rows);
}

std::size_t argmax_row(const Tensor& probabilities, std::size_t row) {
  const std::size_t n = probabilities.dim(1);
  const auto values = probabilities.data().subspan(row * n, n);
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (values[j] > values[best]) best = j;
  }
  return best;
}

}  // namespace volformer
