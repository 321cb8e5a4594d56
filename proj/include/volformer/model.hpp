#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "volformer/tensor.hpp"
#include "volformer/volume.hpp"

namespace volformer {

enum class Pooling : std::uint8_t { global_average = 0, cls_token = 1 };

Pooling parse_pooling(const std::string& name);
const char* to_string(Pooling pooling);

// Architecture hyperparameters. Defaults are the reference configuration:
// 32x64x64x1 input, 32x16x16 tubelets, width 32, 16 heads, 16 layers.
struct ModelConfig {
  std::size_t t = 32, h = 64, w = 64, c = 1;
  std::size_t patch_t = 32, patch_h = 16, patch_w = 16;
  std::size_t dim = 32;
  std::size_t heads = 16;
  std::size_t layers = 16;
  std::size_t ffn_mult = 4;
  double layer_norm_eps = 1e-6;
  Pooling pooling = Pooling::global_average;
  std::size_t n_classes = 3;
  // Reserved; only 0 is accepted.
  double dropout = 0.0;

  std::size_t head_dim() const { return dim / heads; }
  // Key dimension in the 1/sqrt(d_k) attention scale.
  std::size_t key_dim() const { return head_dim(); }
  std::size_t token_width() const { return patch_t * patch_h * patch_w * c; }
  VolumeExtents input_extents() const;

  // ConfigError on any violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct TokenGrid {
  std::size_t n_t = 0, n_h = 0, n_w = 0;
  std::size_t count() const { return n_t * n_h * n_w; }
};

// Floor division of the input extents by the tubelet extents; trailing
// remainder voxels are not covered. ConfigError if any axis gets 0 tokens.
TokenGrid token_grid(const ModelConfig& config);

// Human-readable notes about lossy but legal settings (e.g. cropped voxels).
std::vector<std::string> config_warnings(const ModelConfig& config);

struct EncoderLayer {
  Tensor ln1_gamma, ln1_beta;
  Tensor w_q, b_q, w_k, b_k, w_v, b_v;  // [dim, dim]; head i owns columns [i*dh, (i+1)*dh)
  Tensor w_o, b_o;
  Tensor ln2_gamma, ln2_beta;
  Tensor w_1, b_1;  // [dim, ffn_mult*dim]
  Tensor w_2, b_2;  // [ffn_mult*dim, dim]
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Every learnable array. Tensors are shared handles, so the views returned by
// arrays() alias the fields.
struct ModelParams {
  Tensor w_embed, b_embed;  // [token_width, dim], [dim]
  Tensor pos_embed;         // [tokens (+1 with a cls token), dim]
  Tensor cls_token;         // [1, dim]; undefined under global-average pooling
  std::vector<EncoderLayer> layers;
  Tensor norm_gamma, norm_beta;
  Tensor w_cls, b_cls;  // [dim, n_classes], [n_classes]

  // Canonical order: embed.*, pos_embed, cls_token, layers.<i>.*, norm.*, head.*
  std::vector<NamedTensor> arrays() const;
  std::size_t scalar_count() const;
  DType dtype() const { return w_embed.dtype(); }

  ModelParams clone() const;
  ModelParams to(DType dtype) const;
  void set_requires_grad(bool flag);
};

// Names and shapes of every array for `config`, in canonical order.
std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& config);

// Exact trainable scalar count for `config`.
std::size_t count_params(const ModelConfig& config);

// All-zero parameters with the layout of `config`.
ModelParams zero_params(const ModelConfig& config, DType dtype = DType::f32);

// Truncated normal (sigma 0.02, cut at 2 sigma) for projection matrices and the
// cls token; zeros for biases and the positional table; ones/zeros for
// layer-norm gamma/beta. Draws are taken in canonical array order.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed, DType dtype = DType::f32);

// Non-overlapping tubelets as rows, ordered t-major, then h, then w; each row
// flattens its (t, h, w, c) block row-major. Uses the volume's own extents;
// DimensionError when the volume is smaller than a tubelet or has a different
// channel count.
Tensor extract_tubelets(const Volume& volume, const ModelConfig& config,
                        DType dtype = DType::f32);

// z0 = tokens * W_E + b_E + E_pos, with the cls row (cls_token + E_pos[0])
// prepended under cls-token pooling.
Tensor embed(const Tensor& tokens, const ModelParams& params, const ModelConfig& config);

// Attention weights of every (layer, head), in execution order.
struct AttentionTrace {
  std::vector<Tensor> weights;
};

// softmax(Q K^T / sqrt(d_k)) V with d_k = Q's column count. `weights`, when
// given, receives the [N, N] attention matrix.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, Tensor* weights = nullptr);

Tensor mhsa(const Tensor& x, const EncoderLayer& layer, const ModelConfig& config,
            AttentionTrace* trace = nullptr);
Tensor ffn(const Tensor& x, const EncoderLayer& layer);
// Pre-norm residual block: y = x + mhsa(LN1(x)); out = y + ffn(LN2(y)).
Tensor encoder_block(const Tensor& x, const EncoderLayer& layer, const ModelConfig& config,
                     AttentionTrace* trace = nullptr);

// Final layer norm, pooling (row 0 for cls-token, row mean otherwise), then the
// linear head. Returns [1, n_classes] logits.
Tensor classify_logits(const Tensor& z, const ModelParams& params, const ModelConfig& config);
// softmax of classify_logits.
Tensor pool_and_classify(const Tensor& z, const ModelParams& params, const ModelConfig& config);

// Token matrix -> [1, n_classes] logits.
Tensor forward_tokens(const Tensor& tokens, const ModelParams& params, const ModelConfig& config,
                      AttentionTrace* trace = nullptr);
// One volume -> [1, n_classes] logits. DimensionError unless the volume has the
// configured input extents.
Tensor forward_logits(const Volume& volume, const ModelParams& params, const ModelConfig& config,
                      AttentionTrace* trace = nullptr);
// Batch -> [batch, n_classes] probabilities, each volume independently. Runs
// volumes in parallel when no tape is recording.
Tensor forward(std::span<const Volume> volumes, const ModelParams& params,
               const ModelConfig& config);

// Index of the largest entry of row `row`; ties go to the lowest index.
std::size_t argmax_row(const Tensor& probabilities, std::size_t row);

}  // namespace volformer
