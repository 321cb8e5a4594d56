#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "volformer/tensor.hpp"

// Differentiable tensor operations. Every op is a pure function of its inputs;
// when a tape is active and an input requires grad, the op appends a node with
// its vector-Jacobian product. The result dtype is f64 if any input is f64.
// Reductions run in a fixed loop order.
namespace volformer::ops {

// [m, k] x [k, n] -> [m, n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// [m, n] + [n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);

Tensor reshape(const Tensor& a, Shape shape);
// 2-D transpose.
Tensor transpose(const Tensor& a);

// Mean / sum of all elements, shape [1].
Tensor reduce_mean(const Tensor& a);
Tensor reduce_sum(const Tensor& a);
// Column means of a 2-D tensor, shape [1, n].
Tensor mean_rows(const Tensor& a);

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Max-subtracted softmax along `axis`. NumericError on non-finite input.
Tensor softmax(const Tensor& x, std::size_t axis);

// Normalizes over the last axis, then gamma * x_hat + beta. ConfigError when
// eps <= 0.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// Gradient mask is 1 for x > 0 and 0 otherwise (including x == 0).
Tensor relu(const Tensor& x);

// Mean over rows of -log softmax(logits)[label], via log-sum-exp.
// DataError for labels outside [0, n_classes).
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace volformer::ops
