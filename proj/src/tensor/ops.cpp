#include "volformer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "volformer/error.hpp"
#include "volformer/tape.hpp"

namespace volformer::ops {

namespace {

DType promote(const Tensor& a) { return a.dtype(); }

DType promote(const Tensor& a, const Tensor& b) {
  return (a.dtype() == DType::f64 || b.dtype() == DType::f64) ? DType::f64 : DType::f32;
}

DType promote(const std::vector<Tensor>& parts) {
  for (const auto& p : parts) {
    if (p.dtype() == DType::f64) return DType::f64;
  }
  return DType::f32;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

void require_finite(const Tensor& t, const char* op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += aip * B[p * n + j];
    }
  }
  return make_op_result(
      "matmul", {m, n}, std::move(c), promote(a, b), {a, b},
      [m, k, n](const Tensor& out, std::vector<Tensor>& in) {
        const auto G = out.grad();
        Tensor& ta = in[0];
        Tensor& tb = in[1];
        if (ta.requires_grad()) {
          const auto B = tb.data();
          auto dA = ta.mutable_grad();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
              dA[i * k + p] += acc;
            }
          }
        }
        if (tb.requires_grad()) {
          const auto A = ta.data();
          auto dB = tb.mutable_grad();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = A[i * k + p];
              for (std::size_t j = 0; j < n; ++j) dB[p * n + j] += aip * G[i * n + j];
            }
          }
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> c(A.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = A[i] + B[i];
  return make_op_result("add", a.shape(), std::move(c), promote(a, b), {a, b},
                        [](const Tensor& out, std::vector<Tensor>& in) {
                          const auto G = out.grad();
                          for (auto& t : in) {
                            if (!t.requires_grad()) continue;
                            auto d = t.mutable_grad();
                            for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i];
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> c(A.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = A[i] * B[i];
  return make_op_result("mul", a.shape(), std::move(c), promote(a, b), {a, b},
                        [](const Tensor& out, std::vector<Tensor>& in) {
                          const auto G = out.grad();
                          const auto A = in[0].data();
                          const auto B = in[1].data();
                          if (in[0].requires_grad()) {
                            auto d = in[0].mutable_grad();
                            for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * B[i];
                          }
                          if (in[1].requires_grad()) {
                            auto d = in[1].mutable_grad();
                            for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * A[i];
                          }
                        });
}

Tensor scale(const Tensor& a, double factor) {
  const auto A = a.data();
  std::vector<double> c(A.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = A[i] * factor;
  return make_op_result("scale", a.shape(), std::move(c), promote(a), {a},
                        [factor](const Tensor& out, std::vector<Tensor>& in) {
                          if (!in[0].requires_grad()) return;
                          const auto G = out.grad();
                          auto d = in[0].mutable_grad();
                          for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * factor;
                        });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_rank(a, 2, "add_row");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (row.numel() != n) {
    throw DimensionError("add_row: row of shape " + to_string(row.shape()) +
                         " does not match columns of " + to_string(a.shape()));
  }
  const auto A = a.data();
  const auto R = row.data();
  std::vector<double> c(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = A[i * n + j] + R[j];
  }
  return make_op_result("add_row", a.shape(), std::move(c), promote(a, row), {a, row},
                        [m, n](const Tensor& out, std::vector<Tensor>& in) {
                          const auto G = out.grad();
                          if (in[0].requires_grad()) {
                            auto d = in[0].mutable_grad();
                            for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i];
                          }
                          if (in[1].requires_grad()) {
                            auto d = in[1].mutable_grad();
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t j = 0; j < n; ++j) d[j] += G[i * n + j];
                            }
                          }
                        });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (volformer::numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " +
                         to_string(shape));
  }
  const auto A = a.data();
  return make_op_result("reshape", std::move(shape), std::vector<double>(A.begin(), A.end()),
                        promote(a), {a}, [](const Tensor& out, std::vector<Tensor>& in) {
                          if (!in[0].requires_grad()) return;
                          const auto G = out.grad();
                          auto d = in[0].mutable_grad();
                          for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i];
                        });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto A = a.data();
  std::vector<double> c(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[j * m + i] = A[i * n + j];
  }
  return make_op_result("transpose", {n, m}, std::move(c), promote(a), {a},
                        [m, n](const Tensor& out, std::vector<Tensor>& in) {
                          if (!in[0].requires_grad()) return;
                          const auto G = out.grad();
                          auto d = in[0].mutable_grad();
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < n; ++j) d[i * n + j] += G[j * m + i];
                          }
                        });
}

Tensor reduce_sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_op_result("reduce_sum", {1}, {total}, promote(a), {a},
                        [](const Tensor& out, std::vector<Tensor>& in) {
                          if (!in[0].requires_grad()) return;
                          const double g = out.grad()[0];
                          for (auto& d : in[0].mutable_grad()) d += g;
                        });
}

Tensor reduce_mean(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  const double inv = 1.0 / static_cast<double>(a.numel());
  return make_op_result("reduce_mean", {1}, {total * inv}, promote(a), {a},
                        [inv](const Tensor& out, std::vector<Tensor>& in) {
                          if (!in[0].requires_grad()) return;
                          const double g = out.grad()[0] * inv;
                          for (auto& d : in[0].mutable_grad()) d += g;
                        });
}

Tensor mean_rows(const Tensor& a) {
  require_rank(a, 2, "mean_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto A = a.data();
  std::vector<double> c(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[j] += A[i * n + j];
  }
  const double inv = 1.0 / static_cast<double>(m);
  for (auto& v : c) v *= inv;
  return make_op_result("mean_rows", {1, n}, std::move(c), promote(a), {a},
                        [m, n, inv](const Tensor& out, std::vector<Tensor>& in) {
                          if (!in[0].requires_grad()) return;
                          const auto G = out.grad();
                          auto d = in[0].mutable_grad();
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < n; ++j) d[i * n + j] += G[j] * inv;
                          }
                        });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_rank(a, 2, "gather_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  const auto A = a.data();
  std::vector<double> c(rows.size() * n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " +
                           to_string(a.shape()));
    }
    std::copy_n(A.begin() + static_cast<std::ptrdiff_t>(rows[r] * n), n,
                c.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return make_op_result("gather_rows", {rows.size(), n}, std::move(c), promote(a), {a},
                        [index = std::move(index), n](const Tensor& out, std::vector<Tensor>& in) {
                          if (!in[0].requires_grad()) return;
                          const auto G = out.grad();
                          auto d = in[0].mutable_grad();
                          for (std::size_t r = 0; r < index.size(); ++r) {
                            for (std::size_t j = 0; j < n; ++j) d[index[r] * n + j] += G[r * n + j];
                          }
                        });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts.front().rank() == 2 ? parts.front().dim(1) : 0;
  std::size_t m = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != n) throw DimensionError("concat_rows: column counts differ");
    m += p.dim(0);
  }
  std::vector<double> c;
  c.reserve(m * n);
  for (const auto& p : parts) c.insert(c.end(), p.data().begin(), p.data().end());
  return make_op_result("concat_rows", {m, n}, std::move(c), promote(parts), parts,
                        [](const Tensor& out, std::vector<Tensor>& in) {
                          const auto G = out.grad();
                          std::size_t offset = 0;
                          for (auto& t : in) {
                            const std::size_t len = t.numel();
                            if (t.requires_grad()) {
                              auto d = t.mutable_grad();
                              for (std::size_t i = 0; i < len; ++i) d[i] += G[offset + i];
                            }
                            offset += len;
                          }
                        });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_rank(a, 2, "slice_cols");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (count == 0 || begin + count > n) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         to_string(a.shape()));
  }
  const auto A = a.data();
  std::vector<double> c(m * count);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < count; ++j) c[i * count + j] = A[i * n + begin + j];
  }
  return make_op_result("slice_cols", {m, count}, std::move(c), promote(a), {a},
                        [m, n, begin, count](const Tensor& out, std::vector<Tensor>& in) {
                          if (!in[0].requires_grad()) return;
                          const auto G = out.grad();
                          auto d = in[0].mutable_grad();
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < count; ++j) {
                              d[i * n + begin + j] += G[i * count + j];
                            }
                          }
                        });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rank() == 2 ? parts.front().dim(0) : 0;
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) throw DimensionError("concat_cols: row counts differ");
    n += p.dim(1);
  }
  std::vector<double> c(m * n);
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    const auto P = p.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < w; ++j) c[i * n + col + j] = P[i * w + j];
    }
    col += w;
  }
  return make_op_result("concat_cols", {m, n}, std::move(c), promote(parts), parts,
                        [m, n](const Tensor& out, std::vector<Tensor>& in) {
                          const auto G = out.grad();
                          std::size_t col = 0;
                          for (auto& t : in) {
                            const std::size_t w = t.dim(1);
                            if (t.requires_grad()) {
                              auto d = t.mutable_grad();
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t j = 0; j < w; ++j) d[i * w + j] += G[i * n + col + j];
                              }
                            }
                            col += w;
                          }
                        });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                         to_string(x.shape()));
  }
  require_finite(x, "softmax");
  const auto& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  const auto X = x.data();
  std::vector<double> y(X.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < len; ++k) peak = std::max(peak, X[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(X[base + k * inner] - peak);
        y[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) y[base + k * inner] /= total;
    }
  }
  return make_op_result(
      "softmax", shape, std::move(y), promote(x), {x},
      [outer, inner, len](const Tensor& out, std::vector<Tensor>& in) {
        if (!in[0].requires_grad()) return;
        const auto Y = out.data();
        const auto G = out.grad();
        auto d = in[0].mutable_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * len * inner + i;
            double dot = 0.0;
            for (std::size_t k = 0; k < len; ++k) dot += G[base + k * inner] * Y[base + k * inner];
            for (std::size_t k = 0; k < len; ++k) {
              const std::size_t at = base + k * inner;
              d[at] += Y[at] * (G[at] - dot);
            }
          }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t n = x.shape().back();
  if (gamma.numel() != n || beta.numel() != n) {
    throw DimensionError("layer_norm: gamma/beta must have " + std::to_string(n) + " elements");
  }
  const std::size_t rows = x.numel() / n;
  const auto X = x.data();
  const auto Gm = gamma.data();
  const auto Bt = beta.data();
  std::vector<double> y(X.size());
  // Per-row normalized values and reciprocal std, reused by the vjp.
  std::vector<double> xhat(X.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += X[base + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = X[base + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[base + j] = (X[base + j] - mean) * inv_std[r];
      y[base + j] = Gm[j] * xhat[base + j] + Bt[j];
    }
  }
  const DType dtype = promote({x, gamma, beta});
  return make_op_result(
      "layer_norm", x.shape(), std::move(y), dtype, {x, gamma, beta},
      [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          const Tensor& out, std::vector<Tensor>& in) {
        const auto G = out.grad();
        const auto Gm = in[1].data();
        if (in[1].requires_grad()) {
          auto d = in[1].mutable_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < n; ++j) d[j] += G[r * n + j] * xhat[r * n + j];
          }
        }
        if (in[2].requires_grad()) {
          auto d = in[2].mutable_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < n; ++j) d[j] += G[r * n + j];
          }
        }
        if (in[0].requires_grad()) {
          auto d = in[0].mutable_grad();
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t base = r * n;
            double mean_g = 0.0, mean_gx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double gh = G[base + j] * Gm[j];
              mean_g += gh;
              mean_gx += gh * xhat[base + j];
            }
            mean_g *= inv_n;
            mean_gx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double gh = G[base + j] * Gm[j];
              d[base + j] += inv_std[r] * (gh - mean_g - xhat[base + j] * mean_gx);
            }
          }
        }
      });
}

Tensor relu(const Tensor& x) {
  const auto X = x.data();
  std::vector<double> y(X.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = X[i] > 0.0 ? X[i] : 0.0;
  return make_op_result("relu", x.shape(), std::move(y), promote(x), {x},
                        [](const Tensor& out, std::vector<Tensor>& in) {
                          if (!in[0].requires_grad()) return;
                          const auto G = out.grad();
                          const auto X = in[0].data();
                          auto d = in[0].mutable_grad();
                          for (std::size_t i = 0; i < G.size(); ++i) {
                            if (X[i] > 0.0) d[i] += G[i];
                          }
                        });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  require_finite(logits, "softmax_cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(batch) + " rows");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DataError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
  }
  const auto Z = logits.data();
  std::vector<double> probs(Z.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t base = b * classes;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) peak = std::max(peak, Z[base + c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(Z[base + c] - peak);
    const double lse = peak + std::log(sum);
    for (std::size_t c = 0; c < classes; ++c) probs[base + c] = std::exp(Z[base + c] - lse);
    total += lse - Z[base + static_cast<std::size_t>(labels[b])];
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::vector<int> targets(labels.begin(), labels.end());
  return make_op_result(
      "softmax_cross_entropy", {1}, {total * inv_batch}, promote(logits), {logits},
      [probs = std::move(probs), targets = std::move(targets), classes, inv_batch](
          const Tensor& out, std::vector<Tensor>& in) {
        if (!in[0].requires_grad()) return;
        const double g = out.grad()[0] * inv_batch;
        auto d = in[0].mutable_grad();
        for (std::size_t b = 0; b < targets.size(); ++b) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = static_cast<std::size_t>(targets[b]) == c ? 1.0 : 0.0;
            d[b * classes + c] += g * (probs[b * classes + c] - onehot);
          }
        }
      });
}

}  // namespace volformer::ops
