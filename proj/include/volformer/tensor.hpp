#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace volformer {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Precision tag. Values are always held as double; an f32 tensor keeps every
// stored element exactly representable as a 32-bit float, so f32 results are
// what a float32 kernel with double accumulators would produce.
enum class DType : std::uint8_t { f32, f64 };

const char* to_string(DType dtype);

// Rounds to the nearest value representable in `dtype`.
inline double round_to(DType dtype, double x) {
  return dtype == DType::f32 ? static_cast<double>(static_cast<float>(x)) : x;
}

// Dense row-major tensor (last axis fastest) with an optional gradient slot.
//
// Tensor is a shared handle: copies alias the same storage, which is how the
// tape keeps references to intermediate results and how parameter arrays are
// updated in place by the optimizer. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dtype = DType::f32, bool requires_grad = false);
  static Tensor full(Shape shape, double value, DType dtype = DType::f32,
                     bool requires_grad = false);
  // Values are rounded to `dtype`. Throws DimensionError when the element
  // count does not match the shape.
  static Tensor from(Shape shape, std::vector<double> values, DType dtype = DType::f32,
                     bool requires_grad = false);
  static Tensor scalar(double value, DType dtype = DType::f32, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  DType dtype() const;

  std::span<const double> data() const;
  // Direct write access, meant for leaves (parameters, inputs). Writers are
  // responsible for keeping f32 tensors float-representable.
  std::span<double> mutable_data();

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  // Empty span unless requires_grad; zero-initialized on allocation.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  double item() const;
  double operator()(std::size_t row, std::size_t col) const;

  Tensor clone() const;
  // Detached copy converted to `dtype`; requires_grad is carried over.
  Tensor to(DType dtype) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    DType dtype = DType::f32;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  const Impl& impl() const;
  Impl& impl();

  std::shared_ptr<Impl> impl_;
};

}  // namespace volformer
