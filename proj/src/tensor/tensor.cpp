#include "volformer/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "volformer/error.hpp"

namespace volformer {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::data: return "data error";
    case ErrorKind::format: return "format error";
    case ErrorKind::usage: return "usage error";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::mismatch: return "checkpoint mismatch";
  }
  return "error";
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

const char* to_string(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, DType dtype, bool requires_grad) {
  return full(std::move(shape), 0.0, dtype, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, DType dtype, bool requires_grad) {
  check_shape(shape);
  const std::size_t n = volformer::numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), dtype, requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, DType dtype, bool requires_grad) {
  check_shape(shape);
  if (values.size() != volformer::numel(shape)) {
    throw DimensionError("tensor of shape " + to_string(shape) + " needs " +
                         std::to_string(volformer::numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->dtype = dtype;
  if (dtype == DType::f32) {
    for (auto& v : impl->data) v = round_to(dtype, v);
  }
  Tensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::scalar(double value, DType dtype, bool requires_grad) {
  return from({1}, {value}, dtype, requires_grad);
}

const Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return *impl_;
}

Tensor::Impl& Tensor::impl() {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl().data.size(); }
DType Tensor::dtype() const { return impl().dtype; }

std::span<const double> Tensor::data() const { return impl().data; }
std::span<double> Tensor::mutable_data() { return impl().data; }

bool Tensor::requires_grad() const { return impl().requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  auto& self = impl();
  self.requires_grad = flag;
  if (flag) {
    self.grad.assign(self.data.size(), 0.0);
  } else {
    self.grad.clear();
  }
}

std::span<const double> Tensor::grad() const { return impl().grad; }
std::span<double> Tensor::mutable_grad() { return impl().grad; }

void Tensor::zero_grad() {
  auto& g = impl().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() needs a single-element tensor, got shape " + to_string(shape()));
  }
  return impl().data[0];
}

double Tensor::operator()(std::size_t row, std::size_t col) const {
  const auto& s = shape();
  if (s.size() != 2 || row >= s[0] || col >= s[1]) {
    throw DimensionError("index (" + std::to_string(row) + ", " + std::to_string(col) +
                         ") invalid for shape " + to_string(s));
  }
  return impl().data[row * s[1] + col];
}

Tensor Tensor::clone() const {
  const auto& self = impl();
  auto copy = std::make_shared<Impl>(self);
  return Tensor(std::move(copy));
}

Tensor Tensor::to(DType dtype) const {
  const auto& self = impl();
  return from(self.shape, self.data, dtype, self.requires_grad);
}

}  // namespace volformer
