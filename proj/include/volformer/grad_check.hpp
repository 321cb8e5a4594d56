#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "volformer/tensor.hpp"

namespace volformer {

// Relative error used by the checks: |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

struct LeafCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double step = 0.0;
};

struct GradCheckReport {
  std::vector<LeafCheck> leaves;
  double max_relative_error() const;
};

// Compares reverse-mode gradients of `loss` with central differences
// (f(x + h) - f(x - h)) / 2h, perturbing every element of every leaf in place
// (the original value is restored afterwards). Leaves must be f64 and require
// grad; `loss` must rebuild the graph from the leaves on every call and return
// a single-element tensor.
GradCheckReport check_gradients(const std::function<Tensor()>& loss,
                                std::span<Tensor> leaves, double step,
                                std::span<const std::string> names = {});

// Runs the check once per step and keeps, for each leaf, the step with the
// best agreement. Needed when a leaf has a structurally zero gradient (its
// central difference is pure roundoff, which shrinks as the step grows) next
// to leaves that need a small step for truncation error.
GradCheckReport check_gradients(const std::function<Tensor()>& loss,
                                std::span<Tensor> leaves, std::span<const double> steps,
                                std::span<const std::string> names = {});

// Single-input form: f maps `point` to a scalar. Returns the max relative error.
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                               const Tensor& point, double step);

}  // namespace volformer
