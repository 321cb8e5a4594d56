#include "volformer/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "volformer/error.hpp"
#include "volformer/tape.hpp"

namespace volformer {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& leaf : leaves) worst = std::max(worst, leaf.max_relative_error);
  return worst;
}

GradCheckReport check_gradients(const std::function<Tensor()>& loss, std::span<Tensor> leaves,
                                double step, std::span<const std::string> names) {
  if (!(step > 0.0)) throw UsageError("finite-difference step must be positive");
  for (const auto& leaf : leaves) {
    if (leaf.dtype() != DType::f64) throw UsageError("gradient checks run in double precision");
    if (!leaf.requires_grad()) throw UsageError("gradient check leaf does not require grad");
  }

  Tape tape;
  {
    TapeScope scope(tape);
    Tensor value = loss();
    tape.backward(value);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& leaf : leaves) analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());

  GradCheckReport report;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    LeafCheck check;
    check.step = step;
    check.name = l < names.size() ? names[l] : "leaf" + std::to_string(l);
    auto values = leaves[l].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = loss().item();
      values[i] = original - step;
      const double down = loss().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[l][i], numeric);
      if (err > check.max_relative_error) {
        check.max_relative_error = err;
        check.worst_index = i;
      }
    }
    report.leaves.push_back(std::move(check));
  }
  return report;
}

GradCheckReport check_gradients(const std::function<Tensor()>& loss, std::span<Tensor> leaves,
                                std::span<const double> steps, std::span<const std::string> names) {
  if (steps.empty()) throw UsageError("no finite-difference steps given");
  GradCheckReport best = check_gradients(loss, leaves, steps.front(), names);
  for (std::size_t s = 1; s < steps.size(); ++s) {
    const GradCheckReport next = check_gradients(loss, leaves, steps[s], names);
    for (std::size_t l = 0; l < best.leaves.size(); ++l) {
      if (next.leaves[l].max_relative_error < best.leaves[l].max_relative_error) {
        best.leaves[l] = next.leaves[l];
      }
    }
  }
  return best;
}

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                               const Tensor& point, double step) {
  Tensor x = point.to(DType::f64);
  x.set_requires_grad(true);
  std::vector<Tensor> leaves{x};
  return check_gradients([&] { return f(x); }, leaves, step).max_relative_error();
}

}  // namespace volformer
