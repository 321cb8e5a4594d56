#include "volformer/tape.hpp"

#include <cmath>
#include <string>

#include "volformer/error.hpp"

namespace volformer {

namespace {
thread_local Tape* current_tape = nullptr;
}  // namespace

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) { current_tape = &tape; }
TapeScope::~TapeScope() { current_tape = previous_; }

Tape* active_tape() { return current_tape; }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw UsageError("backward: loss does not depend on any tensor that requires grad");
  }

  for (auto& node : nodes_) {
    for (auto& input : node.inputs) {
      if (input.requires_grad()) input.zero_grad();
    }
    node.output.zero_grad();
  }

  Tensor seed = loss;
  seed.mutable_grad()[0] = 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->vjp(it->output, it->inputs);
  }
}

Tensor make_op_result(const char* op, Shape shape, std::vector<double> values, DType dtype,
                      std::vector<Tensor> inputs, VjpFn vjp) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite result");
  }
  Tensor out = Tensor::from(std::move(shape), std::move(values), dtype);

  Tape* tape = active_tape();
  if (tape == nullptr) return out;
  bool needs_grad = false;
  for (const auto& input : inputs) needs_grad = needs_grad || input.requires_grad();
  if (!needs_grad) return out;

  out.set_requires_grad(true);
  tape->record(TapeNode{std::move(inputs), out, std::move(vjp)});
  return out;
}

}  // namespace volformer
