#pragma once

#include <functional>
#include <vector>

#include "volformer/tensor.hpp"

namespace volformer {

// Vector-Jacobian product: reads output.grad() and accumulates into the grad
// of every input that requires it.
using VjpFn = std::function<void(const Tensor& output, std::vector<Tensor>& inputs)>;

struct TapeNode {
  std::vector<Tensor> inputs;
  Tensor output;
  VjpFn vjp;
};

// Ordered record of differentiable operations. Nodes are appended as ops
// execute, so every node's inputs are leaves or outputs of earlier nodes.
// A tape belongs to the thread that records into it.
class Tape {
 public:
  void record(TapeNode node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<TapeNode>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

  // Reverse sweep from a single-element loss. Resets the grad of every tensor
  // the tape touches before seeding d(loss)/d(loss) = 1, so repeated calls on
  // the same tape give bit-identical gradients. Each node is visited once.
  void backward(const Tensor& loss);

 private:
  std::vector<TapeNode> nodes_;
};

// Makes `tape` the recording target of the current thread until destruction;
// the previously active tape (if any) is restored afterwards.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

inline void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

// Builds an op result from computed values: rounds to `dtype`, enforces the
// finite-output invariant (NumericError naming `op`), and records a tape node
// when a tape is active and any input requires grad.
Tensor make_op_result(const char* op, Shape shape, std::vector<double> values, DType dtype,
                      std::vector<Tensor> inputs, VjpFn vjp);

}  // namespace volformer
