#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volformer/model.hpp"
#include "volformer/volume.hpp"

namespace volformer {

enum class Monitor { val_loss, val_acc };

Monitor parse_monitor(const std::string& name);
const char* to_string(Monitor monitor);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 1500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::uint64_t seed = 0;
  Monitor monitor = Monitor::val_loss;

  // ConfigError on any violated invariant.
  void validate() const;
};

// Mean over rows of -ln softmax(logits)[label], fused log-sum-exp form.
// Differentiable. DataError for labels outside [0, n_classes).
Tensor sparse_ce_loss(const Tensor& logits, std::span<const int> labels);

// Same loss from probabilities, -mean ln p[label]; for reporting only.
double sparse_ce_from_probabilities(const Tensor& probabilities, std::span<const int> labels);

struct AdamState {
  std::vector<std::vector<double>> m, v;  // mirror the parameter arrays
  std::uint64_t t = 0;

  static AdamState for_leaves(std::span<const Tensor> leaves);
  std::size_t scalar_count() const;
};

// One bias-corrected Adam update of every leaf from its grad. t is incremented
// first. NumericError (leaving params and state untouched) if any grad is
// non-finite. f32 leaves are rounded after the update.
void adam_step(std::span<Tensor> leaves, AdamState& state, const TrainConfig& config);

// Strict-improvement gate: loss is minimized, accuracy maximized.
class ImprovementGate {
 public:
  explicit ImprovementGate(Monitor monitor) : monitor_(monitor) {}
  // True (and records the value) when `value` strictly beats the best so far.
  bool offer(double value);
  std::optional<double> best() const { return best_; }

 private:
  Monitor monitor_;
  std::optional<double> best_;
};

// Predictions of a model over a set of volumes.
struct Evaluation {
  Tensor probabilities;  // [n, n_classes]
  std::vector<int> labels;
  std::vector<int> predictions;
  double loss = 0.0;      // mean cross-entropy, from logits
  double accuracy = 0.0;  // fraction of argmax == label
};

// Runs volumes in parallel; DataError on an empty set.
Evaluation evaluate(std::span<const Volume> volumes, const ModelParams& params,
                    const ModelConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  bool checkpointed = false;
};

std::string history_to_jsonl(const std::vector<EpochRecord>& history);

struct TrainHooks {
  // Written on every strict improvement (VVCK).
  std::optional<std::filesystem::path> checkpoint_path;
  // Rewritten after every epoch with the full history so far.
  std::optional<std::filesystem::path> history_path;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ModelParams best_params;  // params at the last improving epoch
  ModelParams final_params;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

// Mini-batch Adam on `train`, gated checkpointing on `val`. The training order
// is reshuffled each epoch from a generator seeded with config.seed; the last
// partial batch is kept. Gradients of a batch are computed in a fixed number
// of chunks and summed in chunk order, so results do not depend on the thread
// count. DataError on an empty split.
TrainResult train(const ModelConfig& model_config, const ModelParams& init,
                  std::span<const Volume> train_set, std::span<const Volume> val_set,
                  const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace volformer
