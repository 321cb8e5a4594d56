#include "volformer/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>
#include "volformer/bytes.hpp"
#include "volformer/checkpoint.hpp"
#include "volformer/error.hpp"
#include "volformer/ops.hpp"
#include "volformer/parallel.hpp"
#include "volformer/rng.hpp"
#include "volformer/tape.hpp"

namespace volformer {

namespace {

// Fixed gradient partition of a batch; independent of the thread count.
constexpr std::size_t kGradChunks = 8;
constexpr std::uint64_t kShuffleStream = 0x5348;

std::vector<int> labels_of(std::span<const Volume> volumes) {
  std::vector<int> labels;
  labels.reserve(volumes.size());
  for (const auto& v : volumes) labels.push_back(v.label);
  return labels;
}

std::vector<Tensor> leaves_of(const ModelParams& params) {
  std::vector<Tensor> out;
  for (const auto& a : params.arrays()) out.push_back(a.tensor);
  return out;
}

}  // namespace

Monitor parse_monitor(const std::string& name) {
  if (name == "val_loss") return Monitor::val_loss;
  if (name == "val_acc") return Monitor::val_acc;
  throw ConfigError("monitor must be val_loss or val_acc, got \"" + name + "\"");
}

const char* to_string(Monitor monitor) {
  return monitor == Monitor::val_loss ? "val_loss" : "val_acc";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

Tensor sparse_ce_loss(const Tensor& logits, std::span<const int> labels) {
  return ops::softmax_cross_entropy(logits, labels);
}

double sparse_ce_from_probabilities(const Tensor& probabilities, std::span<const int> labels) {
  if (probabilities.rank() != 2 || probabilities.dim(0) != labels.size()) {
    throw DimensionError("loss: " + std::to_string(labels.size()) + " labels for probabilities " +
                         to_string(probabilities.shape()));
  }
  const std::size_t c = probabilities.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw DataError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(c) + ")");
    }
    total -= std::log(probabilities(i, static_cast<std::size_t>(labels[i])));
  }
  return total / static_cast<double>(labels.size());
}

AdamState AdamState::for_leaves(std::span<const Tensor> leaves) {
  AdamState s;
  for (const auto& leaf : leaves) {
    s.m.emplace_back(leaf.numel(), 0.0);
    s.v.emplace_back(leaf.numel(), 0.0);
  }
  return s;
}

std::size_t AdamState::scalar_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i) n += m[i].size() + v[i].size();
  return n;
}

void adam_step(std::span<Tensor> leaves, AdamState& state, const TrainConfig& config) {
  if (state.m.size() != leaves.size()) {
    throw DimensionError("optimizer state holds " + std::to_string(state.m.size()) +
                         " arrays for " + std::to_string(leaves.size()) + " parameters");
  }
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const auto g = leaves[l].grad();
    if (g.size() != leaves[l].numel() || state.m[l].size() != g.size()) {
      throw DimensionError("optimizer: parameter " + std::to_string(l) + " has no matching gradient");
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient in parameter array " + std::to_string(l) +
                           " at element " + std::to_string(i) + "; step aborted");
      }
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const auto g = leaves[l].grad();
    auto w = leaves[l].mutable_data();
    auto& m = state.m[l];
    auto& v = state.v[l];
    const DType dtype = leaves[l].dtype();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] = round_to(dtype, w[i] - config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon));
    }
  }
}

bool ImprovementGate::offer(double value) {
  const bool better = !best_ || (monitor_ == Monitor::val_loss ? value < *best_ : value > *best_);
  if (better) best_ = value;
  return better;
}

Evaluation evaluate(std::span<const Volume> volumes, const ModelParams& params,
                    const ModelConfig& config) {
  if (volumes.empty()) throw DataError("cannot evaluate an empty set of volumes");
  std::vector<Tensor> logits(volumes.size());
  parallel_for(volumes.size(), [&](std::size_t i) {
    logits[i] = forward_logits(volumes[i], params, config);
  });
  Evaluation e;
  e.labels = labels_of(volumes);
  std::vector<Tensor> rows;
  rows.reserve(logits.size());
  for (const auto& l : logits) rows.push_back(ops::softmax(l, 1));
  e.probabilities = ops::concat_rows(rows);
  e.loss = ops::softmax_cross_entropy(ops::concat_rows(logits), e.labels).item();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    e.predictions.push_back(static_cast<int>(argmax_row(e.probabilities, i)));
    correct += e.predictions.back() == e.labels[i];
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(volumes.size());
  return e;
}

std::string history_to_jsonl(const std::vector<EpochRecord>& history) {
  std::string out;
  for (const auto& r : history) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.val_loss;
    j["val_acc"] = r.val_acc;
    j["checkpointed"] = r.checkpointed;
    out += j.dump();
    out += '\n';
  }
  return out;
}

TrainResult train(const ModelConfig& model_config, const ModelParams& init,
                  std::span<const Volume> train_set, std::span<const Volume> val_set,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  model_config.validate();
  if (train_set.empty()) throw DataError("training split is empty");
  if (val_set.empty()) throw DataError("validation split is empty");
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& v : *set) {
      if (v.label < 0 || static_cast<std::size_t>(v.label) >= model_config.n_classes) {
        throw DataError("volume " + v.id + " has label " + std::to_string(v.label) +
                        " outside [0, " + std::to_string(model_config.n_classes) + ")");
      }
    }
  }

  ModelParams params = init.clone();
  params.set_requires_grad(true);
  std::vector<Tensor> leaves = leaves_of(params);
  AdamState state = AdamState::for_leaves(leaves);

  const std::size_t n = train_set.size();
  const std::size_t max_chunks = std::min(kGradChunks, std::min(n, config.batch_size));
  std::vector<ModelParams> workers;
  std::vector<std::vector<Tensor>> worker_leaves;
  for (std::size_t c = 0; c < max_chunks; ++c) {
    workers.push_back(params.clone());
    workers.back().set_requires_grad(true);
    worker_leaves.push_back(leaves_of(workers.back()));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffler(config.seed, kShuffleStream);
  ImprovementGate gate(config.monitor);

  TrainResult result;
  result.best_params = params.clone();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffler.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += config.batch_size) {
      const std::size_t b1 = std::min(n, b0 + config.batch_size);
      const std::size_t batch = b1 - b0;
      const std::size_t chunks = std::min(max_chunks, batch);
      std::vector<double> chunk_loss(chunks, 0.0);
      parallel_for(chunks, [&](std::size_t c) {
        const std::size_t lo = b0 + c * batch / chunks, hi = b0 + (c + 1) * batch / chunks;
        auto& wl = worker_leaves[c];
        for (std::size_t l = 0; l < wl.size(); ++l) {
          std::copy(leaves[l].data().begin(), leaves[l].data().end(), wl[l].mutable_data().begin());
          wl[l].zero_grad();
        }
        std::vector<Tensor> rows;
        std::vector<int> labels;
        Tape tape;
        TapeScope scope(tape);
        for (std::size_t k = lo; k < hi; ++k) {
          rows.push_back(forward_logits(train_set[order[k]], workers[c], model_config));
          labels.push_back(train_set[order[k]].label);
        }
        // Chunk mean weighted by its share of the batch: chunk losses sum to
        // the batch mean.
        const Tensor loss = ops::scale(sparse_ce_loss(ops::concat_rows(rows), labels),
                                       static_cast<double>(hi - lo) / static_cast<double>(batch));
        tape.backward(loss);
        chunk_loss[c] = loss.item();
      });
      double batch_loss = 0.0;
      for (std::size_t l = 0; l < leaves.size(); ++l) {
        auto g = leaves[l].mutable_grad();
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t c = 0; c < chunks; ++c) {
          const auto wg = worker_leaves[c][l].grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += wg[i];
        }
      }
      for (double v : chunk_loss) batch_loss += v;
      adam_step(leaves, state, config);
      epoch_loss += batch_loss * static_cast<double>(batch);
    }

    const Evaluation val = evaluate(val_set, params, model_config);
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / static_cast<double>(n);
    record.val_loss = val.loss;
    record.val_acc = val.accuracy;
    record.checkpointed =
        gate.offer(config.monitor == Monitor::val_loss ? val.loss : val.accuracy);
    if (record.checkpointed) {
      result.best_params = params.clone();
      result.best_params.set_requires_grad(false);
      result.best_epoch = epoch;
      if (hooks.checkpoint_path) write_checkpoint(*hooks.checkpoint_path, model_config, result.best_params);
    }
    result.history.push_back(record);
    if (hooks.history_path) write_text_file(*hooks.history_path, history_to_jsonl(result.history));
    if (hooks.on_epoch) hooks.on_epoch(record);
  }
  result.final_params = params.clone();
  result.final_params.set_requires_grad(false);
  return result;
}

}  // namespace volformer
