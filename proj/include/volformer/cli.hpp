#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "volformer/model.hpp"
#include "volformer/preprocess.hpp"
#include "volformer/split.hpp"
#include "volformer/training.hpp"

namespace volformer {

// Everything a command can be configured with. Loaded from one flat JSON
// object; every key is also a command-line flag (flags win).
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SplitSpec split;
  std::uint64_t seed = 0;  // drives init, shuffling, splits and synthesis
  std::size_t repetitions = 1;
  std::string eval_split = "test";  // train | val | test | all
  double cv_val_fraction = 0.25;    // validation share of each CV training pool
  NormalizeMode normalize = NormalizeMode::minmax;
  std::size_t n_per_class = 10;
  double noise_sigma = 0.1;
  std::filesystem::path manifest;
  std::filesystem::path data_dir = "data";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path checkpoint;  // empty: <checkpoint_dir>/best.vvck
  std::filesystem::path report = "report.json";
  std::filesystem::path predictions = "predictions.jsonl";

  std::filesystem::path checkpoint_path() const;
  // ConfigError on invalid values.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::string default_value;  // as printed in --help
};

// Every config key, in --help order.
std::vector<ConfigKey> config_keys();

// Applies a JSON object on top of `base`. ConfigError on unknown keys or
// values of the wrong type.
RunConfig run_config_from_json(const std::string& json_text, RunConfig base = {});
std::string run_config_to_json(const RunConfig& config);

// Entry point of the volformer executable. Returns the process exit code:
// 0 success, 1 invalid input, 2 I/O error, 3 checkpoint/config mismatch.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace volformer
