#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "volformer/manifest.hpp"

namespace volformer {

enum class StratifyBy { scan, subject };

StratifyBy parse_stratify_by(const std::string& name);
const char* to_string(StratifyBy by);

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
  StratifyBy stratify_by = StratifyBy::scan;
  std::size_t folds = 10;
  std::size_t repetition = 0;

  // ConfigError unless every fraction is positive, they sum to 1 and folds >= 2.
  void validate() const;
};

// Per-class split sizes for n items: train = round(train * n), then
// val = round(val * n), test = the remainder. Each part is clamped to hold at
// least one item (train first, then val). Rounding is half away from zero.
struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};
SplitCounts split_counts(std::size_t n, const SplitSpec& spec);

// Tags every entry train/val/test, stratified by class. Each class is shuffled
// with the seeded generator, then cut in train, val, test order.
//
// With StratifyBy::subject all scans of a subject land in the same split:
// subjects (keyed by subject_id, or by path when absent) are assigned to the
// class of their first scan and shuffled; walking the shuffled subjects with a
// running scan count, each subject goes to the split whose target range
// [0, train), [train, train + val), [train + val, n) holds its midpoint. Scan-level splitting lets scans of one
// subject straddle splits.
//
// DataError when a class has fewer than 3 items or a split would end up empty.
Manifest stratified_split(const Manifest& manifest, const SplitSpec& spec);

struct Fold {
  std::vector<std::size_t> train;  // train + validation pool, manifest indices
  std::vector<std::size_t> test;
};

// k class-stratified folds. Each class is shuffled with (seed, repetition);
// fold i takes items [floor(i n_c / k), floor((i + 1) n_c / k)) of class c as
// its test block, so every item is tested exactly once and per-fold class
// counts stay within one of n_c / k. DataError when a class has fewer than k
// items.
std::vector<Fold> make_folds(const Manifest& manifest, std::size_t k, std::uint64_t seed = 0,
                             std::size_t repetition = 0);

// Splits `pool` into (train, val) per class with val = round(fraction * n_c),
// clamped to [1, n_c - 1] when n_c >= 2.
struct Holdout {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};
Holdout stratified_holdout(const Manifest& manifest, const std::vector<std::size_t>& pool,
                           double val_fraction, std::uint64_t seed);

}  // namespace volformer
