#include "volformer/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <span>

#include "volformer/error.hpp"
#include "volformer/rng.hpp"

namespace volformer {

StratifyBy parse_stratify_by(const std::string& name) {
  if (name == "scan") return StratifyBy::scan;
  if (name == "subject") return StratifyBy::subject;
  throw ConfigError("stratify_by must be scan or subject, got \"" + name + "\"");
}

const char* to_string(StratifyBy by) { return by == StratifyBy::scan ? "scan" : "subject"; }

void SplitSpec::validate() const {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) {
    throw ConfigError("split fractions must all be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  if (folds < 2) throw ConfigError("fold count must be at least 2");
}

SplitCounts split_counts(std::size_t n, const SplitSpec& spec) {
  if (n < 3) throw DataError("a class needs at least 3 items to fill train/val/test");
  const auto round_part = [n](double fraction) {
    return static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  };
  SplitCounts c;
  c.train = std::clamp<std::size_t>(round_part(spec.train), 1, n - 2);
  c.val = std::clamp<std::size_t>(round_part(spec.val), 1, n - c.train - 1);
  c.test = n - c.train - c.val;
  return c;
}

namespace {

std::vector<std::vector<std::size_t>> by_class(const Manifest& manifest,
                                               std::span<const std::size_t> pool) {
  std::vector<std::vector<std::size_t>> groups(manifest.num_classes());
  for (auto i : pool) groups.at(static_cast<std::size_t>(manifest.entries[i].label)).push_back(i);
  return groups;
}

std::vector<std::size_t> all_indices(const Manifest& manifest) {
  std::vector<std::size_t> idx(manifest.entries.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

}  // namespace

Manifest stratified_split(const Manifest& manifest, const SplitSpec& spec) {
  spec.validate();
  manifest.validate();
  Manifest out = manifest;
  Rng rng(spec.seed);
  const auto classes = by_class(manifest, all_indices(manifest));

  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& members = classes[c];
    if (members.empty()) continue;
    if (members.size() < 3) {
      throw DataError("class " + manifest.class_names[c] + " has " +
                      std::to_string(members.size()) + " items; at least 3 are needed");
    }
    const SplitCounts target = split_counts(members.size(), spec);

    // Units are single scans, or all scans of one subject.
    std::vector<std::vector<std::size_t>> units;
    if (spec.stratify_by == StratifyBy::scan) {
      for (auto i : members) units.push_back({i});
    } else {
      std::map<std::string, std::size_t> unit_of;
      for (auto i : members) {
        const auto& e = manifest.entries[i];
        const std::string key = e.subject_id ? "s:" + *e.subject_id : "p:" + e.path;
        auto [it, inserted] = unit_of.emplace(key, units.size());
        if (inserted) units.emplace_back();
        units[it->second].push_back(i);
      }
    }
    rng.shuffle(std::span(units));

    // A unit goes to the split whose scan range holds the unit's midpoint in
    // the running scan count; with single-scan units this cuts exactly at the
    // targets.
    std::size_t n_train = 0, n_val = 0, n_test = 0, running = 0;
    for (const auto& unit : units) {
      const double mid = static_cast<double>(running) + static_cast<double>(unit.size()) / 2.0;
      running += unit.size();
      SplitTag tag;
      if (mid < static_cast<double>(target.train)) {
        tag = SplitTag::train;
        n_train += unit.size();
      } else if (mid < static_cast<double>(target.train + target.val)) {
        tag = SplitTag::val;
        n_val += unit.size();
      } else {
        tag = SplitTag::test;
        n_test += unit.size();
      }
      for (auto i : unit) out.entries[i].split = tag;
    }
    if (n_train == 0 || n_val == 0 || n_test == 0) {
      throw DataError("class " + manifest.class_names[c] +
                      " has too few subjects to fill train/val/test");
    }
  }

  if (spec.stratify_by == StratifyBy::subject) {
    // A subject whose scans carry different labels is split by class above;
    // force every scan of a subject into the split of its first scan.
    std::map<std::string, SplitTag> first_tag;
    for (auto& e : out.entries) {
      if (!e.subject_id) continue;
      auto [it, inserted] = first_tag.emplace(*e.subject_id, e.split);
      if (!inserted) e.split = it->second;
    }
  }
  return out;
}

std::vector<Fold> make_folds(const Manifest& manifest, std::size_t k, std::uint64_t seed,
                             std::size_t repetition) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  manifest.validate();
  Rng rng(seed, repetition);
  auto classes = by_class(manifest, all_indices(manifest));
  std::vector<Fold> folds(k);
  std::vector<std::size_t> fold_of(manifest.entries.size(), 0);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    auto& members = classes[c];
    if (members.empty()) continue;
    if (members.size() < k) {
      throw DataError("class " + manifest.class_names[c] + " has " +
                      std::to_string(members.size()) + " items, fewer than " + std::to_string(k) +
                      " folds");
    }
    rng.shuffle(std::span(members));
    const std::size_t n = members.size();
    for (std::size_t f = 0; f < k; ++f) {
      for (std::size_t j = f * n / k; j < (f + 1) * n / k; ++j) fold_of[members[j]] = f;
    }
  }
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? folds[f].test : folds[f].train).push_back(i);
    }
  }
  return folds;
}

Holdout stratified_holdout(const Manifest& manifest, const std::vector<std::size_t>& pool,
                           double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  auto classes = by_class(manifest, pool);
  std::vector<bool> is_val(manifest.entries.size(), false);
  for (auto& members : classes) {
    if (members.empty()) continue;
    rng.shuffle(std::span(members));
    std::size_t n_val =
        static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(members.size())));
    if (members.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
    for (std::size_t j = 0; j < n_val; ++j) is_val[members[j]] = true;
  }
  Holdout out;
  for (auto i : pool) (is_val[i] ? out.val : out.train).push_back(i);
  return out;
}

}  // namespace volformer
