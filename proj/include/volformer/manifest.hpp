#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "volformer/volume.hpp"

namespace volformer {

enum class SplitTag { unassigned, train, val, test };

const char* to_string(SplitTag tag);

struct ManifestEntry {
  std::string path;
  int label = 0;
  std::optional<std::string> subject_id;
  SplitTag split = SplitTag::unassigned;
};

// Labeled volume inventory. Relative entry paths resolve against base_dir
// (the directory holding the manifest file).
struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;
  std::filesystem::path base_dir;

  std::size_t num_classes() const { return class_names.size(); }
  std::filesystem::path resolve(const ManifestEntry& entry) const;
  // Entries carrying `tag`, in manifest order.
  std::vector<ManifestEntry> with_split(SplitTag tag) const;
  std::vector<std::size_t> class_counts() const;

  // DataError on duplicate paths or labels outside [0, num_classes()).
  void validate() const;
};

// NC / MCI / AD for three classes, "class<i>" otherwise.
std::vector<std::string> default_class_names(std::size_t n_classes);

// JSON-lines, one record per scan:
//   {"path": str, "label": int, "subject_id": str|null, "split": "train"|"val"|"test"|null}
// Keys are written in that order.
std::string manifest_to_jsonl(const Manifest& manifest);
Manifest manifest_from_jsonl(const std::string& text, std::size_t n_classes);

Manifest read_manifest(const std::filesystem::path& path, std::size_t n_classes = 3);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Reads the VVOL file of an entry and attaches its label and subject.
Volume load_entry(const Manifest& manifest, const ManifestEntry& entry);

}  // namespace volformer
