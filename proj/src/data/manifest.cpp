#include "volformer/manifest.hpp"

#include <set>
#include <sstream>

#include <json.hpp>

#include "volformer/bytes.hpp"
#include "volformer/error.hpp"

namespace volformer {

using nlohmann::ordered_json;

const char* to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
    case SplitTag::unassigned: break;
  }
  return "unassigned";
}

std::vector<std::string> default_class_names(std::size_t n_classes) {
  if (n_classes == 3) return {"NC", "MCI", "AD"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_classes; ++i) names.push_back("class" + std::to_string(i));
  return names;
}

std::filesystem::path Manifest::resolve(const ManifestEntry& entry) const {
  std::filesystem::path p(entry.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<ManifestEntry> Manifest::with_split(SplitTag tag) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == tag) out.push_back(e);
  }
  return out;
}

std::vector<std::size_t> Manifest::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (const auto& e : entries) {
    if (e.label >= 0 && static_cast<std::size_t>(e.label) < counts.size()) ++counts[e.label];
  }
  return counts;
}

void Manifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.path).second) throw DataError("manifest: duplicate path " + e.path);
    if (e.label < 0 || static_cast<std::size_t>(e.label) >= num_classes()) {
      throw DataError("manifest: label " + std::to_string(e.label) + " of " + e.path +
                      " outside [0, " + std::to_string(num_classes()) + ")");
    }
  }
}

std::string manifest_to_jsonl(const Manifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    ordered_json record;
    record["path"] = e.path;
    record["label"] = e.label;
    record["subject_id"] = e.subject_id ? ordered_json(*e.subject_id) : ordered_json(nullptr);
    record["split"] = e.split == SplitTag::unassigned ? ordered_json(nullptr)
                                                      : ordered_json(to_string(e.split));
    out += record.dump();
    out += '\n';
  }
  return out;
}

Manifest manifest_from_jsonl(const std::string& text, std::size_t n_classes) {
  Manifest manifest;
  manifest.class_names = default_class_names(n_classes);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!record.is_object()) throw DataError(where + ": expected a JSON object");
    for (const auto& [key, value] : record.items()) {
      if (key != "path" && key != "label" && key != "subject_id" && key != "split") {
        throw DataError(where + ": unknown key \"" + key + "\"");
      }
    }
    ManifestEntry entry;
    if (!record.contains("path") || !record["path"].is_string()) {
      throw DataError(where + ": \"path\" must be a string");
    }
    entry.path = record["path"].get<std::string>();
    if (!record.contains("label") || !record["label"].is_number_integer()) {
      throw DataError(where + ": \"label\" must be an integer");
    }
    entry.label = record["label"].get<int>();
    if (record.contains("subject_id") && !record["subject_id"].is_null()) {
      if (!record["subject_id"].is_string()) {
        throw DataError(where + ": \"subject_id\" must be a string or null");
      }
      entry.subject_id = record["subject_id"].get<std::string>();
    }
    if (record.contains("split") && !record["split"].is_null()) {
      const auto tag = record["split"].is_string() ? record["split"].get<std::string>() : "";
      if (tag == "train") {
        entry.split = SplitTag::train;
      } else if (tag == "val") {
        entry.split = SplitTag::val;
      } else if (tag == "test") {
        entry.split = SplitTag::test;
      } else {
        throw DataError(where + ": \"split\" must be train, val, test or null");
      }
    }
    manifest.entries.push_back(std::move(entry));
  }
  manifest.validate();
  return manifest;
}

Manifest read_manifest(const std::filesystem::path& path, std::size_t n_classes) {
  const auto bytes = read_file(path);
  Manifest manifest = manifest_from_jsonl(std::string(bytes.begin(), bytes.end()), n_classes);
  manifest.base_dir = path.parent_path();
  return manifest;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  write_text_file(path, manifest_to_jsonl(manifest));
}

Volume load_entry(const Manifest& manifest, const ManifestEntry& entry) {
  Volume v = read_volume(manifest.resolve(entry));
  v.label = entry.label;
  v.subject_id = entry.subject_id;
  return v;
}

}  // namespace volformer
