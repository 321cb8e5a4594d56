#include "volformer/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

#include "volformer/bytes.hpp"
#include "volformer/checkpoint.hpp"
#include "volformer/error.hpp"
#include "volformer/manifest.hpp"
#include "volformer/metrics.hpp"
#include "volformer/parallel.hpp"
#include "volformer/synthetic.hpp"

namespace volformer {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

enum class Kind { integer, real, text };

struct KeyDef {
  const char* name;
  Kind kind;
  const char* help;
  std::function<ordered_json(const RunConfig&)> get;
  std::function<void(RunConfig&, const ordered_json&)> set;
};

std::size_t as_size(const ordered_json& j, const char* key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError(std::string("config key \"") + key + "\" must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

double as_real(const ordered_json& j, const char* key) {
  if (!j.is_number()) throw ConfigError(std::string("config key \"") + key + "\" must be a number");
  return j.get<double>();
}

std::string as_text(const ordered_json& j, const char* key) {
  if (!j.is_string()) throw ConfigError(std::string("config key \"") + key + "\" must be a string");
  return j.get<std::string>();
}

#define SIZE_KEY(NAME, FIELD, HELP)                                                     \
  KeyDef {                                                                              \
    NAME, Kind::integer, HELP, [](const RunConfig& c) { return ordered_json(c.FIELD); }, \
        [](RunConfig& c, const ordered_json& j) { c.FIELD = as_size(j, NAME); }         \
  }
#define REAL_KEY(NAME, FIELD, HELP)                                                  \
  KeyDef {                                                                           \
    NAME, Kind::real, HELP, [](const RunConfig& c) { return ordered_json(c.FIELD); }, \
        [](RunConfig& c, const ordered_json& j) { c.FIELD = as_real(j, NAME); }      \
  }
#define PATH_KEY(NAME, FIELD, HELP)                                                            \
  KeyDef {                                                                                     \
    NAME, Kind::text, HELP, [](const RunConfig& c) { return ordered_json(c.FIELD.string()); }, \
        [](RunConfig& c, const ordered_json& j) { c.FIELD = as_text(j, NAME); }                \
  }
#define ENUM_KEY(NAME, FIELD, PARSE, HELP)                                                    \
  KeyDef {                                                                                    \
    NAME, Kind::text, HELP, [](const RunConfig& c) { return ordered_json(to_string(c.FIELD)); }, \
        [](RunConfig& c, const ordered_json& j) { c.FIELD = PARSE(as_text(j, NAME)); }        \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> keys = {
      SIZE_KEY("t", model.t, "input slices (T)"),
      SIZE_KEY("h", model.h, "input height (H)"),
      SIZE_KEY("w", model.w, "input width (W)"),
      SIZE_KEY("c", model.c, "input channels (C)"),
      SIZE_KEY("patch_t", model.patch_t, "tubelet slices"),
      SIZE_KEY("patch_h", model.patch_h, "tubelet height"),
      SIZE_KEY("patch_w", model.patch_w, "tubelet width"),
      SIZE_KEY("dim", model.dim, "projection dimension"),
      SIZE_KEY("heads", model.heads, "attention heads"),
      SIZE_KEY("layers", model.layers, "encoder layers"),
      SIZE_KEY("ffn_mult", model.ffn_mult, "feed-forward hidden width multiplier"),
      REAL_KEY("layer_norm_eps", model.layer_norm_eps, "layer-norm epsilon"),
      ENUM_KEY("pooling", model.pooling, parse_pooling, "global_average | cls_token"),
      SIZE_KEY("n_classes", model.n_classes, "number of classes"),
      REAL_KEY("dropout", model.dropout, "reserved, must be 0"),
      REAL_KEY("learning_rate", train.learning_rate, "Adam learning rate"),
      SIZE_KEY("batch_size", train.batch_size, "mini-batch size"),
      SIZE_KEY("epochs", train.epochs, "training epochs"),
      REAL_KEY("beta1", train.beta1, "Adam beta1"),
      REAL_KEY("beta2", train.beta2, "Adam beta2"),
      REAL_KEY("epsilon", train.epsilon, "Adam epsilon"),
      ENUM_KEY("monitor", train.monitor, parse_monitor, "checkpoint monitor: val_loss | val_acc"),
      SIZE_KEY("seed", seed, "seed for init, shuffling, splits and synthesis"),
      REAL_KEY("train_fraction", split.train, "train share of the fixed split"),
      REAL_KEY("val_fraction", split.val, "validation share of the fixed split"),
      REAL_KEY("test_fraction", split.test, "test share of the fixed split"),
      ENUM_KEY("stratify_by", split.stratify_by, parse_stratify_by, "scan | subject"),
      SIZE_KEY("folds", split.folds, "cross-validation folds"),
      SIZE_KEY("repetitions", repetitions, "cross-validation repetitions"),
      REAL_KEY("cv_val_fraction", cv_val_fraction, "validation share of each CV training pool"),
      KeyDef{"eval_split", Kind::text, "split to evaluate: train | val | test | all",
             [](const RunConfig& c) { return ordered_json(c.eval_split); },
             [](RunConfig& c, const ordered_json& j) { c.eval_split = as_text(j, "eval_split"); }},
      ENUM_KEY("normalize", normalize, parse_normalize_mode, "intensity normalization: minmax | zscore"),
      SIZE_KEY("n_per_class", n_per_class, "synthetic volumes per class"),
      REAL_KEY("noise_sigma", noise_sigma, "synthetic noise standard deviation"),
      PATH_KEY("manifest", manifest, "input manifest (JSON lines)"),
      PATH_KEY("data_dir", data_dir, "output directory of synth / preprocess"),
      PATH_KEY("checkpoint_dir", checkpoint_dir, "directory for best.vvck and history.jsonl"),
      PATH_KEY("checkpoint", checkpoint, "checkpoint to load (default <checkpoint_dir>/best.vvck)"),
      PATH_KEY("report", report, "metrics report path (JSON; text next to it as .txt)"),
      PATH_KEY("predictions", predictions, "prediction output (JSON lines)"),
  };
  return keys;
}

#undef SIZE_KEY
#undef REAL_KEY
#undef PATH_KEY
#undef ENUM_KEY

ordered_json parse_flag_value(const KeyDef& key, const std::string& text) {
  try {
    std::size_t used = 0;
    switch (key.kind) {
      case Kind::integer: {
        if (text.empty() || text[0] == '-') break;
        const unsigned long long v = std::stoull(text, &used);
        if (used == text.size()) return ordered_json(v);
        break;
      }
      case Kind::real: {
        const double v = std::stod(text, &used);
        if (used == text.size()) return ordered_json(v);
        break;
      }
      case Kind::text:
        return ordered_json(text);
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("--" + std::string(key.name) + ": cannot parse \"" + text + "\"");
}

std::string default_text(const KeyDef& key) {
  const ordered_json v = key.get(RunConfig{});
  if (!v.is_string()) return v.dump();
  return v.get<std::string>().empty() ? "\"\"" : v.get<std::string>();
}

// --- command plumbing -------------------------------------------------------

struct Context {
  RunConfig config;
  bool force = false;
  bool quiet = false;
  std::ostream& out;
  std::ostream& err;

  void progress(const std::string& line) const {
    if (!quiet) err << line << '\n' << std::flush;
  }
};

void guard_output(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw IoError("refusing to overwrite " + path.string() + " (use --force)");
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
}

void guard_output_dir(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir) && !fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw IoError("refusing to write into non-empty directory " + dir.string() + " (use --force)");
  }
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

Manifest load_manifest(const RunConfig& config) {
  if (config.manifest.empty()) throw ConfigError("no manifest given (set \"manifest\" or --manifest)");
  Manifest m = read_manifest(config.manifest, config.model.n_classes);
  m.validate();
  return m;
}

SplitSpec split_spec(const RunConfig& config) {
  SplitSpec spec = config.split;
  spec.seed = config.seed;
  return spec;
}

TrainConfig train_config(const RunConfig& config) {
  TrainConfig t = config.train;
  t.seed = config.seed;
  return t;
}

// Uses the manifest's split tags when any entry carries one; otherwise
// assigns the configured stratified split.
Manifest with_splits(const Manifest& manifest, const RunConfig& config) {
  const bool tagged = std::any_of(manifest.entries.begin(), manifest.entries.end(),
                                  [](const ManifestEntry& e) { return e.split != SplitTag::unassigned; });
  return tagged ? manifest : stratified_split(manifest, split_spec(config));
}

std::vector<Volume> load_entries(const Manifest& manifest, const std::vector<ManifestEntry>& entries) {
  std::vector<Volume> volumes(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) { volumes[i] = load_entry(manifest, entries[i]); });
  return volumes;
}

std::vector<ManifestEntry> select_split(const Manifest& manifest, const std::string& name) {
  if (name == "all") return manifest.entries;
  if (name == "train") return manifest.with_split(SplitTag::train);
  if (name == "val") return manifest.with_split(SplitTag::val);
  if (name == "test") return manifest.with_split(SplitTag::test);
  throw ConfigError("eval_split must be train, val, test or all, got \"" + name + "\"");
}

std::string with_commas(std::size_t n) {
  std::string s = std::to_string(n);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void warn_config(const Context& ctx) {
  for (const auto& w : config_warnings(ctx.config.model)) ctx.progress("warning: " + w);
}

// --- commands ---------------------------------------------------------------

int cmd_synth(Context& ctx) {
  const RunConfig& c = ctx.config;
  SyntheticSpec spec;
  spec.n_per_class = c.n_per_class;
  spec.n_classes = c.model.n_classes;
  spec.extents = c.model.input_extents();
  spec.noise_sigma = c.noise_sigma;
  spec.seed = c.seed;
  if (spec.n_per_class == 0) throw ConfigError("n_per_class must be positive");
  if (!(spec.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
  guard_output_dir(c.data_dir, ctx.force);
  const Manifest m = write_synthetic_dataset(spec, c.data_dir);
  ctx.out << "manifest: " << (c.data_dir / "manifest.jsonl").string() << '\n';
  const auto counts = m.class_counts();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    ctx.out << m.class_names[k] << ": " << counts[k] << '\n';
  }
  return 0;
}

int cmd_preprocess(Context& ctx) {
  const RunConfig& c = ctx.config;
  const Manifest in = load_manifest(c);
  if (in.entries.empty()) throw IoError("manifest " + c.manifest.string() + " has no entries");
  guard_output_dir(c.data_dir, ctx.force);

  Manifest out_manifest;
  out_manifest.class_names = in.class_names;
  out_manifest.base_dir = c.data_dir;
  std::size_t skipped = 0;
  for (const auto& entry : in.entries) {
    Volume v = load_entry(in, entry);
    try {
      v = select_central_slices(v, c.model.t);
    } catch (const DataError& e) {
      ctx.err << "skipped " << entry.path << ": " << e.what() << '\n';
      ++skipped;
      continue;
    }
    v = normalize_intensity(resample_slices(v, c.model.h, c.model.w), c.normalize);
    const std::string name = fs::path(entry.path).stem().string() + ".vvol";
    write_volume(v, c.data_dir / name);
    out_manifest.entries.push_back({name, entry.label, entry.subject_id, entry.split});
    ctx.progress("preprocessed " + entry.path + " -> " + to_string(v.extents));
  }
  if (out_manifest.entries.empty()) {
    throw DataError("every volume was skipped; nothing to write");
  }
  write_manifest(out_manifest, c.data_dir / "manifest.jsonl");
  ctx.out << "manifest: " << (c.data_dir / "manifest.jsonl").string() << '\n'
          << "written: " << out_manifest.entries.size() << ", skipped: " << skipped << '\n';
  return 0;
}

int cmd_train(Context& ctx) {
  const RunConfig& c = ctx.config;
  warn_config(ctx);
  const Manifest m = with_splits(load_manifest(c), c);
  const auto train_set = load_entries(m, m.with_split(SplitTag::train));
  const auto val_set = load_entries(m, m.with_split(SplitTag::val));
  const fs::path ckpt = c.checkpoint_path();
  const fs::path history = c.checkpoint_dir / "history.jsonl";
  guard_output(ckpt, ctx.force);
  guard_output(history, ctx.force);

  TrainHooks hooks;
  hooks.checkpoint_path = ckpt;
  hooks.history_path = history;
  hooks.on_epoch = [&](const EpochRecord& r) {
    ctx.progress("epoch " + std::to_string(r.epoch) + " train_loss " + fmt("%.6f", r.train_loss) +
                 " val_loss " + fmt("%.6f", r.val_loss) + " val_acc " + fmt("%.4f", r.val_acc) +
                 (r.checkpointed ? " *" : ""));
  };
  ctx.progress("training on " + std::to_string(train_set.size()) + " volumes, validating on " +
               std::to_string(val_set.size()));
  const TrainResult r = train(c.model, init_params(c.model, c.seed), train_set, val_set,
                              train_config(c), hooks);
  const EpochRecord& best = r.history[r.best_epoch - 1];
  ctx.out << "best epoch: " << r.best_epoch << " (val_loss " << fmt("%.6f", best.val_loss)
          << ", val_acc " << fmt("%.4f", best.val_acc) << ")\n"
          << "checkpoint: " << ckpt.string() << '\n'
          << "history: " << history.string() << '\n';
  return 0;
}

void write_report(Context& ctx, const std::string& json, const std::string& text) {
  const fs::path json_path = ctx.config.report;
  fs::path text_path = json_path;
  text_path.replace_extension(".txt");
  guard_output(json_path, ctx.force);
  guard_output(text_path, ctx.force);
  write_text_file(json_path, json);
  write_text_file(text_path, text);
  ctx.out << text << "report: " << json_path.string() << '\n';
}

int cmd_eval(Context& ctx) {
  const RunConfig& c = ctx.config;
  const Checkpoint ck = load_checkpoint_for(c.checkpoint_path(), c.model);
  const Manifest m = with_splits(load_manifest(c), c);
  const auto entries = select_split(m, c.eval_split);
  if (entries.empty()) throw DataError("split \"" + c.eval_split + "\" has no entries");
  const auto volumes = load_entries(m, entries);
  const Evaluation e = evaluate(volumes, ck.params, c.model);
  const ConfusionMatrix cm = confusion(e.labels, e.predictions, c.model.n_classes, m.class_names);
  const MetricsReport r = report(std::span(&cm, 1));
  write_report(ctx, report_to_json(r), report_to_text(r));
  return 0;
}

int cmd_cv(Context& ctx) {
  const RunConfig& c = ctx.config;
  warn_config(ctx);
  if (c.repetitions == 0) throw ConfigError("repetitions must be positive");
  if (!(c.cv_val_fraction > 0.0 && c.cv_val_fraction < 1.0)) {
    throw ConfigError("cv_val_fraction must lie in (0, 1)");
  }
  split_spec(c).validate();
  const Manifest m = load_manifest(c);
  const auto volumes = load_entries(m, m.entries);
  // Guard before the (long) loop so a refusal costs nothing.
  fs::path text_path = c.report;
  text_path.replace_extension(".txt");
  guard_output(c.report, ctx.force);
  guard_output(text_path, ctx.force);

  std::vector<ConfusionMatrix> matrices;
  ordered_json fold_reports = ordered_json::array();
  for (std::size_t rep = 0; rep < c.repetitions; ++rep) {
    const auto folds = make_folds(m, c.split.folds, c.seed, rep);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const Holdout h = stratified_holdout(m, folds[f].train, c.cv_val_fraction, c.seed + rep);
      const auto pick = [&](const std::vector<std::size_t>& idx) {
        std::vector<Volume> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) out.push_back(volumes[i]);
        return out;
      };
      const TrainResult r = train(c.model, init_params(c.model, c.seed), pick(h.train), pick(h.val),
                                  train_config(c));
      const Evaluation e = evaluate(pick(folds[f].test), r.best_params, c.model);
      matrices.push_back(confusion(e.labels, e.predictions, c.model.n_classes, m.class_names));
      const ConfusionMatrix& cm = matrices.back();

      ordered_json fr;
      fr["repetition"] = rep;
      fr["fold"] = f;
      fr["best_epoch"] = r.best_epoch;
      ordered_json tested = ordered_json::array();
      for (std::size_t i : folds[f].test) tested.push_back(m.entries[i].path);
      fr["test"] = tested;
      fr["report"] = ordered_json::parse(report_to_json(report(std::span(&cm, 1))));
      fold_reports.push_back(fr);
      ctx.progress("repetition " + std::to_string(rep) + " fold " + std::to_string(f) +
                   " accuracy " + fmt("%.4f", accuracy(cm)));
    }
  }
  const MetricsReport aggregate = report(matrices);
  ordered_json doc = ordered_json::parse(report_to_json(aggregate));
  doc["fold_reports"] = fold_reports;
  write_report(ctx, doc.dump(2) + "\n", report_to_text(aggregate));
  return 0;
}

int cmd_predict(Context& ctx, const std::vector<std::string>& files) {
  const RunConfig& c = ctx.config;
  const Checkpoint ck = load_checkpoint_for(c.checkpoint_path(), c.model);
  std::vector<Volume> volumes;
  std::vector<std::string> paths;
  std::vector<std::string> names = default_class_names(c.model.n_classes);
  bool labeled = false;
  if (!files.empty()) {
    for (const auto& f : files) {
      volumes.push_back(read_volume(f));
      paths.push_back(f);
    }
  } else {
    const Manifest m = load_manifest(c);
    if (m.entries.empty()) throw DataError("manifest has no entries");
    volumes = load_entries(m, m.entries);
    for (const auto& e : m.entries) paths.push_back(e.path);
    names = m.class_names;
    labeled = true;
  }
  const Tensor p = forward(volumes, ck.params, c.model);
  std::string lines;
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    ordered_json j;
    j["id"] = volumes[i].id;
    j["path"] = paths[i];
    std::vector<double> row(p.data().begin() + static_cast<std::ptrdiff_t>(i * p.dim(1)),
                            p.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * p.dim(1)));
    j["probabilities"] = row;
    const std::size_t k = argmax_row(p, i);
    j["predicted"] = k;
    j["class"] = names[k];
    if (labeled) j["label"] = volumes[i].label;
    lines += j.dump() + "\n";
  }
  guard_output(c.predictions, ctx.force);
  write_text_file(c.predictions, lines);
  ctx.out << "predictions: " << c.predictions.string() << " (" << volumes.size() << " volumes)\n";
  return 0;
}

int cmd_inspect(Context& ctx) {
  ModelConfig cfg = ctx.config.model;
  std::vector<std::pair<std::string, Shape>> layout;
  if (!ctx.config.checkpoint.empty()) {
    const Checkpoint ck = read_checkpoint(ctx.config.checkpoint);
    cfg = ck.config;
    ctx.out << "checkpoint: " << ctx.config.checkpoint.string() << '\n';
  }
  cfg.validate();
  const TokenGrid grid = token_grid(cfg);
  ctx.out << "input: " << cfg.t << "x" << cfg.h << "x" << cfg.w << "x" << cfg.c
          << ", tubelet " << cfg.patch_t << "x" << cfg.patch_h << "x" << cfg.patch_w
          << ", tokens " << grid.n_t << "x" << grid.n_h << "x" << grid.n_w << " = " << grid.count()
          << ", pooling " << to_string(cfg.pooling) << '\n';
  for (const auto& w : config_warnings(cfg)) ctx.out << "warning: " << w << '\n';
  for (const auto& [name, shape] : param_layout(cfg)) {
    ctx.out << "  " << name << ' ' << to_string(shape) << ' ' << numel(shape) << '\n';
  }
  ctx.out << "trainable parameters: " << with_commas(count_params(cfg)) << '\n';
  return 0;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io:
      return 2;
    case ErrorKind::mismatch:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

fs::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? checkpoint_dir / "best.vvck" : checkpoint;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  split.validate();
  if (eval_split != "train" && eval_split != "val" && eval_split != "test" && eval_split != "all") {
    throw ConfigError("eval_split must be train, val, test or all, got \"" + eval_split + "\"");
  }
}

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> out;
  for (const auto& k : key_table()) out.push_back({k.name, k.help, default_text(k)});
  return out;
}

RunConfig run_config_from_json(const std::string& json_text, RunConfig base) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& table = key_table();
    const auto key = std::find_if(table.begin(), table.end(),
                                  [&](const KeyDef& k) { return it.key() == k.name; });
    if (key == table.end()) throw ConfigError("unknown config key \"" + it.key() + "\"");
    key->set(base, it.value());
  }
  return base;
}

std::string run_config_to_json(const RunConfig& config) {
  ordered_json j;
  for (const auto& k : key_table()) j[k.name] = k.get(config);
  return j.dump(2) + "\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Volumetric video-transformer classifier: synthesize, preprocess, train, evaluate."};
  app.name("volformer");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_flag("--help", "print this help and exit");

  std::string config_path;
  bool force = false, quiet = false;
  app.add_option("--config", config_path, "JSON config file (flat keys, see below)");
  app.add_flag("--force", force, "overwrite existing outputs");
  app.add_flag("--quiet", quiet, "suppress progress output on stderr");

  std::map<std::string, std::string> flag_values;
  std::vector<std::pair<const KeyDef*, CLI::Option*>> key_options;
  for (const auto& k : key_table()) {
    auto* opt = app.add_option("--" + std::string(k.name), flag_values[k.name], k.help)
                    ->type_name(k.kind == Kind::integer ? "UINT" : k.kind == Kind::real ? "FLOAT" : "TEXT")
                    ->default_str(default_text(k))
                    ->group("Config keys (JSON or flag; flags win)");
    key_options.emplace_back(&k, opt);
  }

  std::string command;
  std::vector<std::string> predict_files;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"synth", "write a synthetic blob dataset (VVOL files + manifest) to data_dir"},
      {"preprocess", "central slices, resampling and normalization of a manifest into data_dir"},
      {"train", "train with improvement-gated checkpointing"},
      {"eval", "evaluate a checkpoint on eval_split and write a metrics report"},
      {"cv", "repeated stratified k-fold cross-validation"},
      {"predict", "class probabilities per volume as JSON lines"},
      {"inspect", "parameter count and per-array shapes"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&command, n = std::string(name)] { command = n; });
    if (std::string(name) == "predict") {
      sub->add_option("volumes", predict_files, "VVOL files (default: every manifest entry)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) {
      const auto bytes = read_file(config_path);
      config = run_config_from_json(std::string(bytes.begin(), bytes.end()));
    }
    ordered_json overrides = ordered_json::object();
    for (const auto& [key, opt] : key_options) {
      if (opt->count() > 0) overrides[key->name] = parse_flag_value(*key, flag_values[key->name]);
    }
    config = run_config_from_json(overrides.dump(), config);
    // Dataset commands only use the input extents, not the architecture.
    if (command == "synth" || command == "preprocess") {
      const auto& m = config.model;
      if (m.t == 0 || m.h == 0 || m.w == 0 || m.c == 0) throw ConfigError("input extents must be positive");
      if (m.n_classes == 0) throw ConfigError("n_classes must be positive");
    } else {
      config.validate();
    }

    Context ctx{config, force, quiet, out, err};
    if (command == "synth") return cmd_synth(ctx);
    if (command == "preprocess") return cmd_preprocess(ctx);
    if (command == "train") return cmd_train(ctx);
    if (command == "eval") return cmd_eval(ctx);
    if (command == "cv") return cmd_cv(ctx);
    if (command == "predict") return cmd_predict(ctx, predict_files);
    if (command == "inspect") return cmd_inspect(ctx);
    throw UsageError("no command given");
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return 2;
  }
}

}  // namespace volformer
