#include "volformer/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "volformer/error.hpp"
#include "volformer/manifest.hpp"

namespace volformer {

ConfusionMatrix::ConfusionMatrix(std::size_t n_classes, std::vector<std::string> class_names)
    : counts_(n_classes, std::vector<std::size_t>(n_classes, 0)), names_(std::move(class_names)) {
  if (n_classes == 0) throw UsageError("confusion matrix needs at least one class");
  if (names_.empty()) names_ = default_class_names(n_classes);
  if (names_.size() != n_classes) {
    throw UsageError(std::to_string(names_.size()) + " class names for " +
                     std::to_string(n_classes) + " classes");
  }
}

void ConfusionMatrix::add(int truth, int predicted) {
  const auto n = static_cast<int>(n_classes());
  if (truth < 0 || truth >= n || predicted < 0 || predicted >= n) {
    throw DataError("label pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                    ") outside [0, " + std::to_string(n) + ")");
  }
  ++counts_[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_classes() != n_classes() || other.names_ != names_) {
    throw UsageError("cannot merge confusion matrices over different classes");
  }
  for (std::size_t i = 0; i < n_classes(); ++i)
    for (std::size_t j = 0; j < n_classes(); ++j) counts_[i][j] += other.counts_[i][j];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts_) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < n_classes(); ++i) n += counts_[i][i];
  return n;
}

std::size_t ConfusionMatrix::tp(std::size_t c) const { return counts_.at(c).at(c); }

std::size_t ConfusionMatrix::fp(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < n_classes(); ++i)
    if (i != c) n += counts_[i].at(c);
  return n;
}

std::size_t ConfusionMatrix::fn(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < n_classes(); ++j)
    if (j != c) n += counts_.at(c)[j];
  return n;
}

std::size_t ConfusionMatrix::tn(std::size_t c) const { return total() - tp(c) - fp(c) - fn(c); }

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t n_classes, std::vector<std::string> class_names) {
  if (truth.size() != predicted.size()) {
    throw UsageError("confusion: " + std::to_string(truth.size()) + " labels but " +
                     std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm(n_classes, std::move(class_names));
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

double precision(std::size_t tp, std::size_t fp) {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall(std::size_t tp, std::size_t fn) {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

double accuracy(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw UsageError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

MetricsReport report(std::span<const ConfusionMatrix> folds) {
  if (folds.empty()) throw UsageError("report needs at least one confusion matrix");
  MetricsReport r;
  r.pooled = folds.front();
  for (std::size_t i = 1; i < folds.size(); ++i) r.pooled.merge(folds[i]);

  for (const auto& cm : folds) r.fold_accuracies.push_back(accuracy(cm));
  const double n = static_cast<double>(folds.size());
  r.accuracy_mean = std::accumulate(r.fold_accuracies.begin(), r.fold_accuracies.end(), 0.0) / n;
  if (folds.size() > 1) {
    double ss = 0.0;
    for (double a : r.fold_accuracies) ss += (a - r.accuracy_mean) * (a - r.accuracy_mean);
    r.accuracy_std = std::sqrt(ss / (n - 1.0));
  }

  const ConfusionMatrix& cm = r.pooled;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < cm.n_classes(); ++c) {
    ClassMetrics m;
    m.name = cm.class_names()[c];
    m.precision = precision(cm.tp(c), cm.fp(c));
    m.recall = recall(cm.tp(c), cm.fn(c));
    m.f1 = f1(m.precision, m.recall);
    m.support = cm.tp(c) + cm.fn(c);
    r.macro.precision += m.precision;
    r.macro.recall += m.recall;
    r.macro.f1 += m.f1;
    tp += cm.tp(c), fp += cm.fp(c), fn += cm.fn(c);
    r.per_class.push_back(m);
  }
  const double k = static_cast<double>(cm.n_classes());
  r.macro.precision /= k;
  r.macro.recall /= k;
  r.macro.f1 /= k;
  r.micro.precision = precision(tp, fp);
  r.micro.recall = recall(tp, fn);
  r.micro.f1 = f1(r.micro.precision, r.micro.recall);
  return r;
}

namespace {

nlohmann::ordered_json averaged(const AveragedMetrics& m) {
  nlohmann::ordered_json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  return j;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["folds"] = r.fold_accuracies.size();
  j["fold_accuracies"] = r.fold_accuracies;
  j["accuracy_mean"] = r.accuracy_mean;
  j["accuracy_std"] = r.accuracy_std;
  j["dispersion"] = "sample standard deviation of per-fold accuracy";
  j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& c : r.per_class) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["precision"] = c.precision;
    e["recall"] = c.recall;
    e["f1"] = c.f1;
    e["support"] = c.support;
    j["per_class"].push_back(e);
  }
  j["macro"] = averaged(r.macro);
  j["micro"] = averaged(r.micro);
  j["class_names"] = r.pooled.class_names();
  j["confusion"] = r.pooled.counts();
  nlohmann::ordered_json summary;
  summary["ACC"] = r.accuracy_mean;
  summary["Precision"] = r.macro.precision;
  summary["Recall"] = r.macro.recall;
  summary["F-score"] = r.macro.f1;
  j["summary"] = summary;
  return j.dump(2) + "\n";
}

std::string report_to_text(const MetricsReport& r) {
  std::string out;
  out += "Accuracy: " + fixed(100.0 * r.accuracy_mean, 1) + "% (+/-" +
         fixed(100.0 * r.accuracy_std, 1) + ", sample std over " +
         std::to_string(r.fold_accuracies.size()) + (r.fold_accuracies.size() == 1 ? " fold)\n" : " folds)\n");

  std::size_t name_width = 6;
  for (const auto& c : r.per_class) name_width = std::max(name_width, c.name.size() + 1);
  out += "\n" + pad_right("class", name_width) + pad("precision", 10) + pad("recall", 8) +
         pad("f1", 8) + pad("support", 9) + "\n";
  for (const auto& c : r.per_class) {
    out += pad_right(c.name, name_width) + pad(fixed(c.precision, 4), 10) + pad(fixed(c.recall, 4), 8) +
           pad(fixed(c.f1, 4), 8) + pad(std::to_string(c.support), 9) + "\n";
  }
  out += pad_right("macro", name_width) + pad(fixed(r.macro.precision, 4), 10) +
         pad(fixed(r.macro.recall, 4), 8) + pad(fixed(r.macro.f1, 4), 8) + "\n";
  out += pad_right("micro", name_width) + pad(fixed(r.micro.precision, 4), 10) +
         pad(fixed(r.micro.recall, 4), 8) + pad(fixed(r.micro.f1, 4), 8) + "\n";

  const auto& cm = r.pooled;
  out += "\nConfusion matrix (rows: true, columns: predicted, % of row)\n";
  out += pad_right("", name_width);
  for (const auto& name : cm.class_names()) out += pad(name, 8);
  out += "\n";
  for (std::size_t i = 0; i < cm.n_classes(); ++i) {
    const auto& row = cm.counts()[i];
    const std::size_t total = std::accumulate(row.begin(), row.end(), std::size_t{0});
    out += pad_right(cm.class_names()[i], name_width);
    for (std::size_t j = 0; j < cm.n_classes(); ++j) {
      const double pct = total == 0 ? 0.0 : 100.0 * static_cast<double>(row[j]) / static_cast<double>(total);
      out += pad(fixed(pct, 1) + "%", 8);
    }
    out += "\n";
  }
  return out;
}

}  // namespace volformer
