#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace volformer {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  // Class names default to default_class_names(n_classes).
  explicit ConfusionMatrix(std::size_t n_classes, std::vector<std::string> class_names = {});

  void add(int truth, int predicted);
  // Elementwise sum; UsageError unless the class sets agree.
  void merge(const ConfusionMatrix& other);

  std::size_t n_classes() const { return counts_.size(); }
  const std::vector<std::string>& class_names() const { return names_; }
  const std::vector<std::vector<std::size_t>>& counts() const { return counts_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth][predicted]; }
  std::size_t total() const;
  std::size_t trace() const;

  // One-vs-rest counts for class c.
  std::size_t tp(std::size_t c) const;
  std::size_t fp(std::size_t c) const;
  std::size_t fn(std::size_t c) const;
  std::size_t tn(std::size_t c) const;

 private:
  std::vector<std::vector<std::size_t>> counts_;
  std::vector<std::string> names_;
};

// UsageError on length mismatch; DataError on labels outside [0, n_classes).
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t n_classes, std::vector<std::string> class_names = {});

// Zero-denominator cases return 0.
double precision(std::size_t tp, std::size_t fp);
double recall(std::size_t tp, std::size_t fn);
double f1(double precision, double recall);
// trace / total; UsageError for an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct ClassMetrics {
  std::string name;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t support = 0;
};

struct AveragedMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Aggregate over folds. Per-class and averaged metrics come from the pooled
// (summed) confusion matrix; accuracy is reported as the mean and sample
// standard deviation of the per-fold accuracies (0 for a single fold).
struct MetricsReport {
  std::vector<double> fold_accuracies;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::vector<ClassMetrics> per_class;
  AveragedMetrics macro;  // unweighted mean over classes
  AveragedMetrics micro;  // from summed one-vs-rest counts
  ConfusionMatrix pooled;
};

// UsageError for an empty list.
MetricsReport report(std::span<const ConfusionMatrix> folds);

// JSON document: accuracy_mean, accuracy_std, per_class, macro, micro,
// confusion, plus a summary object with the ACC / Precision / Recall /
// F-score columns (macro averages).
std::string report_to_json(const MetricsReport& report);
// Text table with a row-normalized confusion matrix in percent.
std::string report_to_text(const MetricsReport& report);

}  // namespace volformer
