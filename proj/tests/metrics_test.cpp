#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "volformer/error.hpp"
#include "volformer/metrics.hpp"
#include "volformer/rng.hpp"

using namespace volformer;

namespace {

const std::vector<int> kLabels = {0, 0, 1, 1, 2, 2, 2, 1, 0, 2};
const std::vector<int> kPreds = {0, 1, 1, 1, 2, 2, 0, 1, 0, 2};

// Per-class counts by direct iteration over pairs.
struct DirectCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

DirectCounts direct(const std::vector<int>& y, const std::vector<int>& p, int c) {
  DirectCounts d;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool t = y[i] == c, q = p[i] == c;
    d.tp += t && q;
    d.fp += !t && q;
    d.fn += t && !q;
    d.tn += !t && !q;
  }
  return d;
}

ConfusionMatrix diagonal(std::size_t per_class) {
  ConfusionMatrix cm(3);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < per_class; ++i) cm.add(c, c);
  return cm;
}

}  // namespace

TEST(ConfusionTest, PerfectPredictionsAreDiagonal) {
  const ConfusionMatrix cm = confusion(kLabels, kLabels, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) EXPECT_EQ(cm.at(i, j), 0u);
  EXPECT_EQ(cm.trace(), kLabels.size());
  EXPECT_EQ(accuracy(cm), 1.0);
}

TEST(ConfusionTest, HandCountedExample) {
  const ConfusionMatrix cm = confusion(kLabels, kPreds, 3);
  EXPECT_EQ(cm.total(), 10u);
  EXPECT_EQ(cm.trace(), 8u);
  EXPECT_EQ(accuracy(cm), 0.8);
  EXPECT_EQ(cm.tp(0), 2u);
  EXPECT_EQ(cm.fp(0), 1u);
  EXPECT_EQ(cm.fn(0), 1u);
  EXPECT_EQ(cm.tn(0), 6u);
  EXPECT_DOUBLE_EQ(precision(cm.tp(0), cm.fp(0)), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(recall(cm.tp(0), cm.fn(0)), 2.0 / 3.0);
  EXPECT_EQ(cm.counts(), (std::vector<std::vector<std::size_t>>{{2, 1, 0}, {0, 3, 0}, {1, 0, 3}}));
  EXPECT_EQ(cm.class_names(), (std::vector<std::string>{"NC", "MCI", "AD"}));
}

TEST(ConfusionTest, SingleSampleAndErrors) {
  const std::vector<int> y = {2}, p = {1};
  const ConfusionMatrix cm = confusion(y, p, 3);
  EXPECT_EQ(cm.total(), 1u);
  EXPECT_EQ(cm.at(2, 1), 1u);
  const std::vector<int> shorter = {1, 2};
  EXPECT_THROW(confusion(y, shorter, 3), UsageError);
  const std::vector<int> bad = {3};
  EXPECT_THROW(confusion(bad, p, 3), DataError);
  EXPECT_THROW(accuracy(ConfusionMatrix(3)), UsageError);
  EXPECT_THROW(ConfusionMatrix(3).merge(ConfusionMatrix(2)), UsageError);
}

TEST(MetricFormulaTest, PrecisionRecallF1) {
  EXPECT_DOUBLE_EQ(precision(2, 1), 2.0 / 3.0);
  EXPECT_EQ(precision(4, 0), 1.0);
  EXPECT_EQ(precision(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(recall(2, 1), 2.0 / 3.0);
  EXPECT_EQ(recall(5, 0), 1.0);
  EXPECT_EQ(recall(0, 0), 0.0);
  for (double x : {0.1, 0.5, 0.9, 1.0}) EXPECT_DOUBLE_EQ(f1(x, x), x);
  EXPECT_DOUBLE_EQ(f1(1.0, 0.5), 2.0 / 3.0);
  EXPECT_EQ(f1(0.0, 0.0), 0.0);
}

TEST(MetricFormulaTest, UniformRandomAccuracyNearChance) {
  Rng rng(2024);
  std::vector<int> y(10000), p(10000);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = static_cast<int>(rng.below(3));
    p[i] = static_cast<int>(rng.below(3));
  }
  EXPECT_NEAR(accuracy(confusion(y, p, 3)), 1.0 / 3.0, 0.05);
}

TEST(MetricPropertyTest, ConfusionPathEqualsDirectCounting) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<int> y(200), p(200);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = static_cast<int>(rng.below(3));
      p[i] = rng.uniform() < 0.6 ? y[i] : static_cast<int>(rng.below(3));
    }
    const ConfusionMatrix cm = confusion(y, p, 3);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) correct += y[i] == p[i];
    EXPECT_EQ(accuracy(cm), static_cast<double>(correct) / static_cast<double>(y.size()));
    const MetricsReport r = report(std::span(&cm, 1));
    for (int c = 0; c < 3; ++c) {
      const DirectCounts d = direct(y, p, c);
      EXPECT_EQ(cm.tp(c), d.tp);
      EXPECT_EQ(cm.fp(c), d.fp);
      EXPECT_EQ(cm.fn(c), d.fn);
      EXPECT_EQ(cm.tn(c), d.tn);
      EXPECT_EQ(r.per_class[c].precision, precision(d.tp, d.fp));
      EXPECT_EQ(r.per_class[c].recall, recall(d.tp, d.fn));
    }
  }
}

TEST(MetricPropertyTest, MacroF1BetweenClassExtremesAndRangesValid) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    std::vector<int> y(60), p(60);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = static_cast<int>(rng.below(3));
      p[i] = static_cast<int>(rng.below(3));
    }
    const std::vector<ConfusionMatrix> folds = {confusion(std::span(y).first(30), std::span(p).first(30), 3),
                                                confusion(std::span(y).last(30), std::span(p).last(30), 3)};
    const MetricsReport r = report(folds);
    double lo = 1, hi = 0;
    for (const auto& c : r.per_class) {
      lo = std::min(lo, c.f1), hi = std::max(hi, c.f1);
      for (double v : {c.precision, c.recall, c.f1}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
    EXPECT_GE(r.macro.f1, lo);
    EXPECT_LE(r.macro.f1, hi);
    EXPECT_GE(r.accuracy_std, 0.0);
    EXPECT_EQ(r.pooled.total(), 60u);
  }
}

TEST(ReportTest, SingleFoldHasZeroDispersion) {
  const ConfusionMatrix cm = confusion(kLabels, kPreds, 3);
  const MetricsReport r = report(std::span(&cm, 1));
  EXPECT_EQ(r.accuracy_mean, 0.8);
  EXPECT_EQ(r.accuracy_std, 0.0);
  EXPECT_DOUBLE_EQ(r.macro.precision, (2.0 / 3.0 + 0.75 + 1.0) / 3.0);
  EXPECT_DOUBLE_EQ(r.macro.recall, (2.0 / 3.0 + 1.0 + 0.75) / 3.0);
  EXPECT_DOUBLE_EQ(r.micro.precision, 0.8);
  EXPECT_EQ(r.per_class[1].support, 3u);
}

TEST(ReportTest, TwoFoldSampleStd) {
  // Fold accuracies 0.8 and 1.0.
  const std::vector<ConfusionMatrix> folds = {confusion(kLabels, kPreds, 3), diagonal(2)};
  const MetricsReport r = report(folds);
  EXPECT_DOUBLE_EQ(r.accuracy_mean, 0.9);
  EXPECT_NEAR(r.accuracy_std, 0.1414213562373095, 1e-12);
  EXPECT_EQ(r.pooled.total(), 16u);
  EXPECT_THROW(report(std::span<const ConfusionMatrix>{}), UsageError);
}

TEST(ReportTest, JsonSchema) {
  const std::vector<ConfusionMatrix> folds = {confusion(kLabels, kPreds, 3), diagonal(2)};
  const auto j = nlohmann::ordered_json::parse(report_to_json(report(folds)));
  for (const char* key : {"accuracy_mean", "accuracy_std", "per_class", "macro", "micro", "confusion", "summary"})
    EXPECT_TRUE(j.contains(key)) << key;
  ASSERT_EQ(j["per_class"].size(), 3u);
  for (const char* key : {"name", "precision", "recall", "f1"}) EXPECT_TRUE(j["per_class"][0].contains(key));
  std::vector<std::string> summary_keys;
  for (auto it = j["summary"].begin(); it != j["summary"].end(); ++it) summary_keys.push_back(it.key());
  EXPECT_EQ(summary_keys, (std::vector<std::string>{"ACC", "Precision", "Recall", "F-score"}));
  EXPECT_DOUBLE_EQ(j["summary"]["ACC"].get<double>(), 0.9);
  EXPECT_EQ(j["confusion"][2][0].get<int>(), 1);
}

TEST(ReportTest, TextRendersRowPercentages) {
  const ConfusionMatrix cm = confusion(kLabels, kPreds, 3);
  const std::string text = report_to_text(report(std::span(&cm, 1)));
  EXPECT_NE(text.find("Accuracy: 80.0% (+/-0.0"), std::string::npos) << text;
  EXPECT_NE(text.find("66.7%"), std::string::npos);  // NC row: 2 of 3
  EXPECT_NE(text.find("75.0%"), std::string::npos);  // AD row: 3 of 4
  EXPECT_NE(text.find("macro"), std::string::npos);
  // Empty rows render as zeros instead of dividing by zero.
  ConfusionMatrix sparse(3);
  sparse.add(0, 0);
  EXPECT_NE(report_to_text(report(std::span(&sparse, 1))).find("0.0%"), std::string::npos);
}
