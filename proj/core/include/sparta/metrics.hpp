#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "sparta/labels.hpp"

namespace sparta {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
};

struct MetricsReport {
  std::size_t total = 0;
  double accuracy = 0.0;
  std::array<ClassMetrics, kNumActs> per_class{};
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
  double micro_f1 = 0.0;
  std::size_t classes_with_support = 0;
};

struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumActs>, kNumActs> counts{};  // [gold][predicted]

  void add(DialogueAct gold, DialogueAct predicted) { ++counts[index_of(gold)][index_of(predicted)]; }
  std::size_t total() const;
  std::size_t row_sum(std::size_t gold) const;
  /// Row-normalized rates; an empty row stays all zero.
  std::array<std::array<double, kNumActs>, kNumActs> rates() const;
};

ConfusionMatrix confusion_matrix(std::span<const DialogueAct> gold,
                                 std::span<const DialogueAct> predicted);

/// Precision/recall/F1 with 0 for undefined ratios. Macro averages run over
/// classes with nonzero gold support only; weighted averages weight by support.
MetricsReport compute_metrics(const ConfusionMatrix& cm);
MetricsReport compute_metrics(std::span<const DialogueAct> gold,
                              std::span<const DialogueAct> predicted);

void write_metrics_json(std::ostream& out, const MetricsReport& report);
/// Header "gold,ID,...,ORQ"; rows = gold labels.
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);

}  // namespace sparta
