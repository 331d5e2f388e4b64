#include "sparta/metrics.hpp"

#include <ostream>

#include <json.hpp>

#include "sparta/error.hpp"

namespace sparta {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (std::size_t c : row) n += c;
  return n;
}

std::size_t ConfusionMatrix::row_sum(std::size_t gold) const {
  std::size_t n = 0;
  for (std::size_t c : counts[gold]) n += c;
  return n;
}

std::array<std::array<double, kNumActs>, kNumActs> ConfusionMatrix::rates() const {
  std::array<std::array<double, kNumActs>, kNumActs> r{};
  for (std::size_t i = 0; i < kNumActs; ++i) {
    const std::size_t n = row_sum(i);
    if (!n) continue;
    for (std::size_t j = 0; j < kNumActs; ++j)
      r[i][j] = static_cast<double>(counts[i][j]) / static_cast<double>(n);
  }
  return r;
}

ConfusionMatrix confusion_matrix(std::span<const DialogueAct> gold,
                                 std::span<const DialogueAct> predicted) {
  if (gold.size() != predicted.size())
    throw Error("gold and predicted label sequences differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], predicted[i]);
  return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.total = cm.total();
  if (!r.total) return r;
  std::size_t correct = 0;
  for (std::size_t c = 0; c < kNumActs; ++c) {
    ClassMetrics& m = r.per_class[c];
    const std::size_t tp = cm.counts[c][c];
    correct += tp;
    m.support = cm.row_sum(c);
    for (std::size_t g = 0; g < kNumActs; ++g) m.predicted += cm.counts[g][c];
    m.precision = m.predicted ? static_cast<double>(tp) / static_cast<double>(m.predicted) : 0.0;
    m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  const double n = static_cast<double>(r.total);
  r.accuracy = static_cast<double>(correct) / n;
  for (const auto& m : r.per_class) {
    if (!m.support) continue;
    ++r.classes_with_support;
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
    const double w = static_cast<double>(m.support) / n;
    r.weighted_precision += w * m.precision;
    r.weighted_recall += w * m.recall;
    r.weighted_f1 += w * m.f1;
  }
  const double k = static_cast<double>(r.classes_with_support);
  r.macro_precision /= k;
  r.macro_recall /= k;
  r.macro_f1 /= k;
  // Pooled counts: every error is one FP and one FN, so this equals accuracy.
  const double tp = static_cast<double>(correct);
  const double fp = n - tp, fn = n - tp;
  r.micro_f1 = 2.0 * tp / (2.0 * tp + fp + fn);
  return r;
}

MetricsReport compute_metrics(std::span<const DialogueAct> gold,
                              std::span<const DialogueAct> predicted) {
  return compute_metrics(confusion_matrix(gold, predicted));
}

void write_metrics_json(std::ostream& out, const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["total"] = r.total;
  j["accuracy"] = r.accuracy;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["macro_f1"] = r.macro_f1;
  j["weighted_precision"] = r.weighted_precision;
  j["weighted_recall"] = r.weighted_recall;
  j["weighted_f1"] = r.weighted_f1;
  j["micro_f1"] = r.micro_f1;
  j["per_class"] = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < kNumActs; ++c) {
    const auto& m = r.per_class[c];
    nlohmann::ordered_json e;
    e["precision"] = m.precision;
    e["recall"] = m.recall;
    e["f1"] = m.f1;
    e["support"] = m.support;
    j["per_class"][std::string(act_code(act_at(c)))] = e;
  }
  out << j.dump(2) << '\n';
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "gold";
  for (auto a : kAllActs) out << ',' << act_code(a);
  out << '\n';
  for (std::size_t i = 0; i < kNumActs; ++i) {
    out << act_code(act_at(i));
    for (std::size_t c : cm.counts[i]) out << ',' << c;
    out << '\n';
  }
}

}  // namespace sparta
