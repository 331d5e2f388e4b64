#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sparta/metrics.hpp"
#include "sparta/model.hpp"

namespace sparta {

enum class EvalMetric { ValLoss, ValWeightedF1 };

std::string eval_metric_name(EvalMetric m);
EvalMetric parse_eval_metric(const std::string& name);

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t batch_size = 8;  // dialogues per optimizer step
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double min_delta = 0.001;
  std::uint64_t seed = 0;
  EvalMetric eval_metric = EvalMetric::ValLoss;
  std::size_t vocab_min_count = 1;
  std::size_t speaker_epochs = 10;  // 0 keeps the SA encoder at its initialization
  double speaker_learning_rate = 1e-3;
  std::size_t speaker_batch_size = 32;
  std::size_t threads = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Stops after `patience` consecutive epochs without an improvement larger
/// than `min_delta` over the best value so far.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double min_delta, bool maximize);

  /// Records one epoch's metric; returns true when training should stop.
  bool update(double metric);
  bool last_improved() const { return last_improved_; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
  std::size_t epochs_seen() const { return epochs_; }

 private:
  std::size_t patience_;
  double min_delta_;
  bool maximize_;
  double best_;
  std::size_t best_epoch_ = 0;
  std::size_t epochs_ = 0;
  std::size_t wait_ = 0;
  bool last_improved_ = false;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_metric = 0.0;
  bool stopped = false;
};

struct TrainResult {
  SpartaModel model;  // best-epoch checkpoint
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_metric = 0.0;
  std::optional<double> speaker_train_accuracy;
};

/// Replaces the validation evaluation (used to construct stopping scenarios).
using ValidationHook = std::function<double(const SpartaModel&, std::size_t epoch)>;

/// Mini-batch training on mean per-utterance cross-entropy with Adam and
/// early stopping on the validation metric. Builds the vocabulary from
/// `train` unless one is supplied; a supplied vocabulary must not contain
/// tokens absent from `train`.
TrainResult train(const Corpus& train, const Corpus& val, const SpartaConfig& model_config,
                  const TrainConfig& train_config,
                  const std::optional<Vocabulary>& vocabulary = std::nullopt,
                  const ValidationHook& validation = {});

void write_epoch_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

struct EvaluationResult {
  MetricsReport metrics;
  ConfusionMatrix confusion;
  std::vector<double> dialogue_weighted_f1;  // one sample per dialogue
  std::vector<DialoguePrediction> predictions;
  double mean_loss = 0.0;  // mean per-utterance cross-entropy
};

EvaluationResult evaluate(const Corpus& corpus, const SpartaModel& model, std::size_t threads = 1);

struct FoldResult {
  std::size_t fold = 0;
  EvaluationResult evaluation;
  std::size_t train_dialogues = 0, val_dialogues = 0, test_dialogues = 0;
  std::vector<std::string> test_ids;
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0, mean_macro_f1 = 0.0, mean_weighted_f1 = 0.0;
};

/// Dialogue-level partition into `folds` near-equal parts after a seeded shuffle.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, std::size_t folds,
                                                     std::uint64_t seed);

/// Trains on folds - 1 parts (10% of them carved out for validation) and
/// evaluates on the held-out part, for every fold.
CrossValidationResult cross_validate(const Corpus& corpus, const SpartaConfig& model_config,
                                     const TrainConfig& train_config, std::size_t folds);

/// Encoder outputs of every utterance, for projection plots.
struct Representations {
  std::vector<std::vector<double>> speaker_invariant, speaker_aware;  // SA empty without the track
  std::vector<SpeakerRole> speakers;
};

Representations collect_representations(const Corpus& corpus, const SpartaModel& model);

}  // namespace sparta
