#include "sparta/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>
#include <unordered_set>

#include "sparta/error.hpp"
#include "sparta/optim.hpp"

namespace sparta {

std::string eval_metric_name(EvalMetric m) {
  return m == EvalMetric::ValLoss ? "val_loss" : "val_weighted_f1";
}

EvalMetric parse_eval_metric(const std::string& name) {
  if (name == "val_loss") return EvalMetric::ValLoss;
  if (name == "val_weighted_f1") return EvalMetric::ValWeightedF1;
  throw ConfigError("unknown eval metric '" + name + "' (expected val_loss or val_weighted_f1)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be a finite non-negative number");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (!(min_delta >= 0.0)) throw ConfigError("min_delta must be non-negative");
  if (vocab_min_count == 0) throw ConfigError("vocab_min_count must be positive");
  if (speaker_batch_size == 0) throw ConfigError("speaker batch size must be positive");
  if (threads == 0) throw ConfigError("threads must be positive");
}

EarlyStopping::EarlyStopping(std::size_t patience, double min_delta, bool maximize)
    : patience_(patience),
      min_delta_(min_delta),
      maximize_(maximize),
      best_(maximize ? -std::numeric_limits<double>::infinity()
                     : std::numeric_limits<double>::infinity()) {
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (!(min_delta >= 0.0)) throw ConfigError("min_delta must be non-negative");
}

bool EarlyStopping::update(double metric) {
  ++epochs_;
  const bool improved = maximize_ ? metric > best_ + min_delta_ : metric < best_ - min_delta_;
  last_improved_ = improved;
  if (improved) {
    best_ = metric;
    best_epoch_ = epochs_;
    wait_ = 0;
    return false;
  }
  return ++wait_ >= patience_;
}

namespace {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled by exactly one call, so results written per index are
/// independent of the thread count.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void require_labels(const Corpus& corpus, const char* what) {
  for (const auto& d : corpus.dialogues)
    for (const auto& u : d.utterances)
      if (!u.label)
        throw Error(std::string(what) + ": utterance " + std::to_string(u.index) +
                    " of dialogue '" + d.id + "' has no label");
}

void check_vocabulary(const Vocabulary& vocab, const Corpus& train) {
  std::unordered_set<std::string> seen;
  for (const auto& d : train.dialogues)
    for (const auto& u : d.utterances)
      for (auto& tok : tokenize(u.text)) seen.insert(std::move(tok));
  for (std::size_t i = 2; i < vocab.size(); ++i)
    if (!seen.count(vocab.token(i)))
      throw Error("vocabulary leakage: token '" + vocab.token(i) +
                  "' does not occur in the training split");
}

/// Mean eval-mode cross-entropy and predictions over `corpus`.
struct Pass {
  std::vector<DialoguePrediction> predictions;
  double loss_sum = 0.0;
  std::size_t count = 0;
};

Pass predict_all(const Corpus& corpus, const SpartaModel& model, std::size_t threads) {
  Pass pass;
  pass.predictions.resize(corpus.dialogues.size());
  std::vector<double> losses(corpus.dialogues.size(), 0.0);
  std::vector<std::size_t> counts(corpus.dialogues.size(), 0);
  parallel_for(corpus.dialogues.size(), threads, [&](std::size_t i) {
    pass.predictions[i] = forward_dialogue(model, corpus.dialogues[i], Mode::Eval);
    for (const auto& u : pass.predictions[i].utterances)
      if (u.gold) {
        losses[i] -= std::log(std::max(u.probabilities[index_of(*u.gold)],
                                       std::numeric_limits<double>::min()));
        ++counts[i];
      }
  });
  for (std::size_t i = 0; i < losses.size(); ++i) {
    pass.loss_sum += losses[i];
    pass.count += counts[i];
  }
  return pass;
}

EvaluationResult summarize(Pass pass) {
  EvaluationResult r;
  std::vector<DialogueAct> gold, pred;
  for (const auto& d : pass.predictions) {
    std::vector<DialogueAct> dg, dp;
    for (const auto& u : d.utterances) {
      dg.push_back(*u.gold);
      dp.push_back(u.predicted);
    }
    r.dialogue_weighted_f1.push_back(compute_metrics(dg, dp).weighted_f1);
    gold.insert(gold.end(), dg.begin(), dg.end());
    pred.insert(pred.end(), dp.begin(), dp.end());
  }
  r.confusion = confusion_matrix(gold, pred);
  r.metrics = compute_metrics(r.confusion);
  r.mean_loss = pass.count ? pass.loss_sum / static_cast<double>(pass.count) : 0.0;
  r.predictions = std::move(pass.predictions);
  return r;
}

}  // namespace

EvaluationResult evaluate(const Corpus& corpus, const SpartaModel& model, std::size_t threads) {
  require_labels(corpus, "evaluate");
  if (corpus.dialogues.empty()) throw Error("evaluate: empty corpus");
  return summarize(predict_all(corpus, model, threads));
}

TrainResult train(const Corpus& train_split, const Corpus& val, const SpartaConfig& mc,
                  const TrainConfig& tc, const std::optional<Vocabulary>& vocabulary,
                  const ValidationHook& validation) {
  mc.validate();
  tc.validate();
  if (train_split.dialogues.empty()) throw Error("train: empty training split");
  if (val.dialogues.empty() && !validation) throw Error("train: empty validation split");
  require_labels(train_split, "train");
  require_labels(val, "train (validation split)");

  Vocabulary vocab;
  if (vocabulary) {
    check_vocabulary(*vocabulary, train_split);
    vocab = *vocabulary;
  } else {
    vocab = build_vocabulary(train_split, tc.vocab_min_count);
  }

  TrainResult result{init_params(mc, vocab, derive_seed(tc.seed, 10)), {}, 0, 0.0, std::nullopt};
  if (tc.max_epochs == 0) return result;
  SpartaModel& model = result.model;

  if (mc.use_speaker) {
    SpeakerTrainConfig sc;
    sc.epochs = tc.speaker_epochs;
    sc.batch_size = tc.speaker_batch_size;
    sc.learning_rate = tc.speaker_learning_rate;
    sc.seed = derive_seed(tc.seed, 11);
    SpeakerModel speaker = pretrain_speaker_encoder(train_split, vocab, mc.encoder, sc);
    result.speaker_train_accuracy = speaker_accuracy(train_split, vocab, speaker);
    attach_speaker_encoder(model, speaker);
  }

  const bool maximize = tc.eval_metric == EvalMetric::ValWeightedF1;
  EarlyStopping stopper(tc.patience, tc.min_delta, maximize);
  OptimizerState opt = make_adam_state(model.params, AdamConfig{tc.learning_rate});
  Rng order_rng(derive_seed(tc.seed, 12));
  std::vector<std::size_t> order(train_split.dialogues.size());
  std::iota(order.begin(), order.end(), 0);

  ParameterStore best_params = model.params;
  double best_metric = maximize ? -std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), order_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      const std::size_t n = end - start;
      std::vector<GradientStore> grads(n);
      std::vector<double> losses(n, 0.0);
      std::vector<std::size_t> counts(n, 0);
      parallel_for(n, tc.threads, [&](std::size_t j) {
        const std::size_t di = order[start + j];
        Rng dropout_rng(derive_seed(tc.seed, 13 + epoch, di));
        ad::Graph g(&model.params);
        ad::Var loss = dialogue_loss(g, model, train_split.dialogues[di], Mode::Train,
                                     dropout_rng, &counts[j]);
        losses[j] = loss.value()[0];
        g.backward(loss);
        grads[j] = GradientStore(model.params);
        g.accumulate_gradients(grads[j]);
      });
      // Fixed-order reduction keeps the update independent of the thread count.
      const std::size_t batch_count = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
      GradientStore total(model.params);
      for (std::size_t j = 0; j < n; ++j) {
        total += grads[j];
        epoch_loss += losses[j];
      }
      epoch_count += batch_count;
      if (batch_count == 0) continue;
      const double inv = 1.0 / static_cast<double>(batch_count);
      for (std::size_t p = 0; p < total.size(); ++p)
        for (double& v : total[p].values()) v *= inv;
      adam_step(model.params, total, opt);
    }

    double metric;
    if (validation) {
      metric = validation(model, epoch);
    } else {
      EvaluationResult ev = summarize(predict_all(val, model, tc.threads));
      metric = maximize ? ev.metrics.weighted_f1 : ev.mean_loss;
    }
    // The checkpoint follows the strict optimum; min_delta only gates patience.
    if (maximize ? metric > best_metric : metric < best_metric) {
      best_metric = metric;
      best_epoch = epoch;
      best_params = model.params;
    }
    const bool stop = stopper.update(metric);
    result.log.push_back(
        {epoch, epoch_count ? epoch_loss / static_cast<double>(epoch_count) : 0.0, metric, stop});
    if (stop) break;
  }

  model.params = std::move(best_params);
  bind_params(model);
  result.best_epoch = best_epoch;
  result.best_val_metric = best_metric;
  return result;
}

void write_epoch_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  const auto old = out.precision(17);
  out << "epoch,train_loss,val_metric,stopped\n";
  for (const auto& e : log)
    out << e.epoch << ',' << e.train_loss << ',' << e.val_metric << ',' << (e.stopped ? 1 : 0)
        << '\n';
  out.precision(old);
}

std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, std::size_t folds,
                                                     std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (n < folds)
    throw Error("cross-validation: " + std::to_string(n) + " dialogues cannot fill " +
                std::to_string(folds) + " folds");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 20));
  shuffle(std::span<std::size_t>(idx), rng);
  std::vector<std::vector<std::size_t>> parts(folds);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = n / folds + (f < n % folds ? 1 : 0);
    parts[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                    idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return parts;
}

CrossValidationResult cross_validate(const Corpus& corpus, const SpartaConfig& mc,
                                     const TrainConfig& tc, std::size_t folds) {
  const auto parts = fold_partition(corpus.dialogues.size(), folds, tc.seed);
  if (corpus.dialogues.size() - parts.front().size() < 2)
    throw Error("cross-validation: each fold needs at least 2 training dialogues");
  CrossValidationResult cv;
  for (std::size_t f = 0; f < folds; ++f) {
    Corpus train_part, val_part, test_part;
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < folds; ++g)
      if (g != f) rest.insert(rest.end(), parts[g].begin(), parts[g].end());
    Rng rng(derive_seed(tc.seed, 21, f));
    shuffle(std::span<std::size_t>(rest), rng);
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(rest.size()))));
    for (std::size_t i = 0; i < rest.size(); ++i)
      (i < n_val ? val_part : train_part).dialogues.push_back(corpus.dialogues[rest[i]]);
    for (std::size_t i : parts[f]) test_part.dialogues.push_back(corpus.dialogues[i]);

    TrainConfig fold_tc = tc;
    fold_tc.seed = derive_seed(tc.seed, 30, f);
    TrainResult tr = train(train_part, val_part, mc, fold_tc);

    FoldResult fr;
    fr.fold = f;
    fr.evaluation = evaluate(test_part, tr.model, tc.threads);
    fr.train_dialogues = train_part.dialogues.size();
    fr.val_dialogues = val_part.dialogues.size();
    fr.test_dialogues = test_part.dialogues.size();
    for (const auto& d : test_part.dialogues) fr.test_ids.push_back(d.id);
    cv.mean_accuracy += fr.evaluation.metrics.accuracy;
    cv.mean_macro_f1 += fr.evaluation.metrics.macro_f1;
    cv.mean_weighted_f1 += fr.evaluation.metrics.weighted_f1;
    cv.folds.push_back(std::move(fr));
  }
  const double k = static_cast<double>(folds);
  cv.mean_accuracy /= k;
  cv.mean_macro_f1 /= k;
  cv.mean_weighted_f1 /= k;
  return cv;
}

Representations collect_representations(const Corpus& corpus, const SpartaModel& model) {
  Representations r;
  for (const auto& d : corpus.dialogues) {
    ad::Graph g(&model.params);
    Rng rng(0);
    std::vector<UtteranceTrace> trace;
    dialogue_logits(g, model, d, Mode::Eval, rng, &trace);
    for (std::size_t t = 0; t < trace.size(); ++t) {
      r.speaker_invariant.push_back(std::move(trace[t].h_si));
      if (model.config.use_speaker) r.speaker_aware.push_back(std::move(trace[t].h_sa));
      r.speakers.push_back(d.utterances[t].speaker);
    }
  }
  return r;
}

}  // namespace sparta
