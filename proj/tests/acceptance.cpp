#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "oracles.hpp"
#include "sparta/config.hpp"
#include "sparta/corpus.hpp"
#include "sparta/diagnostics.hpp"
#include "sparta/metrics.hpp"
#include "sparta/significance.hpp"
#include "sparta/synth.hpp"
#include "sparta/train.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace sparta;
using namespace testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

/// Collects failure reasons; the criterion passes when none were recorded.
struct Checker {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok) ++failed;
  }
  std::size_t failed = 0;
  Outcome outcome(const std::string& summary) const {
    Outcome o{failed == 0, summary};
    for (const auto& f : failures) o.detail += "; " + f;
    return o;
  }
};

Outcome gradient_suite() {
  const auto start = Clock::now();
  const auto cases = run_gradient_suite(0);
  const double elapsed = seconds_since(start);
  Checker c;
  double worst = 0.0;
  for (const auto& k : cases) {
    worst = std::max(worst, k.report.max_rel_error);
    c.expect(k.report.passed(), k.name + " max rel error " + fmt(k.report.max_rel_error));
  }
  c.expect(elapsed < 60.0, "runtime " + fmt(elapsed) + " s");
  return c.outcome(std::to_string(cases.size()) + " cases, worst rel error " + fmt(worst) + ", " +
                   fmt(elapsed) + " s");
}

std::vector<ad::Var> constants(ad::Graph& g, const std::vector<Tensor>& slots) {
  std::vector<ad::Var> out;
  for (const auto& s : slots) out.push_back(g.constant(s));
  return out;
}

Outcome attention_properties() {
  Checker c;
  Rng rng(101);
  double worst_sum = 0.0, worst_mha = 0.0;
  std::size_t monotone_cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 8, n = 1 + uniform_index(rng, 8), heads = trial % 2 ? 2 : 4;
    ParameterStore store;
    Rng init(rng());
    const AttentionParams p = add_attention_params(store, "att", d, init);
    store[p.pool_b].tensor = random_vector(d, rng, 0.5);
    std::vector<Tensor> slots;
    for (std::size_t i = 0; i < n; ++i) slots.push_back(random_vector(d, rng, 2.0));
    const Tensor h = random_vector(d, rng, 2.0);

    ad::Graph g(&store);
    AttentionTrace taa, mha;
    time_aware_attention(g, p, g.constant(h), constants(g, slots), {}, &taa);
    const Tensor got = multi_head_attention(g, p, g.constant(h), constants(g, slots), heads, true, &mha).value();
    for (const auto* tr : {&taa, &mha})
      for (const auto& w : tr->weights) {
        double sum = 0.0;
        for (double x : w) sum += x;
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      }
    const Eigen::RowVectorXd ref = naive_mha(store, p, h, slots, heads);
    for (std::size_t j = 0; j < d; ++j) worst_mha = std::max(worst_mha, std::abs(got[j] - ref(j)));

    // Equal-logit construction: every slot holds the same vector.
    const std::vector<Tensor> same(n, slots[0]);
    AttentionTrace eq;
    time_aware_attention(g, p, g.constant(h), constants(g, same), {}, &eq);
    if (eq.raw_logits[0] > 0 && n > 1) {
      ++monotone_cases;
      for (std::size_t i = 1; i < n; ++i)
        c.expect(eq.weights[0][i] > eq.weights[0][i - 1], "recency order broken in trial " + std::to_string(trial));
    }
  }
  c.expect(worst_sum < 1e-9, "weight sum error " + fmt(worst_sum));
  c.expect(worst_mha < 1e-10, "MHA oracle error " + fmt(worst_mha));
  c.expect(monotone_cases > 100, "too few positive-logit constructions");
  return c.outcome("1000 trials, max |sum-1| " + fmt(worst_sum) + ", MHA vs loop " + fmt(worst_mha) + ", " +
                   std::to_string(monotone_cases) + " monotonicity cases");
}

Outcome memory_oracle() {
  Checker c;
  Rng rng(102);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + trial % 8, pushes = uniform_index(rng, 30);
    MemoryWindow<std::vector<double>> window(k, 1);
    std::vector<double> history;
    for (std::size_t i = 0; i < pushes; ++i) {
      const double v = uniform01(rng);
      window.push({v});
      history.push_back(v);
    }
    const std::size_t expect = std::min(k, history.size());
    bool ok = window.size() == expect;
    for (std::size_t i = 0; ok && i < expect; ++i) ok = window[i][0] == history[history.size() - expect + i];
    c.expect(ok, "trial " + std::to_string(trial) + " k=" + std::to_string(k));
  }
  return c.outcome("1000 push sequences, k in 1..8");
}

Outcome metrics_oracle() {
  Checker c;
  Rng rng(103);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 300), classes = 1 + uniform_index(rng, kNumActs);
    std::vector<DialogueAct> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = act_at(uniform_index(rng, classes));
      pred[i] = uniform01(rng) < 0.5 ? gold[i] : act_at(uniform_index(rng, kNumActs));
    }
    const MetricsReport r = compute_metrics(gold, pred);
    const Brute b = brute_force(gold, pred);
    for (double e : {r.accuracy - b.accuracy, r.macro_precision - b.macro_p, r.macro_recall - b.macro_r,
                     r.macro_f1 - b.macro_f1, r.weighted_precision - b.weighted_p,
                     r.weighted_recall - b.weighted_r, r.weighted_f1 - b.weighted_f1,
                     r.micro_f1 - r.accuracy})
      worst = std::max(worst, std::abs(e));
  }
  c.expect(worst < 1e-9, "max deviation " + fmt(worst));
  return c.outcome("500 prediction sets, max deviation " + fmt(worst));
}

Outcome kappa_and_t_test() {
  Checker c;
  using enum DialogueAct;
  const auto k = cohens_kappa({ID, ID, GT, GT}, {ID, GT, GT, GT});
  c.expect(k.observed == 0.75 && k.chance == 0.5 && k.kappa == 0.5, "kappa example");
  const auto perfect = cohens_kappa({ID, GT, CD}, {ID, GT, CD});
  c.expect(perfect.kappa == 1.0, "perfect agreement");
  const std::vector<double> a = {0.5, 0.6}, ones = {2, 3, 4, 5}, zeros = {1, 2, 3, 4};
  c.expect(paired_t_test(a, a).p_value == 1.0, "identical samples");
  c.expect(paired_t_test(ones, zeros).p_value == 0.0, "constant nonzero difference");
  Rng rng(104);
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const double dof = 1 + uniform_index(rng, 100) + (trial % 2 ? uniform01(rng) : 0.0);
    const double t = uniform(rng, -15.0, 15.0);
    worst = std::max(worst, std::abs(student_t_cdf(t, dof) - boost::math::cdf(boost::math::students_t(dof), t)));
  }
  c.expect(worst < 1e-6, "t cdf deviation " + fmt(worst));
  return c.outcome("kappa examples exact, t cdf max deviation " + fmt(worst) + " over 2000 points");
}

struct AblationData {
  Corpus train, val, test;
};

AblationData ablation_data(std::uint64_t seed) {
  GeneratorConfig gc;
  gc.n_dialogues = 300;
  gc.seed = seed;
  Corpus all = generate_corpus(default_grammar(), gc);
  AblationData d;
  for (std::size_t i = 0; i < all.dialogues.size(); ++i)
    (i < 200 ? d.train : i < 240 ? d.val : d.test).dialogues.push_back(all.dialogues[i]);
  return d;
}

Outcome synthetic_ablation() {
  const auto start = Clock::now();
  const double ceiling = utterance_only_bayes_accuracy(default_grammar());
  struct Variant {
    const char* name;
    std::vector<const char*> settings;
  };
  const std::vector<Variant> variants = {
      {"full", {"model.variant=TAA"}},
      {"no-LC", {"model.variant=BS", "model.use_local=false"}},
      {"no-GC", {"model.use_global=false"}},
      {"no-SA", {"model.use_speaker=false"}},
      {"MHA", {"model.variant=MHA"}},
  };
  std::vector<double> mean(variants.size(), 0.0);
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  for (auto seed : seeds) {
    const AblationData data = ablation_data(seed);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      RunConfig rc = default_run_config();
      apply_preset(rc, "toy");
      rc.train.seed = seed;
      for (const char* s : variants[v].settings) apply_override(rc, s);
      const TrainResult tr = train(data.train, data.val, rc.model, rc.train);
      mean[v] += 100.0 * evaluate(data.test, tr.model).metrics.accuracy / seeds.size();
    }
  }
  const double elapsed = seconds_since(start);
  std::string summary = "ceiling " + fmt(100 * ceiling, 4);
  for (std::size_t v = 0; v < variants.size(); ++v) summary += ", " + std::string(variants[v].name) + " " + fmt(mean[v], 4);
  summary += ", " + fmt(elapsed) + " s";

  Checker c;
  const double full = mean[0];
  c.expect(full >= 100 * ceiling + 10, "(a) full below ceiling + 10");
  for (std::size_t v = 1; v <= 3; ++v)
    c.expect(full >= mean[v] - 1, std::string("(b) full below ") + variants[v].name + " - 1");
  c.expect(mean[3] <= full - 3, "(b) no-SA gap " + fmt(full - mean[3]) + " < 3");
  c.expect(mean[1] <= full - 3, "(b) no-LC gap " + fmt(full - mean[1]) + " < 3");
  c.expect(full >= mean[4] - 1, "(c) TAA below MHA - 1");
  c.expect(elapsed < 900, "runtime over 15 minutes");
  return c.outcome(summary);
}

Outcome memorization() {
  const auto start = Clock::now();
  GeneratorConfig gc;
  gc.n_dialogues = 5;
  gc.seed = 7;
  const Corpus corpus = generate_corpus(default_grammar(), gc);
  RunConfig rc = default_run_config();
  apply_preset(rc, "toy");
  rc.train.max_epochs = 200;
  rc.train.patience = 200;
  rc.train.eval_metric = EvalMetric::ValWeightedF1;
  rc.train.seed = 7;
  std::size_t first_hit = 0;
  const TrainResult tr = train(corpus, corpus, rc.model, rc.train, std::nullopt,
                               [&](const SpartaModel& m, std::size_t epoch) {
                                 const double acc = evaluate(corpus, m).metrics.accuracy;
                                 if (acc >= 0.99 && first_hit == 0) first_hit = epoch;
                                 return acc;
                               });
  const double acc = evaluate(corpus, tr.model).metrics.accuracy;
  const double elapsed = seconds_since(start);
  Checker c;
  c.expect(acc >= 0.99, "train accuracy " + fmt(acc));
  c.expect(elapsed < 120, "runtime " + fmt(elapsed) + " s");
  return c.outcome("train accuracy " + fmt(100 * acc, 4) + "% on " + std::to_string(corpus.num_utterances()) +
                   " utterances, first reached 99% at epoch " + std::to_string(first_hit) + ", " + fmt(elapsed) +
                   " s");
}

int run_cli(const std::string& args) {
#ifdef SPARTA_CLI
  const std::string cmd = std::string("\"") + SPARTA_CLI + "\" " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
#else
  (void)args;
  return -1;
#endif
}

Outcome determinism() {
  Checker c;
  TempDir dir("acceptance-determinism");
  auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  c.expect(run_cli("synth --split --set synth.n_dialogues=30 --set synth.seed=5 -o " + q(dir / "data")) == 0,
           "synth failed");
  const std::string common = "--preset toy --set model.d=16 --set model.mha_heads=2 --set train.epochs=3 "
                             "--set train.speaker_epochs=2 --set data.train=" + q(dir / "data" / "train.jsonl") +
                             " --set data.val=" + q(dir / "data" / "val.jsonl") +
                             " --set data.test=" + q(dir / "data" / "test.jsonl");
  for (const char* run : {"a", "b"}) {
    c.expect(run_cli("train " + common + " -o " + q(dir / run)) == 0, std::string("train ") + run + " failed");
    c.expect(run_cli("eval --checkpoint " + q(dir / run / "checkpoint") + " --corpus " +
                     q(dir / "data" / "test.jsonl") + " -o " + q(dir / run / "eval")) == 0,
             std::string("eval ") + run + " failed");
    c.expect(run_cli("cv " + common + " --set train.folds=2 --set train.epochs=1 -o " + q(dir / run / "cv")) == 0,
             std::string("cv ") + run + " failed");
  }
  c.expect(run_cli("synth --split --set synth.n_dialogues=30 --set synth.seed=5 -o " + q(dir / "data2")) == 0,
           "second synth failed");
  std::size_t compared = 0;
  auto same = [&](const fs::path& a, const fs::path& b) {
    ++compared;
    c.expect(fs::exists(a) && slurp(a) == slurp(b), "differs: " + a.filename().string());
  };
  for (const char* f : {"corpus.jsonl", "train.jsonl", "val.jsonl", "test.jsonl"}) same(dir / "data" / f, dir / "data2" / f);
  for (const char* f : {"epoch_log.csv", "train_summary.json", "checkpoint/params.txt", "checkpoint/vocab.tsv",
                        "test/metrics.json", "test/predictions.jsonl", "test/confusion.csv", "eval/metrics.json",
                        "eval/predictions.jsonl", "cv/cv_summary.json", "cv/fold1/metrics.json"})
    same(dir / "a" / f, dir / "b" / f);
  return c.outcome(std::to_string(compared) + " output files compared bitwise across repeated commands");
}

Outcome early_stopping_contract() {
  Checker c;
  GeneratorConfig gc;
  gc.n_dialogues = 4;
  gc.seed = 8;
  const Corpus corpus = generate_corpus(default_grammar(), gc);
  RunConfig rc = default_run_config();
  apply_preset(rc, "toy");
  rc.model.encoder.dim = 8;
  rc.model.mha_heads = 2;
  rc.train.speaker_epochs = 1;
  rc.train.max_epochs = 50;
  rc.train.patience = 5;
  rc.train.min_delta = 0.001;
  std::string summary;
  for (std::size_t first_flat : {1, 2, 4}) {
    const TrainResult tr = train(corpus, corpus, rc.model, rc.train, std::nullopt,
                                 [&](const SpartaModel&, std::size_t epoch) {
                                   return epoch < first_flat ? 1.0 - 0.1 * epoch : 1.0 - 0.1 * first_flat;
                                 });
    c.expect(tr.log.size() == first_flat + 5, "first_flat " + std::to_string(first_flat) + " stopped at " +
                                                  std::to_string(tr.log.size()));
    c.expect(!tr.log.empty() && tr.log.back().stopped, "stop flag missing");
    summary += (summary.empty() ? "" : ", ") + std::to_string(first_flat) + "->" + std::to_string(tr.log.size());
  }
  return c.outcome("first_flat -> epochs run: " + summary);
}

Outcome corpus_tooling() {
  Checker c;
  using enum DialogueAct;
  const Corpus session = parse_corpus(data_path("sample_session.jsonl"));
  const CorpusStats stats = corpus_statistics(session);
  TransitionTable expect{};
  const std::vector<DialogueAct> labels = {GT, GT, IRQ, ID, CRQ, CD, CRQ, CD};
  for (std::size_t i = 0; i + 1 < labels.size(); ++i) ++expect[index_of(labels[i])][index_of(labels[i + 1])];
  c.expect(stats.transitions == expect, "transition table");
  c.expect(stats.transitions[index_of(CRQ)][index_of(CD)] == 2, "CRQ->CD count");
  c.expect(stats.total_transitions() == 7, "transition total");
  Rng rng(105);
  const Corpus ten = random_corpus(rng, 10, 5);
  const CorpusSplit split = split_corpus(ten, SplitSpec{});
  c.expect(split.train.dialogues.size() == 7 && split.test.dialogues.size() == 2 && split.val.dialogues.size() == 1,
           "split sizes");
  return c.outcome("7 transitions with CRQ->CD x2, split (" + std::to_string(split.train.dialogues.size()) + "," +
                   std::to_string(split.test.dialogues.size()) + "," + std::to_string(split.val.dialogues.size()) + ")");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"attention properties", attention_properties},
      {"memory oracle", memory_oracle},
      {"metrics oracle", metrics_oracle},
      {"kappa and t-test", kappa_and_t_test},
      {"synthetic ablation", synthetic_ablation},
      {"memorization", memorization},
      {"determinism", determinism},
      {"early stopping", early_stopping_contract},
      {"corpus tooling", corpus_tooling},
  };
  // Optional arguments select criteria by number.
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n >= 1 && n <= static_cast<int>(criteria.size())) selected[n - 1] = true;
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
