// sparta: train, evaluate and inspect dialogue-act classifiers.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparta/config.hpp"
#include "sparta/corpus.hpp"
#include "sparta/diagnostics.hpp"
#include "sparta/error.hpp"
#include "sparta/pca.hpp"
#include "sparta/synth.hpp"
#include "sparta/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sparta;

namespace {

struct Common {
  std::string config_file;
  std::string preset;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out) {
  cmd->add_option("-c,--config", c.config_file, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", c.preset, "paper or toy, applied before the config file");
  cmd->add_option("--set", c.overrides, "key=value override, repeatable");
  auto* out = cmd->add_option("-o,--out", c.out, "output directory");
  if (needs_out) out->required();
}

RunConfig resolve(const Common& c) {
  RunConfig rc = default_run_config();
  if (!c.preset.empty()) apply_preset(rc, c.preset);
  if (!c.config_file.empty()) load_run_config(c.config_file, rc);
  for (const auto& o : c.overrides) apply_override(rc, o);
  validate(rc);
  return rc;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_resolved(const fs::path& dir, const RunConfig& rc) {
  auto out = open_out(dir / "resolved.cfg");
  write_run_config(out, rc);
}

Corpus load(const std::string& path, const RunConfig& rc, const char* key) {
  if (path.empty()) throw ConfigError(std::string(key) + " is not set");
  if (rc.data.format == "auto") return parse_corpus(path);
  return parse_corpus(path, parse_format(rc.data.format));
}

json metrics_summary(const MetricsReport& m) {
  return {{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}, {"weighted_f1", m.weighted_f1}};
}

void write_evaluation(const fs::path& dir, const EvaluationResult& ev) {
  {
    auto out = open_out(dir / "metrics.json");
    write_metrics_json(out, ev.metrics);
  }
  {
    auto out = open_out(dir / "confusion.csv");
    write_confusion_csv(out, ev.confusion);
  }
  {
    auto out = open_out(dir / "predictions.jsonl");
    write_predictions(out, ev.predictions);
  }
  auto out = open_out(dir / "dialogue_f1.csv");
  out << std::setprecision(17) << "dialogue_id,weighted_f1\n";
  for (std::size_t i = 0; i < ev.predictions.size(); ++i)
    out << ev.predictions[i].dialogue_id << ',' << ev.dialogue_weighted_f1[i] << '\n';
}

int cmd_train(const Common& c) {
  const RunConfig rc = resolve(c);
  const fs::path dir = c.out;
  Corpus train_corpus = load(rc.data.train, rc, "data.train");
  Corpus val_corpus;
  std::optional<Corpus> test_corpus;
  if (rc.data.val.empty()) {
    SplitSpec spec;
    spec.seed = rc.train.seed;
    CorpusSplit s = split_corpus(train_corpus, spec);
    save_corpus(dir / "splits" / "train.jsonl", s.train, CorpusFormat::Jsonl);
    save_corpus(dir / "splits" / "val.jsonl", s.val, CorpusFormat::Jsonl);
    save_corpus(dir / "splits" / "test.jsonl", s.test, CorpusFormat::Jsonl);
    train_corpus = std::move(s.train);
    val_corpus = std::move(s.val);
    if (rc.data.test.empty()) test_corpus = std::move(s.test);
  } else {
    val_corpus = load(rc.data.val, rc, "data.val");
  }
  if (!rc.data.test.empty()) test_corpus = load(rc.data.test, rc, "data.test");
  write_resolved(dir, rc);

  TrainResult tr = train(train_corpus, val_corpus, rc.model, rc.train);
  save_checkpoint(dir / "checkpoint", tr.model);
  {
    auto out = open_out(dir / "epoch_log.csv");
    write_epoch_log_csv(out, tr.log);
  }
  json summary;
  summary["epochs_run"] = tr.log.size();
  summary["best_epoch"] = tr.best_epoch;
  summary["eval_metric"] = eval_metric_name(rc.train.eval_metric);
  summary["best_val_metric"] = tr.best_val_metric;
  summary["speaker_train_accuracy"] =
      tr.speaker_train_accuracy ? json(*tr.speaker_train_accuracy) : json(nullptr);
  if (test_corpus) {
    EvaluationResult ev = evaluate(*test_corpus, tr.model, rc.train.threads);
    write_evaluation(dir / "test", ev);
    summary["test"] = metrics_summary(ev.metrics);
  }
  auto out = open_out(dir / "train_summary.json");
  out << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& corpus_path) {
  const RunConfig rc = resolve(c);
  const SpartaModel model = load_checkpoint(checkpoint);
  const Corpus corpus = load(corpus_path.empty() ? rc.data.test : corpus_path, rc, "data.test");
  write_resolved(c.out, rc);
  EvaluationResult ev = evaluate(corpus, model, rc.train.threads);
  write_evaluation(c.out, ev);
  std::cout << metrics_summary(ev.metrics).dump(2) << '\n';
  return 0;
}

int cmd_cv(const Common& c) {
  const RunConfig rc = resolve(c);
  const fs::path dir = c.out;
  const Corpus corpus = load(rc.data.train, rc, "data.train");
  write_resolved(dir, rc);
  CrossValidationResult cv = cross_validate(corpus, rc.model, rc.train, rc.folds);
  json summary;
  summary["folds"] = json::array();
  for (const auto& f : cv.folds) {
    const fs::path fold_dir = dir / ("fold" + std::to_string(f.fold));
    write_evaluation(fold_dir, f.evaluation);
    json j = metrics_summary(f.evaluation.metrics);
    j["fold"] = f.fold;
    j["train_dialogues"] = f.train_dialogues;
    j["val_dialogues"] = f.val_dialogues;
    j["test_dialogues"] = f.test_dialogues;
    summary["folds"].push_back(j);
  }
  summary["mean"] = {{"accuracy", cv.mean_accuracy},
                     {"macro_f1", cv.mean_macro_f1},
                     {"weighted_f1", cv.mean_weighted_f1}};
  auto out = open_out(dir / "cv_summary.json");
  out << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_stats(const Common& c, const std::vector<std::string>& paths) {
  const RunConfig rc = resolve(c);
  std::vector<Corpus> corpora;
  std::vector<std::string> names;
  if (paths.empty()) {
    for (auto [name, path] : {std::pair{"train", rc.data.train}, std::pair{"val", rc.data.val},
                              std::pair{"test", rc.data.test}})
      if (!path.empty()) {
        corpora.push_back(load(path, rc, name));
        names.push_back(name);
      }
    if (corpora.empty()) throw ConfigError("stats: no corpus given (pass files or set data.*)");
  } else {
    for (const auto& p : paths) {
      corpora.push_back(load(p, rc, "corpus"));
      names.push_back(fs::path(p).stem().string());
    }
  }
  std::vector<NamedCorpus> named;
  for (std::size_t i = 0; i < corpora.size(); ++i) named.push_back({names[i], &corpora[i]});
  const CorpusStats stats = corpus_statistics(named);
  json summary = {{"dialogues", stats.num_dialogues},
                  {"utterances", stats.num_utterances},
                  {"utterances_per_dialogue_mean", stats.utterances_per_dialogue_mean},
                  {"words_per_utterance_patient", stats.words_per_utterance_patient},
                  {"words_per_utterance_therapist", stats.words_per_utterance_therapist},
                  {"transitions", stats.total_transitions()}};
  if (c.out.empty()) {
    write_counts_csv(std::cout, stats);
    std::cout << '\n';
    write_transitions_csv(std::cout, stats);
    std::cout << '\n' << summary.dump(2) << '\n';
    return 0;
  }
  const fs::path dir = c.out;
  write_resolved(dir, rc);
  {
    auto out = open_out(dir / "counts.csv");
    write_counts_csv(out, stats);
  }
  {
    auto out = open_out(dir / "transitions.csv");
    write_transitions_csv(out, stats);
  }
  auto out = open_out(dir / "stats.json");
  out << summary.dump(2) << '\n';
  write_transitions_csv(std::cout, stats);
  return 0;
}

int cmd_kappa(const Common& c, const std::string& a, const std::string& b) {
  const RunConfig rc = resolve(c);
  const AgreementReport r = cohens_kappa(read_annotation(a), read_annotation(b));
  json j = {{"observed", r.observed}, {"chance", r.chance}, {"kappa", r.kappa}};
  if (!c.out.empty()) {
    write_resolved(c.out, rc);
    auto out = open_out(fs::path(c.out) / "kappa.json");
    out << j.dump(2) << '\n';
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_synth(const Common& c, bool split) {
  const RunConfig rc = resolve(c);
  const fs::path dir = c.out;
  const GrammarSpec grammar =
      rc.synth.grammar.empty() ? default_grammar() : load_grammar(rc.synth.grammar);
  write_resolved(dir, rc);
  const Corpus corpus = generate_corpus(grammar, rc.synth.generator);
  save_corpus(dir / "corpus.jsonl", corpus, CorpusFormat::Jsonl);
  {
    auto out = open_out(dir / "grammar.txt");
    write_grammar(out, grammar);
  }
  if (split) {
    SplitSpec spec;
    spec.seed = rc.synth.generator.seed;
    CorpusSplit s = split_corpus(corpus, spec);
    save_corpus(dir / "train.jsonl", s.train, CorpusFormat::Jsonl);
    save_corpus(dir / "val.jsonl", s.val, CorpusFormat::Jsonl);
    save_corpus(dir / "test.jsonl", s.test, CorpusFormat::Jsonl);
  }
  json j = {{"dialogues", corpus.dialogues.size()},
            {"utterances", corpus.num_utterances()},
            {"utterance_only_bayes_accuracy", utterance_only_bayes_accuracy(grammar)}};
  auto out = open_out(dir / "synth_report.json");
  out << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_gradcheck(const Common& c, std::uint64_t seed) {
  const RunConfig rc = resolve(c);
  const auto cases = run_gradient_suite(seed);
  bool ok = true;
  json j = json::array();
  for (const auto& k : cases) {
    ok = ok && k.report.passed();
    std::cout << std::left << std::setw(24) << k.name << " scalars " << std::setw(6) << k.scalars
              << " max_rel_err " << std::scientific << std::setprecision(3)
              << k.report.max_rel_error << std::defaultfloat << "  "
              << (k.report.passed() ? "PASS" : "FAIL") << '\n';
    json params = json::array();
    for (const auto& p : k.report.parameters)
      params.push_back({{"name", p.name},
                        {"max_rel_error", p.max_rel_error},
                        {"max_abs_error", p.max_abs_error},
                        {"worst_analytic", p.worst_analytic},
                        {"worst_numeric", p.worst_numeric}});
    j.push_back({{"case", k.name},
                 {"max_rel_error", k.report.max_rel_error},
                 {"tolerance", k.report.tolerance},
                 {"passed", k.report.passed()},
                 {"parameters", params}});
  }
  if (!c.out.empty()) {
    write_resolved(c.out, rc);
    auto out = open_out(fs::path(c.out) / "gradcheck.json");
    out << j.dump(2) << '\n';
  }
  std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << '\n';
  return ok ? 0 : 1;
}

int cmd_pca(const Common& c, const std::string& checkpoint, const std::string& corpus_path) {
  const RunConfig rc = resolve(c);
  const SpartaModel model = load_checkpoint(checkpoint);
  const Corpus corpus = load(corpus_path.empty() ? rc.data.test : corpus_path, rc, "data.test");
  write_resolved(c.out, rc);
  const Representations reps = collect_representations(corpus, model);
  auto emit = [&](const std::vector<std::vector<double>>& vectors, const char* file) {
    const PcaResult r = pca_project(vectors);
    auto out = open_out(fs::path(c.out) / file);
    write_pca_csv(out, r, reps.speakers);
    return r;
  };
  json j;
  const PcaResult si = emit(reps.speaker_invariant, "pca_si.csv");
  j["si_eigenvalues"] = si.eigenvalues;
  if (!reps.speaker_aware.empty()) {
    const PcaResult sa = emit(reps.speaker_aware, "pca_sa.csv");
    j["sa_eigenvalues"] = sa.eigenvalues;
  }
  j["points"] = reps.speakers.size();
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker- and time-aware dialogue-act classification"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, corpus_path, kappa_a, kappa_b;
  std::vector<std::string> stats_paths;
  bool split = false, dump_grammar = false, list_keys = false;
  std::uint64_t grad_seed = 0;

  auto* train_cmd = app.add_subcommand("train", "pretrain the speaker encoder, train, checkpoint");
  add_common(train_cmd, common, true);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  add_common(eval_cmd, common, true);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--corpus", corpus_path, "corpus file (default data.test)");

  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation over data.train");
  add_common(cv_cmd, common, true);

  auto* stats_cmd = app.add_subcommand("stats", "label counts and transition table");
  add_common(stats_cmd, common, false);
  stats_cmd->add_option("corpora", stats_paths, "corpus files, one split each");

  auto* kappa_cmd = app.add_subcommand("kappa", "Cohen's kappa of two annotation files");
  add_common(kappa_cmd, common, false);
  kappa_cmd->add_option("a", kappa_a, "first annotation")->required()->check(CLI::ExistingFile);
  kappa_cmd->add_option("b", kappa_b, "second annotation")->required()->check(CLI::ExistingFile);

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus from a grammar");
  add_common(synth_cmd, common, false);
  synth_cmd->add_flag("--split", split, "also write 70:20:10 train/val/test files");
  synth_cmd->add_flag("--dump-grammar", dump_grammar, "print the built-in grammar and exit");

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  add_common(grad_cmd, common, false);
  grad_cmd->add_option("--seed", grad_seed, "parameter initialization seed");

  auto* pca_cmd = app.add_subcommand("pca", "2-D projection of SA and SI representations");
  add_common(pca_cmd, common, true);
  pca_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  pca_cmd->add_option("--corpus", corpus_path, "corpus file (default data.test)");

  auto* keys_cmd = app.add_subcommand("keys", "list config keys with defaults");
  keys_cmd->add_flag("--defaults", list_keys, "(default behaviour)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(common);
    if (*eval_cmd) return cmd_eval(common, checkpoint, corpus_path);
    if (*cv_cmd) return cmd_cv(common);
    if (*stats_cmd) return cmd_stats(common, stats_paths);
    if (*kappa_cmd) return cmd_kappa(common, kappa_a, kappa_b);
    if (*synth_cmd) {
      if (dump_grammar) {
        std::cout << default_grammar_text();
        return 0;
      }
      if (common.out.empty()) throw ConfigError("synth: --out is required");
      return cmd_synth(common, split);
    }
    if (*grad_cmd) return cmd_gradcheck(common, grad_seed);
    if (*pca_cmd) return cmd_pca(common, checkpoint, corpus_path);
    if (*keys_cmd) {
      const RunConfig rc = default_run_config();
      for (const auto& k : config_keys())
        std::cout << std::left << std::setw(26) << k.name << std::setw(18)
                  << get_setting(rc, k.name) << k.description << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
