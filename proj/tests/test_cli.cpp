#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out, err;
};

/// Runs the CLI with `args`, capturing stdout and stderr.
Run sparta_cli(const std::string& args, const testing::TempDir& scratch) {
  static int n = 0;
  const fs::path out = scratch / ("stdout" + std::to_string(n));
  const fs::path err = scratch / ("stderr" + std::to_string(n++));
  const std::string cmd =
      std::string("\"") + SPARTA_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  const int status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return {status, testing::slurp(out), testing::slurp(err)};
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

const std::string kTiny =
    "--preset toy --set model.d=8 --set model.mha_heads=2 --set train.epochs=2 "
    "--set train.speaker_epochs=1 ";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit nonzero") {
  testing::TempDir dir("cli-usage");
  auto r = sparta_cli("frobnicate", dir);
  CHECK(r.status != 0);
  CHECK_FALSE(r.err.empty());
  r = sparta_cli("", dir);
  CHECK(r.status != 0);
  r = sparta_cli("stats --set model.dimension=4 " + quoted(testing::data_path("sample_session.jsonl")), dir);
  CHECK(r.status != 0);
  CHECK(r.err.find("model.dimension") != std::string::npos);
}

TEST_CASE("gradcheck passes") {
  testing::TempDir dir("cli-grad");
  const auto r = sparta_cli("gradcheck -o " + quoted(dir / "g"), dir);
  CHECK(r.status == 0);
  CHECK(r.out.find("gradcheck passed") != std::string::npos);
  CHECK(fs::exists(dir / "g" / "gradcheck.json"));
  CHECK(fs::exists(dir / "g" / "resolved.cfg"));
}

TEST_CASE("stats reports the session transitions and leaves the input untouched") {
  testing::TempDir dir("cli-stats");
  const fs::path input = testing::data_path("sample_session.jsonl");
  const std::string before = testing::slurp(input);
  const auto r = sparta_cli("stats -o " + quoted(dir / "s") + " " + quoted(input), dir);
  REQUIRE(r.status == 0);
  const std::string transitions = testing::slurp(dir / "s" / "transitions.csv");
  CHECK(transitions.rfind("from,ID,IRQ,GT,GC,CRQ,YNQ,CD,ACK,PA,NA,OD,ORQ\n", 0) == 0);
  CHECK(transitions.find("\nGT,0,1,1,0,0,0,0,0,0,0,0,0\n") != std::string::npos);
  CHECK(transitions.find("\nCRQ,0,0,0,0,0,0,2,0,0,0,0,0\n") != std::string::npos);
  CHECK(transitions.find("\nCD,0,0,0,0,1,0,0,0,0,0,0,0\n") != std::string::npos);
  CHECK(fs::exists(dir / "s" / "counts.csv"));
  const auto stats = nlohmann::json::parse(testing::slurp(dir / "s" / "stats.json"));
  CHECK(stats["transitions"].get<int>() == 7);
  CHECK(testing::slurp(input) == before);
  const auto csv = sparta_cli("stats " + quoted(testing::data_path("sample_session.csv")), dir);
  CHECK(csv.status == 0);
}

TEST_CASE("kappa") {
  testing::TempDir dir("cli-kappa");
  testing::spit(dir / "a.txt", "ID\nID\nGT\nGT\n");
  testing::spit(dir / "b.txt", "ID\nGT\nGT\nGT\n");
  const auto r = sparta_cli("kappa " + quoted(dir / "a.txt") + " " + quoted(dir / "b.txt"), dir);
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["observed"].get<double>() == doctest::Approx(0.75));
  CHECK(j["chance"].get<double>() == doctest::Approx(0.5 * 0.25 + 0.5 * 0.75));
  CHECK(j["kappa"].get<double>() == doctest::Approx(0.5));
  testing::spit(dir / "c.txt", "ID\n");
  CHECK(sparta_cli("kappa " + quoted(dir / "a.txt") + " " + quoted(dir / "c.txt"), dir).status != 0);
}

TEST_CASE("synth, train, eval and pca write their artifacts") {
  testing::TempDir dir("cli-pipeline");
  auto r = sparta_cli("synth --split --set synth.n_dialogues=20 --set synth.seed=3 -o " + quoted(dir / "data"), dir);
  REQUIRE(r.status == 0);
  for (const char* f : {"corpus.jsonl", "train.jsonl", "val.jsonl", "test.jsonl", "grammar.txt",
                        "resolved.cfg", "synth_report.json"})
    CHECK(fs::exists(dir / "data" / f));
  const std::string train_before = testing::slurp(dir / "data" / "train.jsonl");

  const std::string data = "--set data.train=" + quoted(dir / "data" / "train.jsonl") +
                           " --set data.val=" + quoted(dir / "data" / "val.jsonl") +
                           " --set data.test=" + quoted(dir / "data" / "test.jsonl") + " ";
  r = sparta_cli("train " + kTiny + data + "-o " + quoted(dir / "run"), dir);
  REQUIRE_MESSAGE(r.status == 0, r.err);
  for (const char* f : {"resolved.cfg", "epoch_log.csv", "train_summary.json", "checkpoint/model.cfg",
                        "checkpoint/vocab.tsv", "checkpoint/params.txt", "test/metrics.json",
                        "test/confusion.csv", "test/predictions.jsonl"})
    CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
  CHECK(testing::slurp(dir / "data" / "train.jsonl") == train_before);
  const std::string log = testing::slurp(dir / "run" / "epoch_log.csv");
  CHECK(log.rfind("epoch,train_loss,val_metric,stopped\n", 0) == 0);
  const std::string vocab = testing::slurp(dir / "run" / "checkpoint" / "vocab.tsv");
  CHECK(vocab.find('\t') != std::string::npos);
  CHECK(testing::slurp(dir / "run" / "resolved.cfg").find("model.d = 8") != std::string::npos);

  r = sparta_cli("eval --checkpoint " + quoted(dir / "run" / "checkpoint") + " --corpus " +
                     quoted(dir / "data" / "test.jsonl") + " -o " + quoted(dir / "eval"),
                 dir);
  REQUIRE(r.status == 0);
  CHECK(testing::slurp(dir / "eval" / "metrics.json") == testing::slurp(dir / "run" / "test" / "metrics.json"));
  CHECK(testing::slurp(dir / "eval" / "predictions.jsonl") ==
        testing::slurp(dir / "run" / "test" / "predictions.jsonl"));

  r = sparta_cli("pca --checkpoint " + quoted(dir / "run" / "checkpoint") + " --corpus " +
                     quoted(dir / "data" / "test.jsonl") + " -o " + quoted(dir / "pca"),
                 dir);
  REQUIRE(r.status == 0);
  CHECK(testing::slurp(dir / "pca" / "pca_si.csv").rfind("x,y,speaker\n", 0) == 0);
  CHECK(fs::exists(dir / "pca" / "pca_sa.csv"));

  r = sparta_cli("cv " + kTiny + "--set train.folds=2 --set data.train=" +
                     quoted(dir / "data" / "corpus.jsonl") + " -o " + quoted(dir / "cv"),
                 dir);
  REQUIRE(r.status == 0);
  CHECK(fs::exists(dir / "cv" / "cv_summary.json"));
  CHECK(fs::exists(dir / "cv" / "fold1" / "metrics.json"));
}

TEST_CASE("config files are applied between preset and overrides") {
  testing::TempDir dir("cli-config");
  testing::spit(dir / "run.cfg", "synth.n_dialogues = 5\nsynth.seed = 9\n");
  auto r = sparta_cli("synth -c " + quoted(dir / "run.cfg") + " --set synth.seed=10 -o " + quoted(dir / "a"), dir);
  REQUIRE(r.status == 0);
  const std::string resolved = testing::slurp(dir / "a" / "resolved.cfg");
  CHECK(resolved.find("synth.n_dialogues = 5") != std::string::npos);
  CHECK(resolved.find("synth.seed = 10") != std::string::npos);
  testing::spit(dir / "bad.cfg", "synth.dialogues = 5\n");
  r = sparta_cli("synth -c " + quoted(dir / "bad.cfg") + " -o " + quoted(dir / "b"), dir);
  CHECK(r.status != 0);
  CHECK(r.err.find("synth.dialogues") != std::string::npos);
}

TEST_CASE("dump-grammar prints a grammar that parses back") {
  testing::TempDir dir("cli-grammar");
  auto r = sparta_cli("synth --dump-grammar", dir);
  REQUIRE(r.status == 0);
  testing::spit(dir / "g.txt", r.out);
  r = sparta_cli("synth --set synth.n_dialogues=3 --set synth.grammar=" + quoted(dir / "g.txt") + " -o " +
                     quoted(dir / "out"),
                 dir);
  CHECK(r.status == 0);
}

}  // TEST_SUITE
