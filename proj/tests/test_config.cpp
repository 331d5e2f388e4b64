#include <set>
#include <sstream>

#include "doctest.h"
#include "sparta/config.hpp"
#include "sparta/error.hpp"
#include "support.hpp"

using namespace sparta;

namespace {

std::string dump(const RunConfig& c) {
  std::ostringstream out;
  write_run_config(out, c);
  return out.str();
}

RunConfig parse(const std::string& text, RunConfig base = default_run_config()) {
  std::istringstream in(text);
  read_run_config(in, base);
  return base;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("key table is unique and every key round trips through get/set") {
  std::set<std::string> names;
  RunConfig c = default_run_config();
  apply_preset(c, "toy");
  for (const auto& k : config_keys()) {
    CHECK(names.insert(k.name).second);
    CHECK_FALSE(k.description.empty());
    const std::string v = get_setting(c, k.name);
    RunConfig copy = default_run_config();
    apply_setting(copy, k.name, v);
    CHECK(get_setting(copy, k.name) == v);
  }
  for (const char* required : {"model.variant", "model.d", "model.k", "train.lr", "train.patience",
                               "train.min_delta", "train.eval_metric", "train.seed"})
    CHECK(names.count(required) == 1);
}

TEST_CASE("unknown keys and malformed values are rejected") {
  RunConfig c = default_run_config();
  CHECK_THROWS_AS(apply_setting(c, "model.dimension", "4"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "model.d", "four"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "model.d", "-4"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "train.lr", "fast"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "model.use_local", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "model.variant", "GRU"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "model.d"), ConfigError);
  CHECK_THROWS_AS(parse("model.d = 8\nmystery = 1\n"), ParseError);
  CHECK_THROWS_AS(apply_preset(c, "huge"), ConfigError);
}

TEST_CASE("file syntax: comments, blanks and spacing") {
  const RunConfig c = parse("# header\n\n  model.d=12  \nmodel.variant = MHA # trailing\n");
  CHECK(c.model.encoder.dim == 12);
  CHECK(c.model.variant == Variant::MHA);
  CHECK_THROWS_AS(parse("model.d 12\n"), ParseError);
}

TEST_CASE("presets") {
  RunConfig paper = default_run_config();
  apply_preset(paper, "paper");
  CHECK(paper.model.encoder.dim == 768);
  CHECK(paper.model.window == 6);
  CHECK(paper.model.dropout_model == 0.15);
  CHECK(paper.model.dropout_classifier == 0.1);
  CHECK(paper.train.learning_rate == 1e-5);
  CHECK(paper.train.batch_size == 8);
  CHECK(paper.train.max_epochs == 50);
  CHECK(paper.train.patience == 5);
  CHECK(paper.train.min_delta == 0.001);
  CHECK(paper.model.encoder.max_len == 512);
  RunConfig toy = default_run_config();
  apply_preset(toy, "toy");
  CHECK(toy.model.encoder.dim == 32);
  CHECK_NOTHROW(validate(toy));
  CHECK_NOTHROW(validate(paper));
}

TEST_CASE("precedence: preset, then file, then overrides") {
  RunConfig c = default_run_config();
  apply_preset(c, "toy");
  const std::size_t toy_k = c.model.window;
  c = parse("model.d = 24\ntrain.lr = 0.01\n", c);
  apply_override(c, "train.lr=0.02");
  CHECK(c.model.window == toy_k);
  CHECK(c.model.encoder.dim == 24);
  CHECK(c.train.learning_rate == 0.02);
}

TEST_CASE("resolved config reproduces every key") {
  RunConfig c = default_run_config();
  apply_preset(c, "toy");
  apply_override(c, "model.variant=BS");
  apply_override(c, "model.use_local=false");
  apply_override(c, "train.lr=0.000123456789");
  apply_override(c, "data.train=some path/with spaces.jsonl");
  apply_override(c, "synth.noise_rate=0.3");
  const std::string text = dump(c);
  const RunConfig back = parse(text);
  CHECK(dump(back) == text);
  CHECK(back.model == c.model);
  CHECK(back.train == c.train);
  CHECK(back.data == c.data);
  CHECK(back.train.learning_rate == 0.000123456789);
  for (const auto& k : config_keys()) CHECK(text.find(k.name + " =") != std::string::npos);
}

TEST_CASE("model config text round trip") {
  SpartaConfig m;
  m.variant = Variant::MHA;
  m.window = 3;
  m.encoder.dim = 20;
  m.encoder.backend = EncoderBackend::MiniTransformer;
  m.leaky_slope = 0.2;
  m.freeze_speaker_encoder = false;
  std::stringstream io;
  write_model_config(io, m);
  CHECK(read_model_config(io) == m);
  std::istringstream bad("train.lr = 0.1\n");
  CHECK_THROWS_AS(read_model_config(bad), ParseError);
}

TEST_CASE("checkpoint round trip gives bitwise-identical predictions") {
  Rng rng(3);
  const Corpus c = testing::random_corpus(rng, 4, 6);
  SpartaConfig mc;
  mc.encoder.dim = 8;
  mc.window = 2;
  mc.mha_heads = 2;
  for (Variant v : {Variant::TAA, Variant::MHA}) {
    mc.variant = v;
    const SpartaModel model = init_params(mc, build_vocabulary(c, 1), 9);
    testing::TempDir dir("ckpt");
    save_checkpoint(dir.path() / "model", model);
    const SpartaModel loaded = load_checkpoint(dir.path() / "model");
    CHECK(loaded.config == model.config);
    CHECK(loaded.vocab == model.vocab);
    CHECK(loaded.params == model.params);
    for (const auto& d : c.dialogues) {
      const auto a = forward_dialogue(model, d), b = forward_dialogue(loaded, d);
      for (std::size_t t = 0; t < a.utterances.size(); ++t)
        CHECK(a.utterances[t].probabilities == b.utterances[t].probabilities);
    }
  }
  testing::TempDir empty("ckpt-missing");
  CHECK_THROWS_AS(load_checkpoint(empty.path()), Error);
}

}  // TEST_SUITE
