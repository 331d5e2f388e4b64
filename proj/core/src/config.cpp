#include "sparta/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "sparta/error.hpp"

namespace sparta {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <class E>
E wrap_parse(const std::string& key, const std::function<E()>& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_KEY(NAME, FIELD, DOC)                                                       \
  Entry {                                                                                \
    {NAME, DOC}, [](RunConfig& c, const std::string& v) { c.FIELD = to_uint(NAME, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                       \
  }
#define REAL_KEY(NAME, FIELD, DOC)                                                         \
  Entry {                                                                                  \
    {NAME, DOC}, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); }, \
        [](const RunConfig& c) { return fmt_double(c.FIELD); }                             \
  }
#define BOOL_KEY(NAME, FIELD, DOC)                                                       \
  Entry {                                                                                \
    {NAME, DOC}, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); }, \
        [](const RunConfig& c) { return fmt_bool(c.FIELD); }                             \
  }
#define TEXT_KEY(NAME, FIELD, DOC)                                          \
  Entry {                                                                   \
    {NAME, DOC}, [](RunConfig& c, const std::string& v) { c.FIELD = v; }, \
        [](const RunConfig& c) { return c.FIELD; }                          \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{{"model.variant", "BS, MHA or TAA"},
            [](RunConfig& c, const std::string& v) {
              c.model.variant = wrap_parse<Variant>("model.variant", [&] { return parse_variant(v); });
            },
            [](const RunConfig& c) { return variant_name(c.model.variant); }},
      SIZE_KEY("model.d", model.encoder.dim, "model dimension"),
      SIZE_KEY("model.k", model.window, "memory window size"),
      Entry{{"model.encoder", "bag or mini_transformer"},
            [](RunConfig& c, const std::string& v) {
              c.model.encoder.backend =
                  wrap_parse<EncoderBackend>("model.encoder", [&] { return parse_backend(v); });
            },
            [](const RunConfig& c) { return backend_name(c.model.encoder.backend); }},
      SIZE_KEY("model.encoder_layers", model.encoder.layers, "mini_transformer blocks"),
      SIZE_KEY("model.encoder_heads", model.encoder.heads, "mini_transformer attention heads"),
      SIZE_KEY("model.max_len", model.encoder.max_len, "token truncation length"),
      BOOL_KEY("model.use_local", model.use_local, "local context streams"),
      BOOL_KEY("model.use_global", model.use_global, "global context streams"),
      BOOL_KEY("model.use_speaker", model.use_speaker, "speaker-aware track"),
      SIZE_KEY("model.classifier_hidden", model.classifier_hidden, "classifier width, 0 = d"),
      REAL_KEY("model.dropout", model.dropout_model, "dropout on the fused vector"),
      REAL_KEY("model.classifier_dropout", model.dropout_classifier, "classifier input dropout"),
      REAL_KEY("model.leaky_slope", model.leaky_slope, "LeakyReLU negative slope"),
      SIZE_KEY("model.mha_heads", model.mha_heads, "heads of the MHA variant"),
      BOOL_KEY("model.taa_clamp", model.taa_clamp_nonnegative_logits,
               "clamp time-aware logits at zero before scaling"),
      BOOL_KEY("model.freeze_speaker", model.freeze_speaker_encoder,
               "keep the pretrained speaker encoder fixed"),
      REAL_KEY("train.lr", train.learning_rate, "Adam learning rate"),
      SIZE_KEY("train.batch_size", train.batch_size, "dialogues per step"),
      SIZE_KEY("train.epochs", train.max_epochs, "maximum epochs"),
      SIZE_KEY("train.patience", train.patience, "early stopping patience"),
      REAL_KEY("train.min_delta", train.min_delta, "early stopping minimum improvement"),
      SIZE_KEY("train.seed", train.seed, "random seed"),
      Entry{{"train.eval_metric", "val_loss or val_weighted_f1"},
            [](RunConfig& c, const std::string& v) {
              c.train.eval_metric =
                  wrap_parse<EvalMetric>("train.eval_metric", [&] { return parse_eval_metric(v); });
            },
            [](const RunConfig& c) { return eval_metric_name(c.train.eval_metric); }},
      SIZE_KEY("train.vocab_min_count", train.vocab_min_count, "minimum token count"),
      SIZE_KEY("train.speaker_epochs", train.speaker_epochs, "speaker pretraining epochs"),
      REAL_KEY("train.speaker_lr", train.speaker_learning_rate, "speaker pretraining learning rate"),
      SIZE_KEY("train.speaker_batch_size", train.speaker_batch_size,
               "utterances per speaker pretraining step"),
      SIZE_KEY("train.threads", train.threads, "worker threads"),
      SIZE_KEY("train.folds", folds, "cross-validation folds"),
      TEXT_KEY("data.train", data.train, "training corpus"),
      TEXT_KEY("data.val", data.val, "validation corpus"),
      TEXT_KEY("data.test", data.test, "test corpus"),
      TEXT_KEY("data.format", data.format, "auto, jsonl or csv"),
      TEXT_KEY("synth.grammar", synth.grammar, "grammar file, empty = built-in"),
      SIZE_KEY("synth.n_dialogues", synth.generator.n_dialogues, "dialogues to generate"),
      SIZE_KEY("synth.min_utterances", synth.generator.min_utterances, "shortest dialogue"),
      SIZE_KEY("synth.max_utterances", synth.generator.max_utterances, "longest dialogue"),
      REAL_KEY("synth.noise_rate", synth.generator.noise_rate, "speaker noise token rate"),
      SIZE_KEY("synth.seed", synth.generator.seed, "generator seed"),
  };
  return table;
}

#undef SIZE_KEY
#undef REAL_KEY
#undef BOOL_KEY
#undef TEXT_KEY

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries())
    if (e.key.name == key) return e;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

RunConfig default_run_config() { return RunConfig{}; }

void apply_preset(RunConfig& c, const std::string& preset) {
  if (preset == "paper") {
    c.model.encoder.dim = 768;
    c.model.classifier_hidden = 768;
    c.model.window = 6;
    c.model.dropout_model = 0.15;
    c.model.dropout_classifier = 0.1;
    c.model.encoder.max_len = 512;
    c.train.learning_rate = 1e-5;
    c.train.batch_size = 8;
    c.train.max_epochs = 50;
    c.train.patience = 5;
    c.train.min_delta = 0.001;
  } else if (preset == "toy") {
    c.model.encoder.dim = 32;
    c.model.classifier_hidden = 0;
    c.model.window = 4;
    c.model.mha_heads = 4;
    c.train.learning_rate = 3e-3;
    c.train.batch_size = 8;
    c.train.max_epochs = 30;
    c.train.patience = 5;
    c.train.min_delta = 0.001;
    c.train.speaker_epochs = 10;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected paper or toy)");
  }
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  find_entry(key).set(c, value);
}

std::string get_setting(const RunConfig& c, const std::string& key) {
  return find_entry(key).get(c);
}

void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  apply_setting(c, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

namespace {

/// Applies "key = value" lines; keys must start with `prefix`.
void read_settings(std::istream& in, RunConfig& c, const std::string& prefix) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.rfind(prefix, 0) != 0) throw ParseError(lineno, "unexpected key '" + key + "'");
    try {
      apply_setting(c, key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(lineno, e.what());
    }
  }
}

}  // namespace

void read_run_config(std::istream& in, RunConfig& c) { read_settings(in, c, ""); }

void load_run_config(const std::filesystem::path& path, RunConfig& c) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  try {
    read_run_config(in, c);
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_run_config(std::ostream& out, const RunConfig& c) {
  for (const auto& e : entries()) out << e.key.name << " = " << e.get(c) << '\n';
}

void validate(const RunConfig& c) {
  c.model.validate();
  c.train.validate();
  c.synth.generator.validate();
  if (c.data.format != "auto") parse_format(c.data.format);
  if (c.folds < 2) throw ConfigError("train.folds must be at least 2");
}

void write_model_config(std::ostream& out, const SpartaConfig& m) {
  RunConfig c;
  c.model = m;
  for (const auto& e : entries())
    if (e.key.name.rfind("model.", 0) == 0) out << e.key.name << " = " << e.get(c) << '\n';
}

SpartaConfig read_model_config(std::istream& in) {
  RunConfig c;
  read_settings(in, c, "model.");
  c.model.validate();
  return c.model;
}

void save_checkpoint(const std::filesystem::path& dir, const SpartaModel& model) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "model.cfg");
    if (!out) throw Error("cannot write " + (dir / "model.cfg").string());
    write_model_config(out, model.config);
  }
  {
    std::ofstream out(dir / "vocab.tsv");
    if (!out) throw Error("cannot write " + (dir / "vocab.tsv").string());
    write_vocabulary(out, model.vocab);
  }
  save_parameters(dir / "params.txt", model.params);
}

SpartaModel load_checkpoint(const std::filesystem::path& dir) {
  SpartaModel model;
  {
    std::ifstream in(dir / "model.cfg");
    if (!in) throw Error("cannot open " + (dir / "model.cfg").string());
    model.config = read_model_config(in);
  }
  {
    std::ifstream in(dir / "vocab.tsv");
    if (!in) throw Error("cannot open " + (dir / "vocab.tsv").string());
    model.vocab = read_vocabulary(in);
  }
  model.params = load_parameters(dir / "params.txt");
  bind_params(model);
  return model;
}

}  // namespace sparta
