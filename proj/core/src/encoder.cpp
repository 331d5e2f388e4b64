#include "sparta/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sparta/error.hpp"
#include "sparta/optim.hpp"

namespace sparta {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      flush();
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, tokens_.size());
  if (!inserted) throw Error("duplicate vocabulary token '" + token + "'");
  tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const std::string& text, std::size_t max_len) const {
  std::vector<std::size_t> ids;
  for (const auto& tok : tokenize(text)) {
    if (ids.size() >= max_len) break;
    ids.push_back(id(tok));
  }
  if (ids.empty()) ids.push_back(kUnk);
  return ids;
}

Vocabulary build_vocabulary(const Corpus& train, std::size_t min_count, std::size_t max_size) {
  if (train.dialogues.empty()) throw Error("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& d : train.dialogues)
    for (const auto& u : d.utterances)
      for (auto& tok : tokenize(u.text)) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  std::size_t added = 0;
  for (const auto& [tok, n] : ranked) {
    if (n < min_count) break;
    if (max_size && added >= max_size) break;
    if (tok == Vocabulary::kPadToken || tok == Vocabulary::kUnkToken) continue;
    vocab.add(tok);
    ++added;
  }
  return vocab;
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < vocab.size(); ++i) out << vocab.token(i) << '\t' << i << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError(lineno, "expected token<TAB>id");
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(lineno, "bad vocabulary id");
    }
    entries.emplace_back(id, line.substr(0, tab));
  }
  std::sort(entries.begin(), entries.end());
  Vocabulary vocab;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != i) throw ParseError(0, "vocabulary ids are not dense");
    if (i == Vocabulary::kPad || i == Vocabulary::kUnk) {
      if (entries[i].second != vocab.token(i)) throw ParseError(0, "reserved vocabulary ids altered");
      continue;
    }
    vocab.add(entries[i].second);
  }
  return vocab;
}

std::string backend_name(EncoderBackend b) {
  return b == EncoderBackend::Bag ? "bag" : "mini_transformer";
}

EncoderBackend parse_backend(const std::string& name) {
  if (name == "bag") return EncoderBackend::Bag;
  if (name == "mini_transformer") return EncoderBackend::MiniTransformer;
  throw ConfigError("unknown encoder backend '" + name + "'");
}

void EncoderConfig::validate() const {
  if (dim == 0 || max_len == 0) throw ConfigError("encoder dim and max_len must be positive");
  if (backend == EncoderBackend::MiniTransformer) {
    if (layers == 0 || heads == 0) throw ConfigError("encoder layers and heads must be positive");
    if (dim % heads != 0)
      throw ConfigError("encoder dim " + std::to_string(dim) + " is not divisible by " +
                        std::to_string(heads) + " heads");
  }
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = uniform(rng, -bound, bound);
  return t;
}

EncoderParams add_encoder_params(ParameterStore& store, const std::string& prefix,
                                 const EncoderConfig& config, std::size_t vocab_size, Rng& rng,
                                 bool trainable) {
  config.validate();
  const std::size_t d = config.dim;
  EncoderParams p;
  p.config = config;
  auto weight = [&](const std::string& name, Shape shape, std::size_t fan_in) {
    return store.add(prefix + "." + name, uniform_init(std::move(shape), fan_in, rng), trainable);
  };
  auto bias = [&](const std::string& name, std::size_t n) {
    return store.add(prefix + "." + name, Tensor({n}), trainable);
  };
  // One-hot inputs: fan_in 1.
  p.embedding = weight("embedding", {vocab_size, d}, 1);
  if (config.backend == EncoderBackend::MiniTransformer) {
    p.position = weight("position", {config.max_len, d}, d);
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::string b = "block" + std::to_string(l) + ".";
      TransformerBlockParams blk;
      blk.w_query = weight(b + "w_query", {d, d}, d);
      blk.w_key = weight(b + "w_key", {d, d}, d);
      blk.w_value = weight(b + "w_value", {d, d}, d);
      blk.w_output = weight(b + "w_output", {d, d}, d);
      blk.b_output = bias(b + "b_output", d);
      blk.w_ff1 = weight(b + "w_ff1", {d, 2 * d}, d);
      blk.b_ff1 = bias(b + "b_ff1", 2 * d);
      blk.w_ff2 = weight(b + "w_ff2", {2 * d, d}, 2 * d);
      blk.b_ff2 = bias(b + "b_ff2", d);
      p.blocks.push_back(blk);
    }
  }
  p.pool_w = weight("pool_w", {d, d}, d);
  p.pool_b = bias("pool_b", d);
  return p;
}

EncoderParams find_encoder_params(const ParameterStore& store, const std::string& prefix,
                                  const EncoderConfig& config) {
  config.validate();
  EncoderParams p;
  p.config = config;
  auto f = [&](const std::string& name) { return store.find(prefix + "." + name); };
  p.embedding = f("embedding");
  if (config.backend == EncoderBackend::MiniTransformer) {
    p.position = f("position");
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::string b = "block" + std::to_string(l) + ".";
      p.blocks.push_back({f(b + "w_query"), f(b + "w_key"), f(b + "w_value"), f(b + "w_output"),
                          f(b + "b_output"), f(b + "w_ff1"), f(b + "b_ff1"), f(b + "w_ff2"),
                          f(b + "b_ff2")});
    }
  }
  p.pool_w = f("pool_w");
  p.pool_b = f("pool_b");
  const Tensor& emb = store[p.embedding].tensor;
  if (emb.rank() != 2 || emb.cols() != config.dim)
    throw ShapeError("encoder '" + prefix + "': embedding shape " + shape_string(emb.shape()) +
                     " does not match dim " + std::to_string(config.dim));
  return p;
}

namespace {

ad::Var transformer_block(ad::Graph& g, const TransformerBlockParams& blk, ad::Var x,
                          std::size_t heads) {
  using namespace ad;
  const std::size_t d = x.value().cols();
  const std::size_t dh = d / heads;
  Var q = matmul(x, g.param(blk.w_query));
  Var k = matmul(x, g.param(blk.w_key));
  Var v = matmul(x, g.param(blk.w_value));
  std::vector<Var> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = slice(q, h * dh, dh);
    Var kh = slice(k, h * dh, dh);
    Var vh = slice(v, h * dh, dh);
    Var scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    outs.push_back(matmul(softmax(scores, 1), vh));
  }
  Var attn = add_bias(matmul(concat(outs, 1), g.param(blk.w_output)), g.param(blk.b_output));
  x = add(x, attn);
  Var ff = leaky_relu(add_bias(matmul(x, g.param(blk.w_ff1)), g.param(blk.b_ff1)), 0.01);
  ff = add_bias(matmul(ff, g.param(blk.w_ff2)), g.param(blk.b_ff2));
  return add(x, ff);
}

}  // namespace

ad::Var encode(ad::Graph& g, const EncoderParams& enc, std::span<const std::size_t> token_ids) {
  using namespace ad;
  if (token_ids.empty()) throw Error("encode: no tokens");
  const std::size_t n = std::min(token_ids.size(), enc.config.max_len);
  token_ids = token_ids.first(n);
  Var x = row_select(g.param(enc.embedding), token_ids);
  if (x.value().cols() != enc.config.dim)
    throw ShapeError("encoder params do not match dim " + std::to_string(enc.config.dim));
  Var pooled;
  switch (enc.config.backend) {
    case EncoderBackend::Bag:
      pooled = mean_rows(x);
      break;
    case EncoderBackend::MiniTransformer: {
      std::vector<std::size_t> pos(n);
      std::iota(pos.begin(), pos.end(), 0);
      x = add(x, row_select(g.param(enc.position), pos));
      for (const auto& blk : enc.blocks) x = transformer_block(g, blk, x, enc.config.heads);
      pooled = mean_rows(x);
      break;
    }
  }
  return tanh(add_bias(matmul(pooled, g.param(enc.pool_w)), g.param(enc.pool_b)));
}

std::vector<double> encode_utterance(const std::string& text, const Vocabulary& vocab,
                                     const ParameterStore& store, const EncoderParams& enc) {
  ad::Graph g(&store);
  auto ids = vocab.encode(text, enc.config.max_len);
  ad::Var h = encode(g, enc, ids);
  return h.value().data();
}

// ---------------------------------------------------------------------------

SpeakerModel init_speaker_model(const EncoderConfig& config, std::size_t vocab_size,
                                std::uint64_t seed) {
  Rng rng(seed);
  SpeakerModel m;
  m.config = config;
  m.encoder = add_encoder_params(m.params, "encoder", config, vocab_size, rng);
  m.head_w = m.params.add("head.w", uniform_init({config.dim, 2}, config.dim, rng));
  m.head_b = m.params.add("head.b", Tensor({2}));
  return m;
}

ad::Var speaker_logits(ad::Graph& g, const SpeakerModel& m, std::span<const std::size_t> ids) {
  if (!m.head_w.valid() || !m.head_b.valid()) throw Error("speaker model has no head");
  ad::Var h = encode(g, m.encoder, ids);
  return ad::add_bias(ad::matmul(h, g.param(m.head_w)), g.param(m.head_b));
}

namespace {

std::size_t speaker_class(SpeakerRole r) { return r == SpeakerRole::Therapist ? 0 : 1; }

}  // namespace

SpeakerModel pretrain_speaker_encoder(const Corpus& train, const Vocabulary& vocab,
                                      const EncoderConfig& config,
                                      const SpeakerTrainConfig& tc) {
  struct Example {
    std::vector<std::size_t> ids;
    std::size_t target;
  };
  std::vector<Example> examples;
  bool seen[2] = {false, false};
  for (const auto& d : train.dialogues)
    for (const auto& u : d.utterances) {
      examples.push_back({vocab.encode(u.text, config.max_len), speaker_class(u.speaker)});
      seen[speaker_class(u.speaker)] = true;
    }
  if (examples.empty()) throw Error("speaker pretraining: empty corpus");
  if (!seen[0] || !seen[1]) throw Error("speaker pretraining: corpus has a single speaker role");
  if (tc.batch_size == 0) throw ConfigError("speaker pretraining: batch size must be positive");

  SpeakerModel m = init_speaker_model(config, vocab.size(), tc.seed);
  OptimizerState opt = make_adam_state(m.params, AdamConfig{tc.learning_rate});
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(tc.seed, 1));
  GradientStore grads(m.params);
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      ad::Graph g(&m.params);
      std::vector<ad::Var> losses;
      for (std::size_t i = start; i < end; ++i) {
        const Example& ex = examples[order[i]];
        losses.push_back(ad::cross_entropy(speaker_logits(g, m, ex.ids), ex.target));
      }
      ad::Var loss = ad::scale(ad::sum(ad::concat(losses, 0)), 1.0 / static_cast<double>(end - start));
      g.backward(loss);
      grads.zero();
      g.accumulate_gradients(grads);
      adam_step(m.params, grads, opt);
    }
  }
  return m;
}

std::array<double, 2> classify_speaker(const std::string& text, const Vocabulary& vocab,
                                       const SpeakerModel& model) {
  ad::Graph g(&model.params);
  auto ids = vocab.encode(text, model.config.max_len);
  Tensor p = ad::softmax_values(speaker_logits(g, model, ids).value());
  return {p[0], p[1]};
}

double speaker_accuracy(const Corpus& corpus, const Vocabulary& vocab, const SpeakerModel& model) {
  std::size_t correct = 0, total = 0;
  for (const auto& d : corpus.dialogues)
    for (const auto& u : d.utterances) {
      auto p = classify_speaker(u.text, vocab, model);
      const std::size_t pred = p[0] >= p[1] ? 0 : 1;
      correct += pred == speaker_class(u.speaker);
      ++total;
    }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace sparta
