#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "sparta/autograd.hpp"
#include "sparta/corpus.hpp"

namespace sparta {

/// Lowercased tokens; runs of letters/digits form a token, each other
/// non-space character is a token of its own.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  /// Id of `token`, or kUnk.
  std::size_t id(const std::string& token) const;
  /// Token ids for `text`, truncated at `max_len`; a text with no tokens
  /// encodes as a single UNK.
  std::vector<std::size_t> encode(const std::string& text, std::size_t max_len) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

  /// Appends a token with the next id (used by loaders and builders).
  std::size_t add(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Tokens with count >= min_count, ordered by count descending then
/// lexicographically. `max_size` caps the number of regular (non-reserved)
/// tokens; 0 means no cap.
Vocabulary build_vocabulary(const Corpus& train, std::size_t min_count = 1,
                            std::size_t max_size = 0);

/// `token<TAB>id` per line.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocabulary(std::istream& in);

enum class EncoderBackend { Bag, MiniTransformer };

std::string backend_name(EncoderBackend b);
EncoderBackend parse_backend(const std::string& name);

struct EncoderConfig {
  EncoderBackend backend = EncoderBackend::Bag;
  std::size_t dim = 64;
  std::size_t layers = 1;
  std::size_t heads = 2;
  std::size_t max_len = 512;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct TransformerBlockParams {
  ParamId w_query, w_key, w_value, w_output, b_output;
  ParamId w_ff1, b_ff1, w_ff2, b_ff2;
};

struct EncoderParams {
  EncoderConfig config;
  ParamId embedding;
  ParamId position;  // mini_transformer only
  std::vector<TransformerBlockParams> blocks;
  ParamId pool_w, pool_b;
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

/// Registers encoder weights under "<prefix>." in `store`.
EncoderParams add_encoder_params(ParameterStore& store, const std::string& prefix,
                                 const EncoderConfig& config, std::size_t vocab_size, Rng& rng,
                                 bool trainable = true);
/// Looks up the weights previously registered under `prefix`.
EncoderParams find_encoder_params(const ParameterStore& store, const std::string& prefix,
                                  const EncoderConfig& config);

/// Pooled utterance representation H_t = tanh(pool(x) W + b), length dim.
ad::Var encode(ad::Graph& g, const EncoderParams& enc, std::span<const std::size_t> token_ids);

std::vector<double> encode_utterance(const std::string& text, const Vocabulary& vocab,
                                     const ParameterStore& store, const EncoderParams& enc);

// ---------------------------------------------------------------------------
// Speaker-aware encoder pretraining

struct SpeakerModel {
  EncoderConfig config;
  ParameterStore params;
  EncoderParams encoder;
  ParamId head_w, head_b;  // dim -> 2 (Therapist, Patient)
};

struct SpeakerTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

SpeakerModel init_speaker_model(const EncoderConfig& config, std::size_t vocab_size,
                                std::uint64_t seed);

/// Head logits (Therapist, Patient) for one utterance.
ad::Var speaker_logits(ad::Graph& g, const SpeakerModel& model, std::span<const std::size_t> token_ids);

/// Trains encoder + 2-class head on speaker identity with cross-entropy and Adam.
SpeakerModel pretrain_speaker_encoder(const Corpus& train, const Vocabulary& vocab,
                                      const EncoderConfig& config,
                                      const SpeakerTrainConfig& train_config);

/// (P(Therapist), P(Patient)).
std::array<double, 2> classify_speaker(const std::string& text, const Vocabulary& vocab,
                                       const SpeakerModel& model);

/// Fraction of utterances whose argmax speaker matches the gold role.
double speaker_accuracy(const Corpus& corpus, const Vocabulary& vocab, const SpeakerModel& model);

}  // namespace sparta
