#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparta/corpus.hpp"
#include "sparta/encoder.hpp"
#include "sparta/global_context.hpp"
#include "sparta/local_context.hpp"

namespace sparta {

/// BS: no local context. MHA: multi-head attention over the window.
/// TAA: time-aware attention over the window.
enum class Variant { BS, MHA, TAA };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

enum class Mode { Train, Eval };

struct SpartaConfig {
  Variant variant = Variant::TAA;
  bool use_local = true;
  bool use_global = true;
  bool use_speaker = true;
  std::size_t window = 6;
  EncoderConfig encoder;          // encoder.dim is the model dimension d
  std::size_t classifier_hidden = 0;  // 0 -> d
  double dropout_model = 0.15;
  double dropout_classifier = 0.1;
  double leaky_slope = 0.01;
  std::size_t mha_heads = 4;
  bool taa_clamp_nonnegative_logits = false;
  bool freeze_speaker_encoder = true;

  std::size_t dim() const { return encoder.dim; }
  std::size_t hidden() const { return classifier_hidden ? classifier_hidden : encoder.dim; }
  /// Number of fused context streams; fusion width is streams() * dim().
  std::size_t streams() const;
  void validate() const;
  bool operator==(const SpartaConfig&) const = default;
};

struct TrackParams {
  EncoderParams encoder;
  std::optional<AttentionParams> local;
  std::optional<GruParams> global;
};

struct SpartaModel {
  SpartaConfig config;
  Vocabulary vocab;
  ParameterStore params;
  std::optional<TrackParams> speaker_aware;
  TrackParams speaker_invariant;
  ParamId hidden_w, hidden_b, output_w, output_b;
};

/// Weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero. Parameter names
/// are prefixed "sa.", "si." and "classifier.".
SpartaModel init_params(const SpartaConfig& config, const Vocabulary& vocab, std::uint64_t seed);

/// Rebinds handles after `params` was replaced (e.g. loaded from disk).
void bind_params(SpartaModel& model);

/// Copies a pretrained speaker encoder into the "sa.encoder." weights; they
/// stay frozen unless config.freeze_speaker_encoder is false.
void attach_speaker_encoder(SpartaModel& model, const SpeakerModel& speaker);

/// Concatenation of (stream_j + residual_j) in order.
ad::Var fuse_contexts(std::span<const ad::Var> streams, std::span<const ad::Var> residuals);

/// Encoded representations of one utterance.
struct UtteranceTrace {
  std::vector<double> h_si, h_sa;
};

/// Builds the per-utterance logits of a dialogue into `g`. Strictly causal;
/// windows and recurrent states start empty for every dialogue.
std::vector<ad::Var> dialogue_logits(ad::Graph& g, const SpartaModel& model,
                                     const Dialogue& dialogue, Mode mode, Rng& rng,
                                     std::vector<UtteranceTrace>* trace = nullptr);

struct UtterancePrediction {
  std::array<double, kNumActs> probabilities{};
  DialogueAct predicted = DialogueAct::ID;
  std::optional<DialogueAct> gold;
};

struct DialoguePrediction {
  std::string dialogue_id;
  std::vector<UtterancePrediction> utterances;
};

/// Argmax with ties to the lowest label index.
DialogueAct argmax_label(std::span<const double> probabilities);

DialoguePrediction forward_dialogue(const SpartaModel& model, const Dialogue& dialogue,
                                    Mode mode = Mode::Eval, std::uint64_t dropout_seed = 0);

/// Sum of per-utterance cross-entropy over labelled utterances; `count`
/// receives the number of terms.
ad::Var dialogue_loss(ad::Graph& g, const SpartaModel& model, const Dialogue& dialogue,
                      Mode mode, Rng& rng, std::size_t* count = nullptr);

/// JSONL: {"dialogue_id", "turn_index", "gold", "predicted", "probabilities"}.
void write_predictions(std::ostream& out, std::span<const DialoguePrediction> predictions);

}  // namespace sparta
