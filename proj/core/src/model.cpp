#include "sparta/model.hpp"

#include <ostream>

#include <json.hpp>

#include "sparta/error.hpp"

namespace sparta {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::BS: return "BS";
    case Variant::MHA: return "MHA";
    case Variant::TAA: return "TAA";
  }
  return "";
}

Variant parse_variant(const std::string& name) {
  if (name == "BS") return Variant::BS;
  if (name == "MHA") return Variant::MHA;
  if (name == "TAA") return Variant::TAA;
  throw ConfigError("unknown model variant '" + name + "' (expected BS, MHA or TAA)");
}

std::size_t SpartaConfig::streams() const {
  const std::size_t per_track = (use_local ? 1 : 0) + (use_global ? 1 : 0);
  return per_track * (use_speaker ? 2 : 1);
}

void SpartaConfig::validate() const {
  encoder.validate();
  if (variant == Variant::BS && use_local)
    throw ConfigError("variant BS has no local context; set use_local = false");
  if (variant != Variant::BS && !use_local)
    throw ConfigError("variant " + variant_name(variant) + " needs use_local = true");
  if (!use_local && !use_global)
    throw ConfigError("at least one of use_local / use_global must be enabled");
  if (window == 0) throw ConfigError("window size must be positive");
  if (!(dropout_model >= 0.0 && dropout_model < 1.0) ||
      !(dropout_classifier >= 0.0 && dropout_classifier < 1.0))
    throw ConfigError("dropout rates must be in [0, 1)");
  if (variant == Variant::MHA && (mha_heads == 0 || dim() % mha_heads != 0))
    throw ConfigError("model dim " + std::to_string(dim()) + " is not divisible by " +
                      std::to_string(mha_heads) + " attention heads");
}

namespace {

TrackParams add_track(ParameterStore& store, const std::string& prefix, const SpartaConfig& c,
                      std::size_t vocab_size, Rng& rng, bool encoder_trainable) {
  TrackParams t;
  t.encoder = add_encoder_params(store, prefix + ".encoder", c.encoder, vocab_size, rng,
                                 encoder_trainable);
  if (c.use_local) t.local = add_attention_params(store, prefix + ".local", c.dim(), rng);
  if (c.use_global) t.global = add_gru_params(store, prefix + ".global", c.dim(), rng);
  return t;
}

TrackParams find_track(const ParameterStore& store, const std::string& prefix,
                       const SpartaConfig& c) {
  TrackParams t;
  t.encoder = find_encoder_params(store, prefix + ".encoder", c.encoder);
  if (c.use_local) t.local = find_attention_params(store, prefix + ".local");
  if (c.use_global) t.global = find_gru_params(store, prefix + ".global");
  return t;
}

ad::Var affine(ad::Graph& g, ad::Var x, ParamId w, ParamId b) {
  return ad::add_bias(ad::matmul(x, g.param(w)), g.param(b));
}

}  // namespace

SpartaModel init_params(const SpartaConfig& config, const Vocabulary& vocab, std::uint64_t seed) {
  config.validate();
  SpartaModel m;
  m.config = config;
  m.vocab = vocab;
  Rng rng(seed);
  if (config.use_speaker)
    m.speaker_aware = add_track(m.params, "sa", config, vocab.size(), rng,
                                !config.freeze_speaker_encoder);
  m.speaker_invariant = add_track(m.params, "si", config, vocab.size(), rng, true);
  const std::size_t fused = config.streams() * config.dim();
  const std::size_t hidden = config.hidden();
  m.hidden_w = m.params.add("classifier.hidden_w", uniform_init({fused, hidden}, fused, rng));
  m.hidden_b = m.params.add("classifier.hidden_b", Tensor({hidden}));
  m.output_w = m.params.add("classifier.output_w", uniform_init({hidden, kNumActs}, hidden, rng));
  m.output_b = m.params.add("classifier.output_b", Tensor({kNumActs}));
  return m;
}

void bind_params(SpartaModel& m) {
  m.config.validate();
  if (m.config.use_speaker) m.speaker_aware = find_track(m.params, "sa", m.config);
  else m.speaker_aware.reset();
  m.speaker_invariant = find_track(m.params, "si", m.config);
  m.hidden_w = m.params.find("classifier.hidden_w");
  m.hidden_b = m.params.find("classifier.hidden_b");
  m.output_w = m.params.find("classifier.output_w");
  m.output_b = m.params.find("classifier.output_b");
  const std::size_t fused = m.config.streams() * m.config.dim();
  if (m.params[m.hidden_w].tensor.shape() != Shape{fused, m.config.hidden()} ||
      m.params[m.output_w].tensor.shape() != Shape{m.config.hidden(), kNumActs})
    throw ShapeError("classifier parameters do not match the model configuration");
  if (m.params[m.speaker_invariant.encoder.embedding].tensor.shape()[0] != m.vocab.size())
    throw ShapeError("embedding rows do not match the vocabulary size");
}

void attach_speaker_encoder(SpartaModel& m, const SpeakerModel& speaker) {
  if (!m.speaker_aware) throw Error("model has no speaker-aware track");
  if (!(speaker.config == m.config.encoder))
    throw ConfigError("speaker encoder configuration differs from the model encoder");
  const std::string src_prefix = "encoder.";
  for (const auto& p : speaker.params.parameters()) {
    if (p.name.compare(0, src_prefix.size(), src_prefix) != 0) continue;
    Parameter& dst = m.params[m.params.find("sa." + p.name)];
    if (dst.tensor.shape() != p.tensor.shape())
      throw ShapeError("speaker encoder parameter '" + p.name + "' has shape " +
                       shape_string(p.tensor.shape()) + ", model expects " +
                       shape_string(dst.tensor.shape()));
    dst.tensor = p.tensor;
    dst.trainable = !m.config.freeze_speaker_encoder;
  }
}

ad::Var fuse_contexts(std::span<const ad::Var> streams, std::span<const ad::Var> residuals) {
  if (streams.size() != residuals.size() || streams.empty())
    throw ShapeError("fuse_contexts: " + std::to_string(streams.size()) + " streams vs " +
                     std::to_string(residuals.size()) + " residuals");
  std::vector<ad::Var> parts;
  parts.reserve(streams.size());
  for (std::size_t i = 0; i < streams.size(); ++i) parts.push_back(ad::add(streams[i], residuals[i]));
  return ad::concat(parts, 0);
}

namespace {

struct TrackState {
  const TrackParams* params;
  MemoryWindow<ad::Var> window;
  ad::Var global;
};

}  // namespace

std::vector<ad::Var> dialogue_logits(ad::Graph& g, const SpartaModel& model,
                                     const Dialogue& dialogue, Mode mode, Rng& rng,
                                     std::vector<UtteranceTrace>* trace) {
  const SpartaConfig& c = model.config;
  if (dialogue.utterances.empty()) throw Error("dialogue '" + dialogue.id + "' is empty");
  if (g.params() != &model.params) throw Error("graph is not bound to the model parameters");
  const bool train = mode == Mode::Train;
  const std::size_t d = c.dim();

  // Fixed fusion order: SA track before SI, local before global.
  std::vector<TrackState> tracks;
  if (c.use_speaker) {
    if (!model.speaker_aware) throw Error("model has no speaker-aware parameters");
    tracks.push_back({&*model.speaker_aware, MemoryWindow<ad::Var>(c.window, d), g.constant(Tensor({d}))});
  }
  tracks.push_back({&model.speaker_invariant, MemoryWindow<ad::Var>(c.window, d), g.constant(Tensor({d}))});

  TimeAwareOptions taa;
  taa.clamp_nonnegative_logits = c.taa_clamp_nonnegative_logits;

  std::vector<ad::Var> logits;
  logits.reserve(dialogue.size());
  if (trace) trace->clear();
  for (const Utterance& u : dialogue.utterances) {
    const auto ids = model.vocab.encode(u.text, c.encoder.max_len);
    std::vector<ad::Var> streams, residuals, reps;
    for (TrackState& tr : tracks) {
      ad::Var h = encode(g, tr.params->encoder, ids);
      reps.push_back(h);
      if (c.use_local) {
        const auto slots = tr.window.slots();
        ad::Var local = c.variant == Variant::MHA
                            ? multi_head_attention(g, *tr.params->local, h, slots, c.mha_heads)
                            : time_aware_attention(g, *tr.params->local, h, slots, taa);
        streams.push_back(local);
        residuals.push_back(h);
      }
      if (c.use_global) {
        tr.global = gru_cell(g, *tr.params->global, h, tr.global);
        streams.push_back(tr.global);
        residuals.push_back(h);
      }
    }
    ad::Var fused = fuse_contexts(streams, residuals);
    fused = ad::dropout(fused, c.dropout_model, rng, train);
    fused = ad::dropout(fused, c.dropout_classifier, rng, train);
    ad::Var hidden = ad::leaky_relu(affine(g, fused, model.hidden_w, model.hidden_b), c.leaky_slope);
    logits.push_back(affine(g, hidden, model.output_w, model.output_b));
    for (std::size_t i = 0; i < tracks.size(); ++i) tracks[i].window.push(reps[i]);
    if (trace) {
      UtteranceTrace t;
      t.h_si = reps.back().value().data();
      if (c.use_speaker) t.h_sa = reps.front().value().data();
      trace->push_back(std::move(t));
    }
  }
  return logits;
}

DialogueAct argmax_label(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return act_at(best);
}

DialoguePrediction forward_dialogue(const SpartaModel& model, const Dialogue& dialogue, Mode mode,
                                    std::uint64_t dropout_seed) {
  ad::Graph g(&model.params);
  Rng rng(dropout_seed);
  auto logits = dialogue_logits(g, model, dialogue, mode, rng);
  DialoguePrediction out;
  out.dialogue_id = dialogue.id;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    Tensor p = ad::softmax_values(logits[t].value());
    UtterancePrediction up;
    std::copy(p.values().begin(), p.values().end(), up.probabilities.begin());
    up.predicted = argmax_label(up.probabilities);
    up.gold = dialogue.utterances[t].label;
    out.utterances.push_back(up);
  }
  return out;
}

ad::Var dialogue_loss(ad::Graph& g, const SpartaModel& model, const Dialogue& dialogue, Mode mode,
                      Rng& rng, std::size_t* count) {
  auto logits = dialogue_logits(g, model, dialogue, mode, rng);
  std::vector<ad::Var> terms;
  for (std::size_t t = 0; t < logits.size(); ++t)
    if (const auto& gold = dialogue.utterances[t].label)
      terms.push_back(ad::cross_entropy(logits[t], index_of(*gold)));
  if (count) *count = terms.size();
  if (terms.empty()) return g.constant(Tensor::vector({0.0}));
  return ad::sum(ad::concat(terms, 0));
}

void write_predictions(std::ostream& out, std::span<const DialoguePrediction> predictions) {
  for (const auto& d : predictions)
    for (std::size_t t = 0; t < d.utterances.size(); ++t) {
      const auto& u = d.utterances[t];
      nlohmann::ordered_json rec;
      rec["dialogue_id"] = d.dialogue_id;
      rec["turn_index"] = t;
      rec["gold"] = u.gold ? nlohmann::ordered_json(std::string(act_code(*u.gold))) : nullptr;
      rec["predicted"] = std::string(act_code(u.predicted));
      rec["probabilities"] = u.probabilities;
      out << rec.dump() << '\n';
    }
}

}  // namespace sparta
