#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sparta/corpus.hpp"

namespace sparta {

struct Template {
  std::string text;
  double weight = 1.0;
  std::string tag = "unique";  // ambiguity tag, e.g. "shared:pa_ack"

  bool operator==(const Template&) const = default;
};

/// When the sampled label is `if_recent` or `otherwise`, it becomes
/// `if_recent` iff `trigger` occurred within the previous `window` turns.
struct RecencyRule {
  DialogueAct trigger = DialogueAct::YNQ;
  std::size_t window = 4;
  DialogueAct if_recent = DialogueAct::PA;
  DialogueAct otherwise = DialogueAct::ACK;

  bool operator==(const RecencyRule&) const = default;
};

/// Label grammar: first-order transitions refined by recency rules, a
/// per-label speaker policy, a template pool per label and per-speaker
/// noise tokens.
struct GrammarSpec {
  std::array<std::array<double, kNumActs>, kNumActs> transitions{};  // [from][to]
  std::array<double, kNumActs> therapist_probability{};
  std::array<std::vector<Template>, kNumActs> templates;
  std::array<std::vector<std::string>, 2> noise;  // [Therapist, Patient]
  std::vector<RecencyRule> recency;

  /// Rows sum to 1, probabilities in [0, 1], every label reachable from GT
  /// and every reachable label has a template. Throws ConfigError.
  void validate() const;
  bool operator==(const GrammarSpec&) const = default;
};

// Text layout, one directive per line, '#' starts a comment:
//   transition <FROM> <TO> <prob>
//   therapist <LABEL> <prob>
//   template <LABEL> <weight> <tag> <text...>
//   noise <T|P> <token>...
//   recency <TRIGGER> <window> <IF_RECENT> <OTHERWISE>
// Transitions that are not listed are zero. Rules apply in file order.
GrammarSpec read_grammar(std::istream& in);
GrammarSpec load_grammar(const std::filesystem::path& path);
void write_grammar(std::ostream& out, const GrammarSpec& grammar);

/// Text of the built-in grammar.
const std::string& default_grammar_text();
const GrammarSpec& default_grammar();

struct GeneratorConfig {
  std::size_t n_dialogues = 100;
  std::size_t min_utterances = 8;
  std::size_t max_utterances = 16;
  double noise_rate = 0.7;  // chance of a speaker noise token before / after the template
  std::uint64_t seed = 0;

  void validate() const;
};

Corpus generate_corpus(const GrammarSpec& grammar, const GeneratorConfig& config);

/// Stationary label distribution of the label process (the transition chain
/// augmented with turns-since-trigger counters for the recency rules).
std::array<double, kNumActs> stationary_distribution(const GrammarSpec& grammar);

/// Accuracy of the Bayes-optimal classifier that sees only the template
/// text: sum over distinct texts of max_label pi(label) P(text | label).
double utterance_only_bayes_accuracy(const GrammarSpec& grammar);

}  // namespace sparta
