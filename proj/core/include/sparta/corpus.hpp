#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparta/labels.hpp"

namespace sparta {

struct Utterance {
  SpeakerRole speaker = SpeakerRole::Therapist;
  std::string text;
  std::optional<DialogueAct> label;
  std::size_t index = 0;

  bool operator==(const Utterance&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  bool operator==(const Dialogue&) const = default;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  std::map<std::string, std::string> provenance;

  std::size_t num_utterances() const;
  bool operator==(const Corpus&) const = default;
};

enum class CorpusFormat { Jsonl, Csv };

CorpusFormat parse_format(const std::string& name);
/// Guess from the file extension (".csv" -> Csv, everything else Jsonl).
CorpusFormat format_for_path(const std::filesystem::path& path);

/// Checks the structural invariants: non-empty dialogues, consecutive
/// indices, non-blank text, unique ids. Throws sparta::Error.
void validate(const Corpus& corpus);

Corpus read_corpus(std::istream& in, CorpusFormat format);
Corpus parse_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus parse_corpus(const std::filesystem::path& path);

void write_corpus(std::ostream& out, const Corpus& corpus, CorpusFormat format);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus,
                 CorpusFormat format);

/// Whitespace-token count.
std::size_t word_count(const std::string& text);

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_fraction = 0.7;
  double test_fraction = 0.2;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct CorpusSplit {
  Corpus train;
  Corpus test;
  Corpus val;
};

/// Dialogue-level random partition. Sizes are round(fraction * n) for test
/// and val; train takes the remainder. Any split that would be empty is an
/// error.
CorpusSplit split_corpus(const Corpus& corpus, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Statistics

using LabelCounts = std::array<std::size_t, kNumActs>;
using TransitionTable = std::array<std::array<std::size_t, kNumActs>, kNumActs>;

struct CountRow {
  std::string split;
  SpeakerRole speaker;
  LabelCounts counts{};
  std::size_t total() const;
};

struct CorpusStats {
  std::vector<CountRow> rows;  // split-major, Patient before Therapist
  double utterances_per_dialogue_mean = 0.0;
  double words_per_utterance_patient = 0.0;
  double words_per_utterance_therapist = 0.0;
  TransitionTable transitions{};
  std::size_t num_dialogues = 0;
  std::size_t num_utterances = 0;

  std::size_t total_label_count() const;
  std::size_t total_transitions() const;
};

/// A named split for statistics. `corpus_statistics(c)` treats the whole
/// corpus as one split called "all".
struct NamedCorpus {
  std::string name;
  const Corpus* corpus;
};

CorpusStats corpus_statistics(const Corpus& corpus);
CorpusStats corpus_statistics(const std::vector<NamedCorpus>& splits);

/// Distribution table (split, speaker, 12 label columns, total) followed by
/// a "Total" row pair when more than one split is present.
void write_counts_csv(std::ostream& out, const CorpusStats& stats);
/// 12x12 table, rows = label at t, columns = label at t+1.
void write_transitions_csv(std::ostream& out, const CorpusStats& stats);

// ---------------------------------------------------------------------------
// Agreement

struct AgreementReport {
  double observed = 0.0;  // p_o
  double chance = 0.0;    // p_e
  double kappa = 0.0;
};

AgreementReport cohens_kappa(const std::vector<DialogueAct>& a,
                             const std::vector<DialogueAct>& b);

/// One label code per non-empty line.
std::vector<DialogueAct> read_annotation(const std::filesystem::path& path);

}  // namespace sparta
