#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "sparta/corpus.hpp"
#include "sparta/error.hpp"
#include "sparta/rng.hpp"

namespace sparta {

CorpusSplit split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  const double fractions[] = {spec.train_fraction, spec.test_fraction, spec.val_fraction};
  for (double f : fractions)
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
  if (std::abs(spec.train_fraction + spec.test_fraction + spec.val_fraction - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");

  const std::size_t n = corpus.dialogues.size();
  if (n < 3) throw Error("need at least 3 dialogues to split, got " + std::to_string(n));
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * n));
  const auto n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * n));
  if (n_test == 0) throw Error("test split rounds to zero dialogues");
  if (n_val == 0) throw Error("validation split rounds to zero dialogues");
  if (n_test + n_val >= n) throw Error("train split rounds to zero dialogues");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  shuffle(std::span<std::size_t>(order), rng);

  // 0 = train, 1 = test, 2 = val; each split keeps corpus order.
  std::vector<int> assignment(n, 0);
  for (std::size_t i = 0; i < n_test; ++i) assignment[order[i]] = 1;
  for (std::size_t i = n_test; i < n_test + n_val; ++i) assignment[order[i]] = 2;

  CorpusSplit out;
  out.train.provenance = out.test.provenance = out.val.provenance = corpus.provenance;
  out.train.provenance["split"] = "train";
  out.test.provenance["split"] = "test";
  out.val.provenance["split"] = "val";
  for (std::size_t i = 0; i < n; ++i) {
    Corpus& dst = assignment[i] == 0 ? out.train : assignment[i] == 1 ? out.test : out.val;
    dst.dialogues.push_back(corpus.dialogues[i]);
  }
  return out;
}

std::size_t CountRow::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t CorpusStats::total_label_count() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.total();
  return n;
}

std::size_t CorpusStats::total_transitions() const {
  std::size_t n = 0;
  for (const auto& row : transitions)
    for (std::size_t c : row) n += c;
  return n;
}

CorpusStats corpus_statistics(const Corpus& corpus) {
  return corpus_statistics(std::vector<NamedCorpus>{{"all", &corpus}});
}

CorpusStats corpus_statistics(const std::vector<NamedCorpus>& splits) {
  CorpusStats stats;
  std::size_t words[2] = {0, 0};
  std::size_t utts[2] = {0, 0};
  for (const auto& split : splits) {
    CountRow patient{split.name, SpeakerRole::Patient, {}};
    CountRow therapist{split.name, SpeakerRole::Therapist, {}};
    for (const auto& d : split.corpus->dialogues) {
      ++stats.num_dialogues;
      for (std::size_t t = 0; t < d.size(); ++t) {
        const Utterance& u = d.utterances[t];
        if (!u.label)
          throw Error("dialogue '" + d.id + "': unlabelled utterance at turn " + std::to_string(t));
        CountRow& row = u.speaker == SpeakerRole::Patient ? patient : therapist;
        ++row.counts[index_of(*u.label)];
        const int s = u.speaker == SpeakerRole::Patient ? 0 : 1;
        words[s] += word_count(u.text);
        ++utts[s];
        ++stats.num_utterances;
        if (t > 0) {
          const auto& prev = d.utterances[t - 1];
          if (!prev.label)
            throw Error("dialogue '" + d.id + "': unlabelled utterance at turn " +
                        std::to_string(t - 1));
          ++stats.transitions[index_of(*prev.label)][index_of(*u.label)];
        }
      }
    }
    stats.rows.push_back(patient);
    stats.rows.push_back(therapist);
  }
  if (stats.num_dialogues)
    stats.utterances_per_dialogue_mean =
        static_cast<double>(stats.num_utterances) / static_cast<double>(stats.num_dialogues);
  if (utts[0]) stats.words_per_utterance_patient = static_cast<double>(words[0]) / utts[0];
  if (utts[1]) stats.words_per_utterance_therapist = static_cast<double>(words[1]) / utts[1];
  return stats;
}

void write_counts_csv(std::ostream& out, const CorpusStats& stats) {
  out << "split,speaker";
  for (auto a : kAllActs) out << ',' << act_code(a);
  out << ",total\n";
  auto emit = [&](const CountRow& r) {
    out << r.split << ',' << (r.speaker == SpeakerRole::Patient ? "Patient" : "Therapist");
    for (std::size_t c : r.counts) out << ',' << c;
    out << ',' << r.total() << '\n';
  };
  for (const auto& r : stats.rows) emit(r);
  if (stats.rows.size() > 2) {
    CountRow tp{"Total", SpeakerRole::Patient, {}};
    CountRow tt{"Total", SpeakerRole::Therapist, {}};
    for (const auto& r : stats.rows) {
      CountRow& dst = r.speaker == SpeakerRole::Patient ? tp : tt;
      for (std::size_t i = 0; i < kNumActs; ++i) dst.counts[i] += r.counts[i];
    }
    emit(tp);
    emit(tt);
  }
}

void write_transitions_csv(std::ostream& out, const CorpusStats& stats) {
  out << "from";
  for (auto a : kAllActs) out << ',' << act_code(a);
  out << '\n';
  for (std::size_t i = 0; i < kNumActs; ++i) {
    out << act_code(act_at(i));
    for (std::size_t c : stats.transitions[i]) out << ',' << c;
    out << '\n';
  }
}

AgreementReport cohens_kappa(const std::vector<DialogueAct>& a,
                             const std::vector<DialogueAct>& b) {
  if (a.size() != b.size())
    throw Error("annotation lengths differ: " + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()));
  if (a.empty()) throw Error("annotations are empty");
  const double n = static_cast<double>(a.size());
  std::array<double, kNumActs> na{}, nb{};
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    na[index_of(a[i])] += 1.0;
    nb[index_of(b[i])] += 1.0;
  }
  AgreementReport r;
  r.observed = static_cast<double>(agree) / n;
  for (std::size_t c = 0; c < kNumActs; ++c) r.chance += (na[c] / n) * (nb[c] / n);
  // p_e == 1 forces both annotators onto one identical label everywhere.
  r.kappa = r.chance < 1.0 ? (r.observed - r.chance) / (1.0 - r.chance) : 1.0;
  return r;
}

std::vector<DialogueAct> read_annotation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotation file '" + path.string() + "'");
  std::vector<DialogueAct> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    std::string code = line.substr(b, e - b + 1);
    auto act = parse_act(code);
    if (!act) throw ParseError(lineno, "unknown label '" + code + "'");
    out.push_back(*act);
  }
  return out;
}

}  // namespace sparta
