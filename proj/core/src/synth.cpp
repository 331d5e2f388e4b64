#include "sparta/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "sparta/error.hpp"
#include "sparta/rng.hpp"

namespace sparta {

namespace {

constexpr double kRowTolerance = 1e-9;

std::size_t speaker_slot(SpeakerRole r) { return r == SpeakerRole::Therapist ? 0 : 1; }

constexpr std::size_t kMaxWindow = 64;
constexpr std::size_t kMaxProcessStates = 1000000;

// Label process state: the current label plus, per recency rule, the number
// of turns since its trigger (capped at window + 1, meaning "not recent").
struct ProcessState {
  std::size_t label;
  std::vector<std::size_t> since;
  auto operator<=>(const ProcessState&) const = default;
};

std::vector<std::size_t> initial_counters(const GrammarSpec& g) {
  std::vector<std::size_t> since;
  for (const auto& r : g.recency) since.push_back(r.window + 1);
  return since;
}

std::size_t apply_rules(const GrammarSpec& g, const std::vector<std::size_t>& since,
                        std::size_t label) {
  for (std::size_t i = 0; i < g.recency.size(); ++i) {
    const auto& r = g.recency[i];
    if (label == index_of(r.if_recent) || label == index_of(r.otherwise))
      return index_of(since[i] <= r.window ? r.if_recent : r.otherwise);
  }
  return label;
}

void advance(const GrammarSpec& g, std::vector<std::size_t>& since, std::size_t label) {
  for (std::size_t i = 0; i < g.recency.size(); ++i)
    since[i] = label == index_of(g.recency[i].trigger) ? 1
                                                       : std::min(since[i] + 1, g.recency[i].window + 1);
}

ProcessState start_state(const GrammarSpec& g) {
  ProcessState s{index_of(DialogueAct::GT), initial_counters(g)};
  advance(g, s.since, s.label);
  return s;
}

// Reachable states and the sparse transition lists between them.
struct LabelProcess {
  std::vector<ProcessState> states;
  std::vector<std::vector<std::pair<std::size_t, double>>> next;
};

LabelProcess build_process(const GrammarSpec& g) {
  LabelProcess proc;
  std::map<ProcessState, std::size_t> index;
  auto intern = [&](const ProcessState& s) {
    auto [it, inserted] = index.try_emplace(s, proc.states.size());
    if (inserted) {
      if (proc.states.size() >= kMaxProcessStates)
        throw ConfigError("grammar: recency rules produce too many process states");
      proc.states.push_back(s);
      proc.next.emplace_back();
    }
    return it->second;
  };
  intern(start_state(g));
  for (std::size_t i = 0; i < proc.states.size(); ++i) {
    std::map<std::size_t, double> out;
    for (std::size_t to = 0; to < kNumActs; ++to) {
      const double p = g.transitions[proc.states[i].label][to];
      if (p <= 0.0) continue;
      ProcessState s{apply_rules(g, proc.states[i].since, to), proc.states[i].since};
      advance(g, s.since, s.label);
      out[intern(s)] += p;
    }
    proc.next[i].assign(out.begin(), out.end());
  }
  return proc;
}

double parse_probability(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "expected a number, got '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ParseError(line, "expected a number, got '" + s + "'");
  return v;
}

}  // namespace

void GrammarSpec::validate() const {
  for (std::size_t from = 0; from < kNumActs; ++from) {
    double sum = 0.0;
    for (double p : transitions[from]) {
      if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError("grammar: transition probability out of [0, 1] in row " +
                          std::string(act_code(act_at(from))));
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance)
      throw ConfigError("grammar: transition row " + std::string(act_code(act_at(from))) +
                        " sums to " + std::to_string(sum));
    const double tp = therapist_probability[from];
    if (!(tp >= 0.0 && tp <= 1.0))
      throw ConfigError("grammar: therapist probability of " +
                        std::string(act_code(act_at(from))) + " is outside [0, 1]");
  }
  for (const auto& r : recency) {
    if (r.window == 0 || r.window > kMaxWindow)
      throw ConfigError("grammar: recency window must be in [1, " + std::to_string(kMaxWindow) + "]");
    if (r.if_recent == r.otherwise)
      throw ConfigError("grammar: recency rule needs two distinct labels");
  }
  std::vector<bool> seen(kNumActs, false);
  for (const auto& s : build_process(*this).states) seen[s.label] = true;
  for (std::size_t l = 0; l < kNumActs; ++l) {
    if (!seen[l])
      throw ConfigError("grammar: label " + std::string(act_code(act_at(l))) +
                        " is unreachable from GT");
    double mass = 0.0;
    for (const auto& t : templates[l]) {
      if (!(t.weight > 0.0) || !std::isfinite(t.weight))
        throw ConfigError("grammar: template weights must be positive and finite");
      if (t.text.find_first_not_of(" \t") == std::string::npos)
        throw ConfigError("grammar: blank template for " + std::string(act_code(act_at(l))));
      mass += t.weight;
    }
    if (mass <= 0.0)
      throw ConfigError("grammar: label " + std::string(act_code(act_at(l))) + " has no template");
  }
  for (const auto& pool : noise)
    for (const auto& tok : pool)
      if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos)
        throw ConfigError("grammar: noise tokens must be single words");
}

GrammarSpec read_grammar(std::istream& in) {
  GrammarSpec g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string directive;
    if (!(ss >> directive)) continue;
    auto next = [&](const char* what) {
      std::string w;
      if (!(ss >> w)) throw ParseError(lineno, std::string("missing ") + what);
      return w;
    };
    auto label = [&](const std::string& code) {
      auto act = parse_act(code);
      if (!act) throw ParseError(lineno, "unknown label code '" + code + "'");
      return index_of(*act);
    };
    if (directive == "transition") {
      const std::size_t from = label(next("source label"));
      const std::size_t to = label(next("target label"));
      g.transitions[from][to] = parse_probability(next("probability"), lineno);
    } else if (directive == "therapist") {
      const std::size_t l = label(next("label"));
      g.therapist_probability[l] = parse_probability(next("probability"), lineno);
    } else if (directive == "template") {
      const std::size_t l = label(next("label"));
      Template t;
      t.weight = parse_probability(next("weight"), lineno);
      t.tag = next("tag");
      std::string word;
      while (ss >> word) t.text += (t.text.empty() ? "" : " ") + word;
      if (t.text.empty()) throw ParseError(lineno, "template has no text");
      g.templates[l].push_back(std::move(t));
    } else if (directive == "noise") {
      std::string role = next("speaker");
      auto speaker = parse_speaker(role);
      if (!speaker) throw ParseError(lineno, "unknown speaker code '" + role + "'");
      const std::size_t slot = speaker_slot(*speaker);
      std::string tok;
      while (ss >> tok) g.noise[slot].push_back(tok);
    } else if (directive == "recency") {
      RecencyRule r;
      r.trigger = act_at(label(next("trigger label")));
      const std::string w = next("window");
      std::size_t used = 0;
      try {
        r.window = std::stoul(w, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != w.size() || w[0] == '-') throw ParseError(lineno, "bad window '" + w + "'");
      r.if_recent = act_at(label(next("label")));
      r.otherwise = act_at(label(next("label")));
      g.recency.push_back(r);
    } else {
      throw ParseError(lineno, "unknown directive '" + directive + "'");
    }
  }
  g.validate();
  return g;
}

GrammarSpec load_grammar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open grammar file " + path.string());
  try {
    return read_grammar(in);
  } catch (const ParseError& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_grammar(std::ostream& out, const GrammarSpec& g) {
  const auto old = out.precision(17);
  for (std::size_t l = 0; l < kNumActs; ++l)
    out << "therapist " << act_code(act_at(l)) << ' ' << g.therapist_probability[l] << '\n';
  for (std::size_t from = 0; from < kNumActs; ++from)
    for (std::size_t to = 0; to < kNumActs; ++to)
      if (g.transitions[from][to] > 0.0)
        out << "transition " << act_code(act_at(from)) << ' ' << act_code(act_at(to)) << ' '
            << g.transitions[from][to] << '\n';
  for (std::size_t l = 0; l < kNumActs; ++l)
    for (const auto& t : g.templates[l])
      out << "template " << act_code(act_at(l)) << ' ' << t.weight << ' ' << t.tag << ' '
          << t.text << '\n';
  for (const auto& r : g.recency)
    out << "recency " << act_code(r.trigger) << ' ' << r.window << ' ' << act_code(r.if_recent) << ' '
        << act_code(r.otherwise) << '\n';
  for (std::size_t s = 0; s < 2; ++s) {
    if (g.noise[s].empty()) continue;
    out << "noise " << (s == 0 ? 'T' : 'P');
    for (const auto& tok : g.noise[s]) out << ' ' << tok;
    out << '\n';
  }
  out.precision(old);
}

const std::string& default_grammar_text() {
  static const std::string text = R"(
# Default synthetic counselling grammar.
# Shared surface forms: acknowledgements (PA, ACK), clarification questions
# (IRQ, CRQ), event details (ID, CD), small talk openers (GT, GC).

therapist GT 0.5
therapist GC 0.5
therapist IRQ 0.95
therapist CRQ 0.05
therapist YNQ 0.9
therapist ORQ 0.85
therapist ID 0.05
therapist CD 0.95
therapist PA 0.3
therapist NA 0.1
therapist OD 0.25
therapist ACK 0.5

transition GT GT 0.3
transition GT IRQ 0.3
transition GT YNQ 0.2
transition GT GC 0.2
transition GC GC 0.2
transition GC IRQ 0.3
transition GC YNQ 0.2
transition GC ACK 0.2
transition GC GT 0.1
transition IRQ ID 0.6
transition IRQ CRQ 0.2
transition IRQ OD 0.1
transition IRQ ACK 0.1
transition ID ACK 0.3
transition ID IRQ 0.15
transition ID YNQ 0.15
transition ID CRQ 0.2
transition ID OD 0.1
transition ID ID 0.1
transition CRQ CD 0.8
transition CRQ ACK 0.1
transition CRQ ID 0.1
transition CD ACK 0.3
transition CD CRQ 0.2
transition CD IRQ 0.2
transition CD YNQ 0.2
transition CD OD 0.1
transition YNQ PA 0.25
transition YNQ NA 0.3
transition YNQ ID 0.25
transition YNQ OD 0.1
transition YNQ CRQ 0.1
transition PA ID 0.3
transition PA ACK 0.1
transition PA YNQ 0.15
transition PA IRQ 0.2
transition PA OD 0.25
transition NA ID 0.3
transition NA ACK 0.25
transition NA YNQ 0.2
transition NA IRQ 0.15
transition NA OD 0.1
transition ACK IRQ 0.3
transition ACK YNQ 0.2
transition ACK ORQ 0.15
transition ACK OD 0.15
transition ACK GC 0.1
transition ACK ID 0.1
transition OD ACK 0.35
transition OD ORQ 0.15
transition OD IRQ 0.2
transition OD YNQ 0.15
transition OD OD 0.15
transition ORQ OD 0.7
transition ORQ PA 0.1
transition ORQ NA 0.1
transition ORQ ID 0.1

template GT 1 unique hello
template GT 1 unique good morning
template GT 1 unique nice to see you again
template GT 1.5 shared:gt_gc how have you been
template GC 1 unique the weather is nice today
template GC 1 unique did you find parking
template GC 1 unique traffic was bad on the way
template GC 1.5 shared:gt_gc how have you been
template IRQ 1 unique what brings you here today
template IRQ 1 unique when did this start
template IRQ 1 unique tell me about your week
template IRQ 2 shared:irq_crq what do you mean
template IRQ 2 shared:irq_crq can you explain that
template CRQ 3 shared:irq_crq what do you mean
template CRQ 3 shared:irq_crq can you explain that
template CRQ 1 unique sorry could you repeat that
template ID 1 unique i work at the store
template ID 1 unique my sister lives with me
template ID 1 unique i sleep about five hours
template ID 2 shared:id_cd it happened last week
template ID 2 shared:id_cd it was at my office
template ID 1 shared:id_od work has been stressful
template CD 1 unique i meant at home
template CD 1 unique i was asking about your family
template CD 2 shared:id_cd it happened last week
template CD 2 shared:id_cd it was at my office
template YNQ 1 unique do you feel safe at home
template YNQ 1 unique are you taking your medication
template YNQ 1 unique is that still happening
template YNQ 1 unique have you talked to anyone
template NA 1 unique no
template NA 1 unique not really
template NA 1 unique no never
template OD 1 unique i think it is my fault
template OD 2 shared:id_od work has been stressful
template OD 1 unique i feel it is getting better
template OD 1 unique i believe work is the problem
template ORQ 1 unique what do you think about that
template ORQ 1 unique how do you feel about it
template ORQ 1 unique does that sound fair to you


# PA and ACK share every surface form; the recency rule decides.
template PA 2 shared:pa_ack yeah
template PA 2 shared:pa_ack right
template PA 1 shared:pa_ack okay
template PA 1 shared:pa_ack mm hmm
template ACK 2 shared:pa_ack yeah
template ACK 2 shared:pa_ack right
template ACK 1 shared:pa_ack okay
template ACK 1 shared:pa_ack mm hmm

recency YNQ 4 PA ACK

# Speaker marker vocabularies.
noise T bata baven bador bamik basel babur balon bagat bafis bapem deta deven dedor demik desel debur delon degat defis depem fita fiven fidor fimik fisel fibur filon figat fifis fipem kota koven kodor komik kosel kobur kolon kogat kofis kopem luta luven ludor lumik lusel lubur lulon lugat lufis lupem mata maven mador mamik masel mabur malon magat mafis mapem neta neven nedor nemik nesel nebur nelon negat nefis nepem pita piven pidor pimik pisel pibur pilon pigat pifis pipem rota roven rodor romik rosel robur rolon rogat rofis ropem suta suven sudor sumik susel subur sulon sugat sufis supem
noise P zarin zabok zanup zalix zamof zadas zakel zavut zahob zasar xorin xobok xonup xolix xomof xodas xokel xovut xohob xosar yurin yubok yunup yulix yumof yudas yukel yuvut yuhob yusar wirin wibok winup wilix wimof widas wikel wivut wihob wisar qarin qabok qanup qalix qamof qadas qakel qavut qahob qasar hurin hubok hunup hulix humof hudas hukel huvut huhob husar jorin jobok jonup jolix jomof jodas jokel jovut johob josar garin gabok ganup galix gamof gadas gakel gavut gahob gasar turin tubok tunup tulix tumof tudas tukel tuvut tuhob tusar zerin zebok zenup zelix zemof zedas zekel zevut zehob zesar
)";
  return text;
}

const GrammarSpec& default_grammar() {
  static const GrammarSpec g = [] {
    std::istringstream in(default_grammar_text());
    return read_grammar(in);
  }();
  return g;
}

void GeneratorConfig::validate() const {
  if (min_utterances == 0) throw ConfigError("synth: min_utterances must be positive");
  if (min_utterances > max_utterances)
    throw ConfigError("synth: min_utterances exceeds max_utterances");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0))
    throw ConfigError("synth: noise rate must be in [0, 1)");
}

Corpus generate_corpus(const GrammarSpec& g, const GeneratorConfig& config) {
  g.validate();
  config.validate();
  Rng rng(config.seed);
  Corpus corpus;
  corpus.provenance["generator"] = "synth";
  corpus.provenance["seed"] = std::to_string(config.seed);
  std::array<std::vector<double>, kNumActs> weights;
  for (std::size_t l = 0; l < kNumActs; ++l)
    for (const auto& t : g.templates[l]) weights[l].push_back(t.weight);

  const std::size_t width = std::to_string(config.n_dialogues).size();
  for (std::size_t d = 0; d < config.n_dialogues; ++d) {
    Dialogue dialogue;
    std::string num = std::to_string(d);
    dialogue.id = "synth-" + std::string(width - std::min(width, num.size()), '0') + num;
    const std::size_t m =
        config.min_utterances + uniform_index(rng, config.max_utterances - config.min_utterances + 1);
    std::size_t label = index_of(DialogueAct::GT);
    auto since = initial_counters(g);
    for (std::size_t t = 0; t < m; ++t) {
      if (t > 0) label = apply_rules(g, since, sample_categorical(rng, g.transitions[label]));
      advance(g, since, label);
      Utterance u;
      u.index = t;
      u.label = act_at(label);
      u.speaker = uniform01(rng) < g.therapist_probability[label] ? SpeakerRole::Therapist
                                                                  : SpeakerRole::Patient;
      const auto& pool = g.noise[speaker_slot(u.speaker)];
      const Template& tmpl = g.templates[label][sample_categorical(rng, weights[label])];
      std::string text;
      if (!pool.empty() && uniform01(rng) < config.noise_rate)
        text = pool[uniform_index(rng, pool.size())] + " ";
      text += tmpl.text;
      if (!pool.empty() && uniform01(rng) < config.noise_rate)
        text += " " + pool[uniform_index(rng, pool.size())];
      u.text = std::move(text);
      dialogue.utterances.push_back(std::move(u));
    }
    corpus.dialogues.push_back(std::move(dialogue));
  }
  return corpus;
}

std::array<double, kNumActs> stationary_distribution(const GrammarSpec& g) {
  // Lazy chain started at GT: same fixed point, no periodicity issues.
  const LabelProcess proc = build_process(g);
  std::vector<double> p(proc.states.size(), 0.0);
  p[0] = 1.0;
  for (std::size_t iter = 0; iter < 1000000; ++iter) {
    std::vector<double> next(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      next[i] += 0.5 * p[i];
      for (const auto& [j, q] : proc.next[i]) next[j] += 0.5 * p[i] * q;
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) diff = std::max(diff, std::abs(next[i] - p[i]));
    p = std::move(next);
    if (diff < 1e-15) break;
  }
  std::array<double, kNumActs> out{};
  for (std::size_t i = 0; i < p.size(); ++i) out[proc.states[i].label] += p[i];
  return out;
}

double utterance_only_bayes_accuracy(const GrammarSpec& g) {
  g.validate();
  const auto pi = stationary_distribution(g);
  std::map<std::string, std::array<double, kNumActs>> joint;
  for (std::size_t l = 0; l < kNumActs; ++l) {
    double mass = 0.0;
    for (const auto& t : g.templates[l]) mass += t.weight;
    for (const auto& t : g.templates[l]) {
      auto [it, inserted] = joint.try_emplace(t.text);
      it->second[l] += pi[l] * t.weight / mass;
    }
  }
  double acc = 0.0;
  for (const auto& [text, row] : joint) acc += *std::max_element(row.begin(), row.end());
  return acc;
}

}  // namespace sparta
