#include "sparta/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "sparta/error.hpp"

namespace sparta {
namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

SpeakerRole speaker_or_throw(const std::string& code, std::size_t line) {
  auto r = parse_speaker(code);
  if (!r) throw ParseError(line, "unknown speaker code '" + code + "'");
  return *r;
}

std::optional<DialogueAct> label_or_throw(const std::string& code, std::size_t line) {
  if (code.empty()) return std::nullopt;
  auto a = parse_act(code);
  if (!a) throw ParseError(line, "unknown label '" + code + "'");
  return a;
}

Corpus read_jsonl(std::istream& in) {
  using nlohmann::json;
  Corpus corpus;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object() || !record.contains("id") || !record["id"].is_string() ||
        !record.contains("utterances") || !record["utterances"].is_array())
      throw ParseError(lineno, "record needs string 'id' and array 'utterances'");
    Dialogue d;
    d.id = record["id"].get<std::string>();
    if (!seen.insert(d.id).second) throw ParseError(lineno, "duplicate dialogue id '" + d.id + "'");
    const auto& utts = record["utterances"];
    if (utts.empty()) throw ParseError(lineno, "empty dialogue '" + d.id + "'");
    for (const auto& u : utts) {
      if (!u.is_object() || !u.contains("speaker") || !u["speaker"].is_string() ||
          !u.contains("text") || !u["text"].is_string())
        throw ParseError(lineno, "utterance needs string 'speaker' and 'text'");
      Utterance utt;
      utt.speaker = speaker_or_throw(u["speaker"].get<std::string>(), lineno);
      utt.text = u["text"].get<std::string>();
      if (is_blank(utt.text)) throw ParseError(lineno, "blank utterance text");
      if (u.contains("label") && !u["label"].is_null()) {
        if (!u["label"].is_string()) throw ParseError(lineno, "label must be a string");
        utt.label = label_or_throw(u["label"].get<std::string>(), lineno);
      }
      utt.index = d.utterances.size();
      d.utterances.push_back(std::move(utt));
    }
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

// RFC 4180 style records; quoted fields may contain commas, quotes ("") and
// newlines. Returns false at end of input. `line` is the line of the record start.
bool next_csv_record(std::istream& in, std::vector<std::string>& fields,
                     std::size_t& lineno, std::size_t& record_line) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  ++lineno;
  record_line = lineno;
  std::string field;
  bool quoted = false;
  bool in_quotes = false;
  for (;; c = in.get()) {
    if (c == EOF) {
      if (in_quotes) throw ParseError(record_line, "unterminated quoted field");
      fields.push_back(std::move(field));
      return true;
    }
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++lineno;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      if (!field.empty() || quoted) throw ParseError(lineno, "stray quote in field");
      in_quotes = quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      quoted = false;
    } else if (ch == '\r') {
      continue;
    } else if (ch == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else {
      if (quoted) throw ParseError(lineno, "characters after closing quote");
      field.push_back(ch);
    }
  }
}

Corpus read_csv(std::istream& in) {
  static const std::vector<std::string> kHeader = {"dialogue_id", "turn_index", "speaker",
                                                   "label", "text"};
  std::vector<std::string> fields;
  std::size_t lineno = 0, record_line = 0;
  if (!next_csv_record(in, fields, lineno, record_line)) throw ParseError(1, "missing header");
  for (auto& f : fields) {
    auto b = f.find_first_not_of(" \t");
    auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? "" : f.substr(b, e - b + 1);
  }
  if (fields != kHeader)
    throw ParseError(record_line, "header must be dialogue_id,turn_index,speaker,label,text");

  Corpus corpus;
  std::set<std::string> seen;
  while (next_csv_record(in, fields, lineno, record_line)) {
    if (fields.size() == 1 && is_blank(fields[0])) continue;
    if (fields.size() != 5)
      throw ParseError(record_line, "expected 5 fields, got " + std::to_string(fields.size()));
    const std::string& id = fields[0];
    if (corpus.dialogues.empty() || corpus.dialogues.back().id != id) {
      if (!seen.insert(id).second)
        throw ParseError(record_line, "duplicate dialogue id '" + id + "'");
      corpus.dialogues.push_back(Dialogue{id, {}});
    }
    Dialogue& d = corpus.dialogues.back();
    std::size_t turn = 0;
    try {
      std::size_t pos = 0;
      turn = std::stoul(fields[1], &pos);
      if (pos != fields[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(record_line, "bad turn_index '" + fields[1] + "'");
    }
    if (turn != d.utterances.size())
      throw ParseError(record_line, "turn_index " + std::to_string(turn) + " out of order, expected " +
                                        std::to_string(d.utterances.size()));
    Utterance u;
    u.speaker = speaker_or_throw(fields[2], record_line);
    u.label = label_or_throw(fields[3], record_line);
    u.text = fields[4];
    if (is_blank(u.text)) throw ParseError(record_line, "blank utterance text");
    u.index = turn;
    d.utterances.push_back(std::move(u));
  }
  return corpus;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::size_t Corpus::num_utterances() const {
  std::size_t n = 0;
  for (const auto& d : dialogues) n += d.size();
  return n;
}

CorpusFormat parse_format(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "csv") return CorpusFormat::Csv;
  throw ConfigError("unknown corpus format '" + name + "' (expected jsonl or csv)");
}

CorpusFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? CorpusFormat::Csv : CorpusFormat::Jsonl;
}

void validate(const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& d : corpus.dialogues) {
    if (!ids.insert(d.id).second) throw Error("duplicate dialogue id '" + d.id + "'");
    if (d.utterances.empty()) throw Error("empty dialogue '" + d.id + "'");
    for (std::size_t t = 0; t < d.size(); ++t) {
      if (d.utterances[t].index != t)
        throw Error("dialogue '" + d.id + "': utterance index mismatch at position " +
                    std::to_string(t));
      if (is_blank(d.utterances[t].text))
        throw Error("dialogue '" + d.id + "': blank text at position " + std::to_string(t));
    }
  }
}

Corpus read_corpus(std::istream& in, CorpusFormat format) {
  Corpus c = format == CorpusFormat::Jsonl ? read_jsonl(in) : read_csv(in);
  validate(c);
  return c;
}

Corpus parse_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file '" + path.string() + "'");
  Corpus c = read_corpus(in, format);
  c.provenance["source"] = path.string();
  return c;
}

Corpus parse_corpus(const std::filesystem::path& path) {
  return parse_corpus(path, format_for_path(path));
}

void write_corpus(std::ostream& out, const Corpus& corpus, CorpusFormat format) {
  if (format == CorpusFormat::Jsonl) {
    for (const auto& d : corpus.dialogues) {
      nlohmann::ordered_json rec;
      rec["id"] = d.id;
      rec["utterances"] = nlohmann::ordered_json::array();
      for (const auto& u : d.utterances) {
        nlohmann::ordered_json ju;
        ju["speaker"] = std::string(speaker_code(u.speaker));
        ju["text"] = u.text;
        if (u.label) ju["label"] = std::string(act_code(*u.label));
        rec["utterances"].push_back(std::move(ju));
      }
      out << rec.dump() << '\n';
    }
    return;
  }
  out << "dialogue_id,turn_index,speaker,label,text\n";
  for (const auto& d : corpus.dialogues)
    for (const auto& u : d.utterances)
      out << csv_field(d.id) << ',' << u.index << ',' << speaker_code(u.speaker) << ','
          << (u.label ? act_code(*u.label) : "") << ',' << csv_field(u.text) << '\n';
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus, CorpusFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file '" + path.string() + "'");
  write_corpus(out, corpus, format);
}

std::size_t word_count(const std::string& text) {
  std::istringstream ss(text);
  std::size_t n = 0;
  std::string w;
  while (ss >> w) ++n;
  return n;
}

}  // namespace sparta
