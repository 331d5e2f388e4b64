#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "sparta/corpus.hpp"
#include "sparta/rng.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(SPARTA_TEST_DATA) / name;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sparta-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline sparta::Utterance utt(sparta::SpeakerRole s, std::string text, sparta::DialogueAct label,
                             std::size_t index) {
  sparta::Utterance u;
  u.speaker = s;
  u.text = std::move(text);
  u.label = label;
  u.index = index;
  return u;
}

/// Random labelled corpus with short lowercase texts.
inline sparta::Corpus random_corpus(sparta::Rng& rng, std::size_t dialogues, std::size_t max_len) {
  static const char* words[] = {"yes", "no", "maybe", "home", "work", "sleep", "why", "tell", "me", "about"};
  sparta::Corpus c;
  for (std::size_t d = 0; d < dialogues; ++d) {
    sparta::Dialogue dlg;
    dlg.id = "d" + std::to_string(d);
    const std::size_t m = 1 + sparta::uniform_index(rng, max_len);
    for (std::size_t t = 0; t < m; ++t) {
      std::string text;
      const std::size_t n = 1 + sparta::uniform_index(rng, 4);
      for (std::size_t w = 0; w < n; ++w) text += (w ? " " : "") + std::string(words[sparta::uniform_index(rng, 10)]);
      const auto speaker = sparta::uniform_index(rng, 2) ? sparta::SpeakerRole::Patient
                                                         : sparta::SpeakerRole::Therapist;
      dlg.utterances.push_back(utt(speaker, text, sparta::act_at(sparta::uniform_index(rng, sparta::kNumActs)), t));
    }
    c.dialogues.push_back(std::move(dlg));
  }
  return c;
}

inline std::vector<sparta::DialogueAct> labels_of(const sparta::Dialogue& d) {
  std::vector<sparta::DialogueAct> out;
  for (const auto& u : d.utterances) out.push_back(*u.label);
  return out;
}

}  // namespace testing
