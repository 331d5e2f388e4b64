#include "sparta/labels.hpp"

namespace sparta {
namespace {

struct ActInfo {
  std::string_view code;
  std::string_view name;
  ActCategory category;
};

constexpr std::array<ActInfo, kNumActs> kActInfo = {{
    {"ID", "Information Delivery", ActCategory::SpeakerResponsive},
    {"IRQ", "Information Request", ActCategory::SpeakerInitiative},
    {"GT", "Greeting", ActCategory::General},
    {"GC", "General Chit-Chat", ActCategory::General},
    {"CRQ", "Clarification Request", ActCategory::SpeakerInitiative},
    {"YNQ", "Yes/No Question", ActCategory::SpeakerInitiative},
    {"CD", "Clarification Delivery", ActCategory::SpeakerResponsive},
    {"ACK", "Acknowledgment", ActCategory::General},
    {"PA", "Positive Answer", ActCategory::SpeakerResponsive},
    {"NA", "Negative Answer", ActCategory::SpeakerResponsive},
    {"OD", "Opinion Delivery", ActCategory::SpeakerResponsive},
    {"ORQ", "Opinion Request", ActCategory::SpeakerInitiative},
}};

}  // namespace

std::string_view act_code(DialogueAct a) { return kActInfo[index_of(a)].code; }
std::string_view act_name(DialogueAct a) { return kActInfo[index_of(a)].name; }
ActCategory category_of(DialogueAct a) { return kActInfo[index_of(a)].category; }

std::optional<DialogueAct> parse_act(std::string_view code) {
  for (std::size_t i = 0; i < kNumActs; ++i)
    if (kActInfo[i].code == code) return act_at(i);
  return std::nullopt;
}

std::string_view category_name(ActCategory c) {
  switch (c) {
    case ActCategory::SpeakerInitiative: return "speaker_initiative";
    case ActCategory::SpeakerResponsive: return "speaker_responsive";
    case ActCategory::General: return "general";
  }
  return "";
}

std::string_view speaker_code(SpeakerRole r) {
  return r == SpeakerRole::Therapist ? "T" : "P";
}

std::optional<SpeakerRole> parse_speaker(std::string_view code) {
  if (code == "T") return SpeakerRole::Therapist;
  if (code == "P") return SpeakerRole::Patient;
  return std::nullopt;
}

}  // namespace sparta
