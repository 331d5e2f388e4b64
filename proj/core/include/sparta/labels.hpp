#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace sparta {

enum class SpeakerRole { Therapist, Patient };

/// The twelve counselling dialogue acts. The enumeration order is the
/// canonical column order of distribution tables and the argmax tie-break.
enum class DialogueAct : std::size_t {
  ID = 0,
  IRQ,
  GT,
  GC,
  CRQ,
  YNQ,
  CD,
  ACK,
  PA,
  NA,
  OD,
  ORQ,
};

enum class ActCategory { SpeakerInitiative, SpeakerResponsive, General };

inline constexpr std::size_t kNumActs = 12;

inline constexpr std::array<DialogueAct, kNumActs> kAllActs = {
    DialogueAct::ID,  DialogueAct::IRQ, DialogueAct::GT, DialogueAct::GC,
    DialogueAct::CRQ, DialogueAct::YNQ, DialogueAct::CD, DialogueAct::ACK,
    DialogueAct::PA,  DialogueAct::NA,  DialogueAct::OD, DialogueAct::ORQ,
};

constexpr std::size_t index_of(DialogueAct a) { return static_cast<std::size_t>(a); }
constexpr DialogueAct act_at(std::size_t i) { return static_cast<DialogueAct>(i); }

std::string_view act_code(DialogueAct a);
std::string_view act_name(DialogueAct a);
std::optional<DialogueAct> parse_act(std::string_view code);
ActCategory category_of(DialogueAct a);
std::string_view category_name(ActCategory c);

/// "T" / "P".
std::string_view speaker_code(SpeakerRole r);
std::optional<SpeakerRole> parse_speaker(std::string_view code);

}  // namespace sparta
