#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace facil {

/// Discussion group size. The speech-activity matrix has one column per member.
inline constexpr int kGroupSize = 4;

/// One of the four seated participants, labelled P1..P4 in seating order.
class ParticipantId {
 public:
  constexpr ParticipantId() = default;

  /// 1-based index, throws InvalidArgument outside [1, 4].
  static ParticipantId from_index(int index);
  /// 0-based column in the activity matrix.
  static ParticipantId from_slot(int slot) { return from_index(slot + 1); }
  /// Parses "P1".."P4".
  static ParticipantId parse(std::string_view label);

  constexpr int index() const { return index_; }
  constexpr int slot() const { return index_ - 1; }
  std::string label() const { return "P" + std::to_string(index_); }

  friend constexpr auto operator<=>(ParticipantId, ParticipantId) = default;

 private:
  constexpr explicit ParticipantId(int index) : index_(index) {}
  int index_ = 1;
};

/// All four ids in seating order.
std::array<ParticipantId, kGroupSize> all_participants();

/// Primary speaker of one second; nullopt is silence.
using Speaker = std::optional<ParticipantId>;

enum class Stage { Forming, Storming, NormingPerforming, Adjourning };

const char* to_string(Stage stage);
Stage parse_stage(std::string_view text);

enum class FacilitationType {
  Icebreaking,
  SpeechControl,
  LeaderElection,
  ConflictSolving,
  ConnectionTickle,
  SilenceBreaking,
  ParticipationBalanceBasic,
  ParticipationBalanceStrengthened,
  Farewell,
};

inline constexpr std::array<FacilitationType, 9> kAllFacilitations = {
    FacilitationType::Icebreaking,
    FacilitationType::SpeechControl,
    FacilitationType::LeaderElection,
    FacilitationType::ConflictSolving,
    FacilitationType::ConnectionTickle,
    FacilitationType::SilenceBreaking,
    FacilitationType::ParticipationBalanceBasic,
    FacilitationType::ParticipationBalanceStrengthened,
    FacilitationType::Farewell,
};

/// snake_case wire names, e.g. "silence_breaking".
const char* to_string(FacilitationType type);
FacilitationType parse_facilitation(std::string_view text);

/// Per-participant speaking seconds.
using SpeakingTimes = std::array<int, kGroupSize>;

/// Directed transition counts; entry [a][b] counts turns a -> b.
using TurnMatrix = std::array<std::array<int, kGroupSize>, kGroupSize>;

}  // namespace facil
