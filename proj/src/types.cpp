#include "facil/types.hpp"

#include "facil/error.hpp"

namespace facil {

ParticipantId ParticipantId::from_index(int index) {
  if (index < 1 || index > kGroupSize) {
    throw Error(Errc::InvalidArgument, "participant index out of range: " + std::to_string(index));
  }
  return ParticipantId(index);
}

ParticipantId ParticipantId::parse(std::string_view label) {
  if (label.size() == 2 && label[0] == 'P' && label[1] >= '1' && label[1] <= '0' + kGroupSize) {
    return ParticipantId(label[1] - '0');
  }
  throw Error(Errc::ParseError, "bad participant label: " + std::string(label));
}

std::array<ParticipantId, kGroupSize> all_participants() {
  std::array<ParticipantId, kGroupSize> ids;
  for (int i = 0; i < kGroupSize; ++i) ids[i] = ParticipantId::from_slot(i);
  return ids;
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Forming: return "forming";
    case Stage::Storming: return "storming";
    case Stage::NormingPerforming: return "norming_performing";
    case Stage::Adjourning: return "adjourning";
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  if (text == "forming") return Stage::Forming;
  if (text == "storming") return Stage::Storming;
  if (text == "norming_performing") return Stage::NormingPerforming;
  if (text == "adjourning") return Stage::Adjourning;
  throw Error(Errc::ParseError, "unknown stage: " + std::string(text));
}

const char* to_string(FacilitationType type) {
  switch (type) {
    case FacilitationType::Icebreaking: return "icebreaking";
    case FacilitationType::SpeechControl: return "speech_control";
    case FacilitationType::LeaderElection: return "leader_election";
    case FacilitationType::ConflictSolving: return "conflict_solving";
    case FacilitationType::ConnectionTickle: return "connection_tickle";
    case FacilitationType::SilenceBreaking: return "silence_breaking";
    case FacilitationType::ParticipationBalanceBasic: return "participation_balance_basic";
    case FacilitationType::ParticipationBalanceStrengthened: return "participation_balance_strengthened";
    case FacilitationType::Farewell: return "farewell";
  }
  return "?";
}

FacilitationType parse_facilitation(std::string_view text) {
  for (auto type : kAllFacilitations) {
    if (text == to_string(type)) return type;
  }
  throw Error(Errc::ParseError, "unknown facilitation: " + std::string(text));
}

const char* to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
    case Errc::DuplicateLabel: return "DuplicateLabel";
    case Errc::WrongGroupSize: return "WrongGroupSize";
    case Errc::OutOfOrderFrame: return "OutOfOrderFrame";
    case Errc::GapDetected: return "GapDetected";
    case Errc::OutOfOrderEvent: return "OutOfOrderEvent";
    case Errc::EventInFuture: return "EventInFuture";
    case Errc::StageOrderViolation: return "StageOrderViolation";
    case Errc::DuplicateCountdownAlert: return "DuplicateCountdownAlert";
    case Errc::SessionEnded: return "SessionEnded";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::NegativeDuration: return "NegativeDuration";
    case Errc::NonzeroDiagonal: return "NonzeroDiagonal";
    case Errc::OutOfOrderTick: return "OutOfOrderTick";
    case Errc::UnknownWarning: return "UnknownWarning";
    case Errc::AlreadyTerminal: return "AlreadyTerminal";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::StandBusy: return "StandBusy";
    case Errc::LinkLost: return "LinkLost";
    case Errc::Obstructed: return "Obstructed";
    case Errc::SelfTickle: return "SelfTickle";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::OperatorSessionActive: return "OperatorSessionActive";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::MissingStageMark: return "MissingStageMark";
    case Errc::MissingCountdownAlert: return "MissingCountdownAlert";
    case Errc::EmptySegment: return "EmptySegment";
    case Errc::IncompleteRatings: return "IncompleteRatings";
    case Errc::BadAllocation: return "BadAllocation";
  }
  return "?";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace facil
