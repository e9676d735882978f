#include "facil/session.hpp"

#include <algorithm>
#include <set>

#include "facil/error.hpp"

namespace facil {

SpeechActivityMatrix::SpeechActivityMatrix(std::span<const Speaker> speakers) {
  cells_.reserve(speakers.size());
  for (const auto& s : speakers) append(s);
}

Speaker SpeechActivityMatrix::speaker_at(int t) const {
  const auto cell = cells_.at(static_cast<std::size_t>(t));
  if (cell < 0) return std::nullopt;
  return ParticipantId::from_slot(cell);
}

std::array<int, kGroupSize> SpeechActivityMatrix::row(int t) const {
  std::array<int, kGroupSize> out{};
  const auto cell = cells_.at(static_cast<std::size_t>(t));
  if (cell >= 0) out[static_cast<std::size_t>(cell)] = 1;
  return out;
}

std::vector<Speaker> SpeechActivityMatrix::slice(int begin, int end) const {
  begin = std::max(begin, 0);
  end = std::min(end, rows());
  std::vector<Speaker> out;
  if (end <= begin) return out;
  out.reserve(static_cast<std::size_t>(end - begin));
  for (int t = begin; t < end; ++t) out.push_back(speaker_at(t));
  return out;
}

void SpeechActivityMatrix::append(Speaker speaker) {
  cells_.push_back(speaker ? static_cast<std::int8_t>(speaker->slot()) : std::int8_t{-1});
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::SessionStart: return "session_start";
    case EventKind::StageMark: return "stage_mark";
    case EventKind::CountdownAlert: return "countdown_alert";
    case EventKind::SessionEnd: return "session_end";
    case EventKind::OperatorNote: return "operator_note";
    case EventKind::TaskComplete: return "task_complete";
    case EventKind::Milestone: return "milestone";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view text) {
  for (auto kind : {EventKind::SessionStart, EventKind::StageMark, EventKind::CountdownAlert,
                    EventKind::SessionEnd, EventKind::OperatorNote, EventKind::TaskComplete,
                    EventKind::Milestone}) {
    if (text == to_string(kind)) return kind;
  }
  throw Error(Errc::ParseError, "unknown event: " + std::string(text));
}

Session Session::register_session(const std::vector<std::string>& labels) {
  if (labels.size() != kGroupSize) {
    throw Error(Errc::WrongGroupSize, "expected 4 participants, got " + std::to_string(labels.size()));
  }
  std::set<std::string> seen;
  for (const auto& label : labels) {
    if (!seen.insert(label).second) throw Error(Errc::DuplicateLabel, label);
  }
  Session session;
  std::copy(labels.begin(), labels.end(), session.labels_.begin());
  return session;
}

AppendAck Session::push_frame(const DiarizationFrame& frame) {
  if (state_ == SessionState::Ended) throw Error(Errc::SessionEnded, "frame after session end");
  if (frame.t <= clock_) {
    throw Error(Errc::OutOfOrderFrame,
                "t=" + std::to_string(frame.t) + " after t=" + std::to_string(clock_));
  }
  if (frame.t > clock_ + 1) {
    throw Error(Errc::GapDetected,
                "t=" + std::to_string(frame.t) + " after t=" + std::to_string(clock_));
  }
  matrix_.append(frame.speaker);
  clock_ = frame.t;
  state_ = SessionState::Running;
  return {frame.t, matrix_.rows(), next_seq_++};
}

AppendAck Session::push_event(const SessionEvent& event) {
  if (state_ == SessionState::Ended) throw Error(Errc::SessionEnded, "event after session end");
  if (event.t > clock_ + 1) {
    throw Error(Errc::EventInFuture, "event t=" + std::to_string(event.t) +
                                         " beyond clock " + std::to_string(clock_));
  }
  if (!timeline_.empty() && event.t < timeline_.back().event.t) {
    throw Error(Errc::OutOfOrderEvent, "event t=" + std::to_string(event.t));
  }
  switch (event.kind) {
    case EventKind::StageMark:
      if (stage_ && event.stage <= *stage_) {
        throw Error(Errc::StageOrderViolation,
                    std::string(to_string(event.stage)) + " after " + to_string(*stage_));
      }
      stage_ = event.stage;
      stage_started_at_ = event.t;
      break;
    case EventKind::CountdownAlert:
      if (countdown_seen_) throw Error(Errc::DuplicateCountdownAlert, "t=" + std::to_string(event.t));
      countdown_seen_ = true;
      break;
    case EventKind::SessionStart:
      state_ = SessionState::Running;
      break;
    case EventKind::SessionEnd:
      state_ = SessionState::Ended;
      break;
    default:
      break;
  }
  const auto seq = next_seq_++;
  timeline_.push_back({seq, event});
  return {event.t, matrix_.rows(), seq};
}

}  // namespace facil
