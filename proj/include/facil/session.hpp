#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facil/types.hpp"

namespace facil {

/// One second of session time and its primary speaker.
struct DiarizationFrame {
  int t = 0;
  Speaker speaker;

  friend bool operator==(const DiarizationFrame&, const DiarizationFrame&) = default;
};

/// Growing n x 4 speech-activity matrix. Each row is one-hot or all-zero by
/// construction: a row stores the speaking column, or -1 for silence.
class SpeechActivityMatrix {
 public:
  SpeechActivityMatrix() = default;
  explicit SpeechActivityMatrix(std::span<const Speaker> speakers);

  int rows() const { return static_cast<int>(cells_.size()); }
  bool empty() const { return cells_.empty(); }

  Speaker speaker_at(int t) const;
  bool silent_at(int t) const { return cells_.at(static_cast<std::size_t>(t)) < 0; }
  /// One-hot row for second t.
  std::array<int, kGroupSize> row(int t) const;
  /// Speakers for rows [begin, end).
  std::vector<Speaker> slice(int begin, int end) const;

  void append(Speaker speaker);

  friend bool operator==(const SpeechActivityMatrix&, const SpeechActivityMatrix&) = default;

 private:
  std::vector<std::int8_t> cells_;
};

enum class EventKind {
  SessionStart,
  StageMark,
  CountdownAlert,
  SessionEnd,
  OperatorNote,
  TaskComplete,
  Milestone,
};

const char* to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct SessionEvent {
  int t = 0;
  EventKind kind = EventKind::OperatorNote;
  Stage stage = Stage::Forming;  // meaningful for StageMark only
  std::string text;              // OperatorNote / Milestone

  static SessionEvent stage_mark(int t, Stage stage) { return {t, EventKind::StageMark, stage, {}}; }
  static SessionEvent of(int t, EventKind kind, std::string text = {}) {
    return {t, kind, Stage::Forming, std::move(text)};
  }

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

enum class SessionState { NotStarted, Running, Ended };

struct AppendAck {
  int t = 0;
  int rows = 0;
  std::uint64_t seq = 0;  // arrival order across frames and events
};

struct TimelineEntry {
  std::uint64_t seq = 0;
  SessionEvent event;
};

/// Authoritative per-session state: the activity matrix, the session clock and
/// the ordered event timeline. One writer; readers take snapshots.
class Session {
 public:
  /// Exactly four distinct labels, in seating order (label i is P(i+1)).
  static Session register_session(const std::vector<std::string>& labels);

  const std::array<std::string, kGroupSize>& labels() const { return labels_; }

  AppendAck push_frame(const DiarizationFrame& frame);
  AppendAck push_event(const SessionEvent& event);

  /// Latest accepted frame time, -1 before the first frame.
  int clock() const { return clock_; }
  SessionState state() const { return state_; }
  std::optional<Stage> stage() const { return stage_; }
  std::optional<int> stage_started_at() const { return stage_started_at_; }
  bool countdown_seen() const { return countdown_seen_; }

  const SpeechActivityMatrix& matrix() const { return matrix_; }
  SpeechActivityMatrix snapshot() const { return matrix_; }
  const std::vector<TimelineEntry>& timeline() const { return timeline_; }

 private:
  Session() = default;

  std::array<std::string, kGroupSize> labels_;
  SpeechActivityMatrix matrix_;
  std::vector<TimelineEntry> timeline_;
  int clock_ = -1;
  SessionState state_ = SessionState::NotStarted;
  std::optional<Stage> stage_;
  std::optional<int> stage_started_at_;
  bool countdown_seen_ = false;
  std::uint64_t next_seq_ = 0;
};

}  // namespace facil
