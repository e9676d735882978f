#pragma once

// Newline-delimited JSON session streams. One object per line:
//   {"t": 12, "speaker": "P2"}                      frame (speaker null = silence)
//   {"t": 0, "event": "stage_mark", "stage": "forming"}
//   {"t": 40, "event": "operator_note", "text": "..."}
//   {"t": 95, "operator": "confirm", "warning": "w0003"}
//   {"participants": ["A", "B", "C", "D"]}          optional header
// The same objects are accepted by the live ingest socket.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "facil/session.hpp"
#include "facil/types.hpp"

namespace facil {

enum class OperatorVerb { Confirm, Dismiss, Manual, Direct, Tickle };

const char* to_string(OperatorVerb verb);

/// An operator decision, either journaled live or scripted for replay.
struct OperatorAction {
  int t = 0;
  OperatorVerb verb = OperatorVerb::Confirm;
  std::string operator_id = "operator";
  std::string warning_id;                   // confirm / dismiss by id
  std::string warning_kind;                 // scripts: oldest open warning of this kind
  std::optional<std::vector<ParticipantId>> targets;
  std::optional<FacilitationType> facilitation;  // manual
  std::optional<ParticipantId> stand;            // direct
  nlohmann::json command;                        // direct: {"verb": ..., "args": {...}}
  bool force = false;
  std::optional<ParticipantId> from, to;         // tickle
};

struct ParticipantsHeader {
  std::vector<std::string> labels;
};

using StreamItem = std::variant<DiarizationFrame, SessionEvent, OperatorAction, ParticipantsHeader>;

StreamItem parse_stream_line(std::string_view line);
/// Reads every non-blank line; errors carry the 1-based line number.
std::vector<StreamItem> read_stream(std::istream& in);

nlohmann::json to_json(const DiarizationFrame& frame);
nlohmann::json to_json(const SessionEvent& event);
nlohmann::json to_json(const OperatorAction& action);
nlohmann::json to_json(const ParticipantsHeader& header);
nlohmann::json to_json(const StreamItem& item);

std::vector<ParticipantId> parse_targets(const nlohmann::json& array);
nlohmann::json targets_json(const std::vector<ParticipantId>& targets);

void write_stream(std::ostream& out, const std::vector<StreamItem>& items);

}  // namespace facil
