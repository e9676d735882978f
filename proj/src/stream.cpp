#include "facil/stream.hpp"

#include <istream>
#include <ostream>

#include "facil/error.hpp"

namespace facil {

using nlohmann::json;

const char* to_string(OperatorVerb verb) {
  switch (verb) {
    case OperatorVerb::Confirm: return "confirm";
    case OperatorVerb::Dismiss: return "dismiss";
    case OperatorVerb::Manual: return "manual";
    case OperatorVerb::Direct: return "direct";
    case OperatorVerb::Tickle: return "tickle";
  }
  return "?";
}

namespace {

OperatorVerb parse_operator_verb(std::string_view text) {
  for (auto verb : {OperatorVerb::Confirm, OperatorVerb::Dismiss, OperatorVerb::Manual,
                    OperatorVerb::Direct, OperatorVerb::Tickle}) {
    if (text == to_string(verb)) return verb;
  }
  throw Error(Errc::ParseError, "unknown operator action: " + std::string(text));
}

int require_t(const json& obj) {
  if (!obj.contains("t") || !obj["t"].is_number_integer()) {
    throw Error(Errc::ParseError, "missing integer \"t\"");
  }
  return obj["t"].get<int>();
}

OperatorAction parse_operator(const json& obj) {
  OperatorAction action;
  action.t = require_t(obj);
  action.verb = parse_operator_verb(obj["operator"].get<std::string>());
  action.operator_id = obj.value("by", std::string("operator"));
  action.warning_id = obj.value("warning", std::string());
  action.warning_kind = obj.value("warning_kind", std::string());
  if (obj.contains("targets")) action.targets = parse_targets(obj["targets"]);
  if (obj.contains("facilitation")) {
    action.facilitation = parse_facilitation(obj["facilitation"].get<std::string>());
  }
  if (obj.contains("stand")) action.stand = ParticipantId::parse(obj["stand"].get<std::string>());
  if (obj.contains("verb")) {
    action.command = {{"verb", obj["verb"]}, {"args", obj.value("args", json::object())}};
  }
  action.force = obj.value("force", false);
  if (obj.contains("from")) action.from = ParticipantId::parse(obj["from"].get<std::string>());
  if (obj.contains("to")) action.to = ParticipantId::parse(obj["to"].get<std::string>());
  return action;
}

}  // namespace

std::vector<ParticipantId> parse_targets(const json& array) {
  if (!array.is_array()) throw Error(Errc::ParseError, "targets must be an array");
  std::vector<ParticipantId> out;
  for (const auto& item : array) out.push_back(ParticipantId::parse(item.get<std::string>()));
  return out;
}

json targets_json(const std::vector<ParticipantId>& targets) {
  json out = json::array();
  for (auto id : targets) out.push_back(id.label());
  return out;
}

StreamItem parse_stream_line(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, e.what());
  }
  if (!obj.is_object()) throw Error(Errc::ParseError, "line is not a JSON object");

  try {
    if (obj.contains("participants")) {
      return ParticipantsHeader{obj["participants"].get<std::vector<std::string>>()};
    }
    if (obj.contains("operator")) return parse_operator(obj);
    if (obj.contains("event")) {
      SessionEvent event;
      event.t = require_t(obj);
      event.kind = parse_event_kind(obj["event"].get<std::string>());
      if (event.kind == EventKind::StageMark) {
        event.stage = parse_stage(obj.at("stage").get<std::string>());
      }
      event.text = obj.value("text", std::string());
      return event;
    }
    if (obj.contains("speaker")) {
      DiarizationFrame frame;
      frame.t = require_t(obj);
      const auto& speaker = obj["speaker"];
      if (!speaker.is_null()) frame.speaker = ParticipantId::parse(speaker.get<std::string>());
      return frame;
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  throw Error(Errc::ParseError, "unrecognised stream object: " + std::string(line));
}

std::vector<StreamItem> read_stream(std::istream& in) {
  std::vector<StreamItem> items;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      items.push_back(parse_stream_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

json to_json(const DiarizationFrame& frame) {
  json obj = {{"t", frame.t}};
  obj["speaker"] = frame.speaker ? json(frame.speaker->label()) : json(nullptr);
  return obj;
}

json to_json(const SessionEvent& event) {
  json obj = {{"t", event.t}, {"event", to_string(event.kind)}};
  if (event.kind == EventKind::StageMark) obj["stage"] = to_string(event.stage);
  if (!event.text.empty()) obj["text"] = event.text;
  return obj;
}

json to_json(const OperatorAction& action) {
  json obj = {{"t", action.t}, {"operator", to_string(action.verb)}, {"by", action.operator_id}};
  if (!action.warning_id.empty()) obj["warning"] = action.warning_id;
  if (!action.warning_kind.empty()) obj["warning_kind"] = action.warning_kind;
  if (action.targets) obj["targets"] = targets_json(*action.targets);
  if (action.facilitation) obj["facilitation"] = to_string(*action.facilitation);
  if (action.stand) obj["stand"] = action.stand->label();
  if (action.command.is_object()) {
    obj["verb"] = action.command.value("verb", json());
    obj["args"] = action.command.value("args", json::object());
  }
  if (action.force) obj["force"] = true;
  if (action.from) obj["from"] = action.from->label();
  if (action.to) obj["to"] = action.to->label();
  return obj;
}

json to_json(const ParticipantsHeader& header) { return {{"participants", header.labels}}; }

json to_json(const StreamItem& item) {
  return std::visit([](const auto& v) { return to_json(v); }, item);
}

void write_stream(std::ostream& out, const std::vector<StreamItem>& items) {
  for (const auto& item : items) out << to_json(item).dump() << '\n';
}

}  // namespace facil
