#include "facil/wire.hpp"

#include <cstdio>

#include <zlib.h>

#include "facil/error.hpp"

namespace facil {

const char* to_string(AckStatus status) {
  switch (status) {
    case AckStatus::Ok: return "ok";
    case AckStatus::Obstructed: return "obstructed";
    case AckStatus::Error: return "error";
  }
  return "error";
}

std::string canonical_json(const nlohmann::json& j) { return j.dump(); }

std::string crc32_hex(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc & 0xffffffffUL));
  return buf;
}

namespace {

nlohmann::json command_body(const CommandFrame& f) {
  return {{"seq", f.seq}, {"stand", f.stand.label()}, {"verb", verb_name(f.verb)}, {"args", verb_args(f.verb)}};
}

nlohmann::json parse_line(std::string_view line, const char* what) {
  auto j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::ParseError, std::string(what) + ": not a JSON object");
  return j;
}

}  // namespace

std::string encode_command(const CommandFrame& frame) {
  auto body = command_body(frame);
  body["crc32"] = crc32_hex(canonical_json(body));
  return canonical_json(body);
}

CommandFrame decode_command(std::string_view line) {
  auto j = parse_line(line, "command frame");
  if (!j.contains("crc32") || !j["crc32"].is_string()) throw Error(Errc::ParseError, "command frame: missing crc32");
  const std::string crc = j["crc32"].get<std::string>();
  j.erase("crc32");
  if (crc32_hex(canonical_json(j)) != crc) throw Error(Errc::ChecksumMismatch, "command frame: crc32 mismatch");
  try {
    CommandFrame f;
    f.seq = j.at("seq").get<std::uint64_t>();
    f.stand = ParticipantId::parse(j.at("stand").get<std::string>());
    f.verb = parse_verb(j.at("verb").get<std::string>(), j.value("args", nlohmann::json::object()));
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("command frame: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::ParseError, std::string("command frame: ") + e.what());
  }
}

std::string encode_ack(const AckFrame& ack) {
  nlohmann::json j{{"seq", ack.seq},
                   {"status", to_string(ack.status)},
                   {"pose", {ack.pose.x_mm, ack.pose.y_mm, ack.pose.heading_deg}}};
  return canonical_json(j);
}

AckFrame decode_ack(std::string_view line) {
  const auto j = parse_line(line, "ack frame");
  try {
    AckFrame a;
    a.seq = j.at("seq").get<std::uint64_t>();
    const auto status = j.at("status").get<std::string>();
    if (status == "ok") {
      a.status = AckStatus::Ok;
    } else if (status == "obstructed") {
      a.status = AckStatus::Obstructed;
    } else if (status == "error") {
      a.status = AckStatus::Error;
    } else {
      throw Error(Errc::ParseError, "ack frame: unknown status " + status);
    }
    const auto& pose = j.at("pose");
    if (!pose.is_array() || pose.size() != 3) throw Error(Errc::ParseError, "ack frame: pose must be [x,y,deg]");
    a.pose = {pose[0].get<double>(), pose[1].get<double>(), pose[2].get<double>()};
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("ack frame: ") + e.what());
  }
}

}  // namespace facil
