#pragma once

// Newline-delimited JSON protocol between the gateway and a stand.
//
//   command: {"args":{...},"crc32":"1a2b3c4d","seq":7,"stand":"P2","verb":"move_forward"}
//   ack:     {"pose":[x,y,deg],"seq":7,"status":"ok"}
//
// The checksum is the IEEE CRC-32 of the canonical form of the frame without
// the crc32 member: keys sorted, no whitespace, as 8 lowercase hex digits.

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "facil/motion.hpp"
#include "facil/types.hpp"

namespace facil {

struct CommandFrame {
  std::uint64_t seq = 0;
  ParticipantId stand;
  Verb verb;

  friend bool operator==(const CommandFrame&, const CommandFrame&) = default;
};

enum class AckStatus { Ok, Obstructed, Error };

const char* to_string(AckStatus status);

struct AckFrame {
  std::uint64_t seq = 0;
  AckStatus status = AckStatus::Ok;
  Pose pose;
};

std::string canonical_json(const nlohmann::json& j);
std::string crc32_hex(std::string_view bytes);

/// Single line without the trailing newline.
std::string encode_command(const CommandFrame& frame);
/// Throws ParseError on malformed input, ChecksumMismatch on a bad crc32.
CommandFrame decode_command(std::string_view line);

std::string encode_ack(const AckFrame& ack);
AckFrame decode_ack(std::string_view line);

}  // namespace facil
