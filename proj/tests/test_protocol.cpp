#include <doctest.h>

#include "facil/error.hpp"
#include "facil/stand.hpp"
#include "facil/wire.hpp"
#include "support.hpp"

using namespace facil;
using nlohmann::json;
using testing::P;

namespace {

Errc decode_error(std::string_view line) {
  try {
    decode_command(line);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::InvalidArgument;
}

Verb random_verb(testing::Rng& rng) {
  switch (rng.uniform(0, 6)) {
    case 0: return MoveForward{rng.uniform(1, 400)};
    case 1: return MoveBackward{rng.uniform(1, 400)};
    case 2: return RotateCW{rng.uniform(1, 720)};
    case 3: return RotateCCW{rng.uniform(1, 720)};
    case 4: return Blink{rng.uniform(1, 900), rng.uniform(1, 900), rng.uniform(1, 9)};
    case 5: return ShowScreenHint{rng.coin() ? "intro_card" : "qr_code"};
    default: return ReturnHome{};
  }
}

std::string frame(std::uint64_t seq, ParticipantId stand, Verb verb) { return encode_command({seq, stand, verb}); }

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("crc32 and canonical form") {
    CHECK(crc32_hex("123456789") == "cbf43926");
    CHECK(crc32_hex("") == "00000000");
    CHECK(canonical_json(json::parse(R"({"b": 1, "a": {"d": [1, 2], "c": "x"}})")) ==
          R"({"a":{"c":"x","d":[1,2]},"b":1})");
  }

  TEST_CASE("command frame layout") {
    const auto line = frame(7, P(2), MoveForward{50});
    CHECK(line.find('\n') == std::string::npos);
    const auto j = json::parse(line);
    CHECK(j["seq"] == 7);
    CHECK(j["stand"] == "P2");
    CHECK(j["verb"] == "move_forward");
    CHECK(j["args"]["mm"] == 50);
    auto body = j;
    body.erase("crc32");
    CHECK(j["crc32"] == crc32_hex(canonical_json(body)));
  }

  TEST_CASE("decode errors") {
    auto j = json::parse(frame(3, P(1), RotateCW{90}));
    j["args"]["deg"] = 91;
    CHECK(decode_error(j.dump()) == Errc::ChecksumMismatch);
    j.erase("crc32");
    CHECK(decode_error(j.dump()) == Errc::ParseError);
    CHECK(decode_error("not json") == Errc::ParseError);
    CHECK(decode_error("[1,2]") == Errc::ParseError);

    json bad = {{"seq", 1}, {"stand", "P9"}, {"verb", "blink"}, {"args", json::object()}};
    bad["crc32"] = crc32_hex(canonical_json(bad));
    CHECK(decode_error(bad.dump()) == Errc::ParseError);

    CHECK_THROWS_AS(decode_ack(R"({"seq":1,"status":"maybe","pose":[0,0,0]})"), Error);
    CHECK_THROWS_AS(decode_ack(R"({"seq":1,"status":"ok","pose":[0,0]})"), Error);
  }

  TEST_CASE("property: frames round-trip and corruption is never silent") {
    testing::Rng rng(4242);
    for (int i = 0; i < 10000; ++i) {
      const CommandFrame f{static_cast<std::uint64_t>(rng.uniform(1, 1 << 30)), P(rng.uniform(1, 4)),
                           random_verb(rng)};
      auto line = encode_command(f);
      REQUIRE(decode_command(line) == f);

      const auto pos = static_cast<std::size_t>(rng.uniform(0, static_cast<int>(line.size()) - 1));
      line[pos] = static_cast<char>(line[pos] ^ (1 << rng.uniform(0, 6)));
      std::optional<CommandFrame> decoded;
      Errc code = Errc::InvalidArgument;
      try {
        decoded = decode_command(line);
      } catch (const Error& e) {
        code = e.code();
      }
      if (decoded) REQUIRE(*decoded == f);
      else REQUIRE((code == Errc::ChecksumMismatch || code == Errc::ParseError));
    }
  }

  TEST_CASE("ack round-trip") {
    const AckFrame a{9, AckStatus::Obstructed, {12.5, -3.0, 270.0}};
    const auto b = decode_ack(encode_ack(a));
    CHECK(b.seq == 9);
    CHECK(b.status == AckStatus::Obstructed);
    CHECK(near_pose(b.pose, a.pose, 1e-9, 1e-9));
    CHECK(json::parse(encode_ack(a))["status"] == "obstructed");
  }

  TEST_CASE("stand executes a frame once per seq") {
    SimulatedStand stand(P(2));
    const auto home = stand.state().pose;
    const auto line = frame(1, P(2), MoveForward{50});
    const auto first = stand.handle_line(line);
    const auto again = stand.handle_line(line);
    CHECK(first == again);
    CHECK(stand.executed() == std::vector<std::uint64_t>{1});
    const auto moved = stand.state().pose;
    CHECK_FALSE(near_pose(moved, home, 1, 1));

    // Older seq and out-of-order replays: error ack, no motion.
    stand.handle_line(frame(2, P(2), RotateCW{90}));
    const auto after2 = stand.state().pose;
    auto ack = decode_ack(stand.handle_line(frame(1, P(2), MoveForward{50})));
    CHECK(ack.status == AckStatus::Error);
    ack = decode_ack(stand.handle_line(frame(2, P(2), RotateCW{90})));
    CHECK(ack.status == AckStatus::Ok);
    CHECK(stand.executed() == std::vector<std::uint64_t>{1, 2});
    CHECK(near_pose(stand.state().pose, after2, 1e-9, 1e-9));

    // Gaps are allowed: seq only has to increase.
    ack = decode_ack(stand.handle_line(frame(10, P(2), ReturnHome{})));
    CHECK(ack.status == AckStatus::Ok);
    CHECK(near_pose(ack.pose, home, 1e-6, 1e-6));
  }

  TEST_CASE("stand rejects frames for another stand and corrupt frames") {
    SimulatedStand stand(P(1));
    const auto home = stand.state().pose;
    auto ack = decode_ack(stand.handle_line(frame(1, P(3), MoveForward{50})));
    CHECK(ack.status == AckStatus::Error);
    CHECK(ack.seq == 1);

    auto j = json::parse(frame(2, P(1), MoveForward{50}));
    j["crc32"] = "00000000";
    ack = decode_ack(stand.handle_line(j.dump()));
    CHECK(ack.status == AckStatus::Error);
    CHECK(ack.seq == 2);
    ack = decode_ack(stand.handle_line("{garbage"));
    CHECK(ack.status == AckStatus::Error);
    CHECK(ack.seq == 0);
    CHECK(stand.executed().empty());
    CHECK(near_pose(stand.state().pose, home, 1e-9, 1e-9));
  }

  TEST_CASE("obstruction stops partway and clears on return home") {
    SimulatedStand stand(P(2));
    stand.inject_obstruction({"move_forward", 2, 0.5});
    CHECK(stand.handle(CommandFrame{1, P(2), MoveForward{40}}).status == AckStatus::Ok);
    const auto before = stand.state().pose;
    const auto ack = stand.handle(CommandFrame{2, P(2), MoveForward{40}});
    CHECK(ack.status == AckStatus::Obstructed);
    CHECK(ack.pose.x_mm == doctest::Approx(before.x_mm + 20));
    CHECK(stand.state().obstructed);
    CHECK(stand.handle(CommandFrame{3, P(2), ReturnHome{}}).status == AckStatus::Ok);
    CHECK_FALSE(stand.state().obstructed);
    CHECK(near_pose(stand.state().pose, stand.state().home, 1e-6, 1e-6));
  }

  TEST_CASE("stand state json") {
    const auto j = to_json(SimulatedStand(P(4)).state());
    for (const char* key : {"stand", "pose", "home", "busy", "obstructed", "link", "last_seq"}) CHECK(j.contains(key));
  }
}
