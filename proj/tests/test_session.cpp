#include <doctest.h>

#include <sstream>

#include "facil/error.hpp"
#include "facil/session.hpp"
#include "facil/stream.hpp"
#include "support.hpp"

using namespace facil;
using testing::P;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_SUITE("session") {
  TEST_CASE("registration") {
    auto s = Session::register_session({"A", "B", "C", "D"});
    CHECK(s.matrix().rows() == 0);
    CHECK(s.labels()[2] == "C");
    CHECK(code_of([] { Session::register_session({"A", "A", "C", "D"}); }) == Errc::DuplicateLabel);
    CHECK(code_of([] { Session::register_session({"A", "B", "C"}); }) == Errc::WrongGroupSize);
  }

  TEST_CASE("frames are one-hot rows") {
    auto s = Session::register_session({"A", "B", "C", "D"});
    auto ack = s.push_frame({0, P(2)});
    CHECK(ack.rows == 1);
    CHECK(s.matrix().row(0) == std::array<int, 4>{0, 1, 0, 0});
    s.push_frame({1, std::nullopt});
    CHECK(s.matrix().row(1) == std::array<int, 4>{0, 0, 0, 0});
    CHECK(s.matrix().silent_at(1));
    CHECK(s.clock() == 1);
  }

  TEST_CASE("gap and order violations") {
    auto s = Session::register_session({"A", "B", "C", "D"});
    for (int t = 0; t <= 3; ++t) s.push_frame({t, P(1)});
    CHECK(code_of([&] { s.push_frame({5, P(1)}); }) == Errc::GapDetected);
    CHECK(code_of([&] { s.push_frame({3, P(1)}); }) == Errc::OutOfOrderFrame);
    CHECK(s.matrix().rows() == 4);
    CHECK(code_of([&] { s.push_event(SessionEvent::of(9, EventKind::Milestone)); }) == Errc::EventInFuture);
  }

  TEST_CASE("stage marks and countdown") {
    auto s = Session::register_session({"A", "B", "C", "D"});
    s.push_event(SessionEvent::stage_mark(0, Stage::Forming));
    for (int t = 0; t < 300; ++t) s.push_frame({t, std::nullopt});
    s.push_event(SessionEvent::stage_mark(300, Stage::Storming));
    CHECK(s.stage() == Stage::Storming);
    CHECK(code_of([&] { s.push_event(SessionEvent::stage_mark(300, Stage::Forming)); }) == Errc::StageOrderViolation);
    s.push_event(SessionEvent::of(300, EventKind::CountdownAlert));
    CHECK(code_of([&] { s.push_event(SessionEvent::of(300, EventKind::CountdownAlert)); }) ==
          Errc::DuplicateCountdownAlert);
    CHECK(code_of([&] { s.push_event(SessionEvent::of(200, EventKind::Milestone)); }) == Errc::OutOfOrderEvent);
    s.push_event(SessionEvent::of(300, EventKind::SessionEnd));
    CHECK(code_of([&] { s.push_frame({300, P(1)}); }) == Errc::SessionEnded);
  }

  TEST_CASE("k accepted frames give k rows, each summing to 0 or 1") {
    testing::Rng rng(11);
    auto s = Session::register_session({"A", "B", "C", "D"});
    for (int t = 0; t < 5000; ++t) {
      s.push_frame({t, rng.speaker()});
      if (rng.coin(0.05)) CHECK_THROWS(s.push_frame({t + 2, std::nullopt}));
    }
    REQUIRE(s.matrix().rows() == 5000);
    for (int t = 0; t < 5000; ++t) {
      const auto row = s.matrix().row(t);
      const int sum = row[0] + row[1] + row[2] + row[3];
      CHECK((sum == 0 || sum == 1));
    }
  }

  TEST_CASE("replay stream lines") {
    std::istringstream in(R"({"participants":["A","B","C","D"]}
{"t":0,"event":"stage_mark","stage":"forming"}
{"t":0,"speaker":"P3"}
{"t":1,"speaker":null}

{"t":1,"operator":"manual","facilitation":"icebreaking","targets":["P1","P2","P3","P4"],"by":"wiz"}
)");
    const auto items = read_stream(in);
    REQUIRE(items.size() == 5);
    CHECK(std::get<ParticipantsHeader>(items[0]).labels[1] == "B");
    CHECK(std::get<SessionEvent>(items[1]).stage == Stage::Forming);
    CHECK(std::get<DiarizationFrame>(items[2]).speaker == P(3));
    CHECK_FALSE(std::get<DiarizationFrame>(items[3]).speaker.has_value());
    const auto& op = std::get<OperatorAction>(items[4]);
    CHECK(op.verb == OperatorVerb::Manual);
    CHECK(op.operator_id == "wiz");
    CHECK(op.facilitation == FacilitationType::Icebreaking);
    for (const auto& item : items) CHECK(parse_stream_line(to_json(item).dump()).index() == item.index());

    std::istringstream bad("{\"t\":0,\"speaker\":\"P1\"}\n{\"t\":1,\"speaker\":\"P9\"}\n");
    try {
      read_stream(bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
}
