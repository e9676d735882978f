#include <doctest.h>

#include "facil/detector.hpp"
#include "facil/engine.hpp"
#include "facil/error.hpp"
#include "support.hpp"

using namespace facil;
using testing::P;

namespace {

// Assembles detector inputs tick by tick, the way the session driver does.
struct Driver {
  CircumstanceDetector det;
  SpeechActivityMatrix m;
  StageState st;
  int run = 0;
  std::set<ParticipantId> busy;
  std::vector<CircumstanceWarning> raised;

  std::vector<CircumstanceWarning> of(WarningKind kind) const {
    std::vector<CircumstanceWarning> out;
    for (const auto& w : raised)
      if (w.kind == kind) out.push_back(w);
    return out;
  }

  explicit Driver(Stage stage, DetectorConfig c = {}) : det(c) { st.stage = stage; }

  DetectorInput input(Speaker s) {
    m.append(s);
    const int t = m.rows() - 1;
    run = s ? 0 : run + 1;
    if (s) ++st.cumulative_time[s->slot()];
    return {evaluate_window(m, t), st, s, run, busy};
  }

  std::vector<WarningTransition> step(Speaker s) {
    auto out = det.tick(input(s));
    for (const auto& tr : out)
      if (!tr.from) raised.push_back(tr.warning);
    return out;
  }

  void feed(const std::vector<Speaker>& xs) {
    for (const auto& s : xs) step(s);
  }
  int t() const { return m.rows() - 1; }
};

std::vector<Speaker> monologue(int n, ParticipantId who) {
  std::vector<Speaker> out;
  for (int i = 0; i < n; ++i) out.push_back(i % 20 == 19 ? P(who.index() % 4 + 1) : Speaker(who));
  return out;
}

}  // namespace

TEST_SUITE("detector") {
  TEST_CASE("conflict rule fixtures") {
    DetectorConfig c;
    TurnMatrix m{};
    m[0][1] = 6;
    m[1][0] = 6;
    m[2][3] = 1;
    const auto pair = detect_conflict(m, c);
    REQUIRE(pair);
    CHECK(pair->first == P(1));
    CHECK(pair->second == P(2));

    TurnMatrix uniform{};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) uniform[a][b] = a == b ? 0 : 3;
    CHECK_FALSE(detect_conflict(uniform, c));

    TurnMatrix few{};
    few[0][1] = 3;
    few[1][0] = 2;
    CHECK_FALSE(detect_conflict(few, c));
  }

  TEST_CASE("leader candidate") {
    CHECK(leader_candidate({80, 40, 30, 10}) == P(1));
    CHECK(leader_candidate({50, 50, 10, 10}) == P(1));
    CHECK(leader_candidate({5, 50, 60, 10}) == P(3));
  }

  TEST_CASE("leader election recommendation is gated on storming") {
    CircumstanceDetector det;
    SpeechActivityMatrix m(testing::repeat(std::nullopt, 130));
    DetectorInput in{evaluate_window(m, 129), {}, std::nullopt, 130, {}};
    in.stage.stage = Stage::Forming;
    in.stage.cumulative_time = {80, 40, 30, 10};
    CHECK_FALSE(det.recommend_leader_election(in));
    in.stage.stage = Stage::Storming;
    const auto w = det.recommend_leader_election(in);
    REQUIRE(w);
    CHECK(w->kind == WarningKind::NoLeader);
    CHECK(w->targets == std::vector<ParticipantId>{P(1)});
    CHECK(w->recommended == FacilitationType::LeaderElection);
    in.silence_runlength = 100;
    CHECK_FALSE(det.recommend_leader_election(in));
  }

  TEST_CASE("all silent after two minutes, once") {
    Driver d(Stage::NormingPerforming);
    d.feed(testing::repeat(std::nullopt, 130));
    REQUIRE(d.raised.size() == 1);
    const auto& w = d.raised.front();
    CHECK(w.kind == WarningKind::AllSilent);
    CHECK(w.t == 120);
    CHECK(w.targets.size() == 4);
    CHECK(w.recommended == FacilitationType::SilenceBreaking);
    CHECK(w.id == "w0001");
    CHECK_FALSE(w.evidence.trace.empty());
  }

  TEST_CASE("storming silence asks for a leader until one is elected") {
    Driver d(Stage::Storming);
    d.feed(testing::repeat(P(2), 20));
    d.feed(testing::repeat(std::nullopt, 125));
    REQUIRE(d.raised.size() == 1);
    CHECK(d.raised[0].kind == WarningKind::NoLeader);
    CHECK(d.raised[0].targets == std::vector<ParticipantId>{P(2)});

    Driver e(Stage::Storming);
    e.st.leader_elected = true;
    e.feed(testing::repeat(std::nullopt, 125));
    REQUIRE(e.raised.size() == 1);
    CHECK(e.raised[0].kind == WarningKind::AllSilent);
  }

  TEST_CASE("short introduction") {
    Driver d(Stage::Forming);
    d.feed(testing::repeat(std::nullopt, 5));
    d.feed(testing::repeat(P(3), 12));
    d.feed(testing::repeat(P(1), 20));
    REQUIRE(d.raised.size() == 1);
    CHECK(d.raised[0].kind == WarningKind::IntroTooShort);
    CHECK(d.raised[0].targets == std::vector<ParticipantId>{P(3)});
    CHECK(d.raised[0].recommended == FacilitationType::SpeechControl);
    CHECK(d.raised[0].t == 17);
  }

  TEST_CASE("short introduction waits while the stand is busy") {
    Driver d(Stage::Forming);
    d.busy = {P(3)};
    d.feed(testing::repeat(P(3), 10));
    d.feed(testing::repeat(P(1), 10));
    CHECK(d.raised.empty());
    d.busy.clear();
    d.step(P(1));
    REQUIRE(d.raised.size() == 1);
    CHECK(d.raised[0].t == 20);
  }

  TEST_CASE("backchannel and long introductions raise nothing") {
    Driver d(Stage::Forming);
    d.feed(testing::speakers("22"));
    d.feed(testing::repeat(P(1), 20));
    d.feed(testing::repeat(P(4), 16));
    d.feed(testing::repeat(std::nullopt, 15));
    CHECK(d.raised.empty());
  }

  TEST_CASE("dominance imbalance after the dwell") {
    Driver d(Stage::NormingPerforming);
    d.feed(monologue(200, P(1)));
    REQUIRE_FALSE(d.raised.empty());
    const auto& w = d.raised.front();
    CHECK(w.kind == WarningKind::DominanceImbalance);
    CHECK(w.targets == std::vector<ParticipantId>{P(2), P(3), P(4)});
    CHECK(w.recommended == FacilitationType::ParticipationBalanceBasic);
    CHECK(w.t >= 59);
    CHECK(w.t <= 70);
  }

  TEST_CASE("dyad conflict in the window") {
    Driver d(Stage::NormingPerforming);
    std::vector<Speaker> xs;
    for (int i = 0; i < 120; ++i) xs.push_back((i / 5) % 2 ? P(2) : P(1));
    d.feed(xs);
    REQUIRE_FALSE(d.raised.empty());
    CHECK(d.raised[0].kind == WarningKind::DyadConflict);
    CHECK(d.raised[0].targets == std::vector<ParticipantId>{P(1), P(2)});
    CHECK(d.raised[0].judgment_required);
  }

  TEST_CASE("lifecycle: ttl, decisions and cooldown") {
    Driver d(Stage::NormingPerforming);
    d.feed(testing::repeat(std::nullopt, 121));
    REQUIRE(d.raised.size() == 1);
    const auto id = d.raised[0].id;
    CHECK(d.det.warning(id).state == WarningState::Open);

    d.feed(testing::repeat(std::nullopt, 89));
    CHECK(d.det.warning(id).state == WarningState::Open);
    const auto out = d.step(std::nullopt);
    REQUIRE(out.size() == 1);
    CHECK(out[0].from == WarningState::Open);
    CHECK(out[0].warning.state == WarningState::Expired);
    CHECK_THROWS_AS(d.det.confirm(id, d.t()), Error);
    try {
      d.det.dismiss(id, d.t());
    } catch (const Error& e) {
      CHECK(e.code() == Errc::AlreadyTerminal);
    }
    try {
      d.det.confirm("w9999", d.t());
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnknownWarning);
    }
    // A fresh silence after the cooldown raises a new warning.
    d.feed(testing::repeat(P(1), 5));
    d.feed(testing::repeat(std::nullopt, 125));
    const auto silent = d.of(WarningKind::AllSilent);
    REQUIRE(silent.size() == 2);
    CHECK(silent[1].t - 210 >= 120);
  }

  TEST_CASE("dismissed pair stays quiet through its cooldown") {
    DetectorConfig c;
    c.silence_threshold_s = 30;
    Driver d(Stage::NormingPerforming, c);
    d.feed(testing::repeat(std::nullopt, 31));
    REQUIRE(d.raised.size() == 1);
    d.det.dismiss(d.raised[0].id, d.t());
    const int dismissed_at = d.t();
    d.feed(testing::speakers("1"));
    d.feed(testing::repeat(std::nullopt, 200));
    const auto silent = d.of(WarningKind::AllSilent);
    REQUIRE(silent.size() >= 2);
    CHECK(silent[1].t - dismissed_at >= c.cooldown_s);
  }

  TEST_CASE("out of order tick") {
    CircumstanceDetector det;
    SpeechActivityMatrix m(testing::repeat(std::nullopt, 10));
    DetectorInput in{evaluate_window(m, 5), {}, std::nullopt, 6, {}};
    det.tick(in);
    try {
      det.tick(in);
      FAIL("expected OutOfOrderTick");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::OutOfOrderTick);
    }
  }

  TEST_CASE("no-reaction escalation") {
    Driver d(Stage::NormingPerforming);
    d.feed(monologue(70, P(1)));
    REQUIRE_FALSE(d.raised.empty());
    const auto id = d.raised[0].id;
    CHECK_THROWS_AS(d.det.mark_no_reaction(id, {}), Error);
    d.det.confirm(id, 70);

    FacilitationOutcome reacted;
    reacted.completed_t = 75;
    reacted.now_t = 90;
    reacted.first_speech_after = {std::nullopt, 85, 80, 82};
    reacted.speaking_time = {60, 3, 3, 3};
    CHECK_FALSE(d.det.mark_no_reaction(id, reacted));

    Driver e(Stage::NormingPerforming);
    e.feed(monologue(70, P(1)));
    const auto id2 = e.raised[0].id;
    e.det.confirm(id2, 70);
    FacilitationOutcome silent;
    silent.completed_t = 75;
    silent.now_t = 120;
    silent.speaking_time = {60, 4, 2, 3};
    silent.first_speech_after = {76, 100, std::nullopt, 90};
    CHECK_FALSE(e.det.mark_no_reaction(id2, silent));  // window still open
    silent.now_t = 135;
    const auto esc = e.det.mark_no_reaction(id2, silent);
    REQUIRE(esc);
    CHECK(esc->warning.escalation_of == id2);
    CHECK(esc->warning.recommended == FacilitationType::ParticipationBalanceStrengthened);
    CHECK(esc->warning.targets == std::vector<ParticipantId>{P(1), P(3)});
    silent.now_t = 300;
    CHECK_FALSE(e.det.mark_no_reaction(id2, silent));
  }

  TEST_CASE("warning wire shape") {
    Driver d(Stage::NormingPerforming);
    d.feed(testing::repeat(std::nullopt, 121));
    const auto j = to_json(d.raised.at(0));
    for (const char* key : {"id", "t", "stage", "kind", "targets", "recommended", "evidence", "state"}) {
      CHECK_MESSAGE(j.contains(key), key);
    }
    CHECK(j["kind"] == "AllSilent");
    CHECK(j["state"] == "open");
    CHECK(j["targets"] == nlohmann::json({"P1", "P2", "P3", "P4"}));
  }
}
