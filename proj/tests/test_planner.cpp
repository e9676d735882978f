#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "facil/error.hpp"
#include "facil/motion.hpp"
#include "facil/planner.hpp"
#include "facil/stand.hpp"
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

std::vector<ParticipantId> random_targets(FacilitationType type, testing::Rng& rng) {
  std::vector<ParticipantId> all = {P(1), P(2), P(3), P(4)};
  std::shuffle(all.begin(), all.end(), rng.engine());
  switch (type) {
    case FacilitationType::Icebreaking:
    case FacilitationType::SilenceBreaking:
    case FacilitationType::Farewell:
      return all;
    case FacilitationType::ConflictSolving:
    case FacilitationType::ConnectionTickle:
    case FacilitationType::ParticipationBalanceStrengthened:
      return {all[0], all[1]};
    case FacilitationType::SpeechControl:
    case FacilitationType::LeaderElection:
      return {all[0]};
    case FacilitationType::ParticipationBalanceBasic:
      return {all.begin(), all.begin() + rng.uniform(1, 3)};
  }
  return {};
}

std::vector<std::string> verbs_for(const ChoreographyProgram& p, ParticipantId stand) {
  std::vector<std::string> out;
  for (auto i : p.commands_for(stand)) out.push_back(verb_name(p.commands[i].verb));
  return out;
}

void check_invariants(const ChoreographyProgram& program, const MovementParams& params) {
  const auto violations = program_violations(program, params);
  for (const auto& v : violations) INFO(v);
  REQUIRE(violations.empty());
  const auto poses = simulate_program(program, params);
  for (auto stand : program.touched()) {
    const auto home = params.table.home_pose(stand);
    REQUIRE(near_pose(poses.at(stand), home, 5.0, 5.0));
    // Disjoint per-stand intervals, independently of program_violations.
    const auto idx = program.commands_for(stand);
    for (std::size_t k = 1; k < idx.size(); ++k) {
      REQUIRE(program.commands[idx[k - 1]].end_ms() <= program.commands[idx[k]].start_offset_ms);
    }
    REQUIRE(std::holds_alternative<ReturnHome>(program.commands[idx.back()].verb));
  }
  for (const auto& group : program.sync_groups) {
    REQUIRE(group.size() >= 2);
    for (auto i : group) REQUIRE(program.commands[i].start_offset_ms == program.commands[group[0]].start_offset_ms);
  }
  REQUIRE(program.duration_ms() <= params.max_program_ms);
}

}  // namespace

TEST_SUITE("planner") {
  TEST_CASE("kinematics") {
    const KinematicsConfig k;
    const Pose origin{0, 0, 0};
    auto s = simulated_stand_step({P(1), origin, origin}, MoveForward{50}, 1e9, k);
    CHECK(near_pose(s.pose, {50, 0, 0}, 1e-9, 1e-9));
    s = simulated_stand_step({P(1), {0, 0, 90}, origin}, MoveForward{50}, 1e9, k);
    CHECK(near_pose(s.pose, {0, 50, 90}, 1e-9, 1e-9));
    s = simulated_stand_step({P(1), {10, 20, 33}, origin}, RotateCW{360}, 1e9, k);
    CHECK(near_pose(s.pose, {10, 20, 33}, 1e-9, 1e-9));
    s = simulated_stand_step({P(1), origin, origin}, MoveForward{120}, 500, k);
    CHECK(s.pose.x_mm == doctest::Approx(60.0));
    CHECK_THROWS_AS(simulated_stand_step({P(1), origin, origin}, MoveForward{1}, 0, k), Error);

    CHECK(normalize_heading(-90) == 270);
    CHECK(heading_delta(350, 10) == doctest::Approx(20));
    CHECK(heading_delta(0, 180) == 180);
    const TableGeometry g;
    CHECK(near_pose(g.home_pose(P(2)), {300, 0, 0}, 1e-9, 1e-9));
    CHECK(near_pose(g.home_pose(P(1)), {0, -300, 270}, 1e-9, 1e-9));
    CHECK_FALSE(g.within_bounds({700, 0, 0}));
  }

  TEST_CASE("verbs round-trip and reject bad arguments") {
    const std::vector<Verb> verbs = {MoveForward{5},    MoveBackward{7},       RotateCW{90},  RotateCCW{45},
                                     Blink{100, 200, 3}, ShowScreenHint{"qr_code"}, ReturnHome{}};
    for (const auto& v : verbs) CHECK(parse_verb(verb_name(v), verb_args(v)) == v);
    CHECK_THROWS_AS(parse_verb("move_forward", {{"mm", 0}}), Error);
    CHECK_THROWS_AS(parse_verb("rotate_cw", {{"deg", -5}}), Error);
    CHECK_THROWS_AS(parse_verb("teleport", nlohmann::json::object()), Error);
    CHECK_FALSE(is_motion(Blink{}));
    CHECK(is_motion(ReturnHome{}));
  }

  TEST_CASE("property: forward and backward are inverses") {
    testing::Rng rng(77);
    const KinematicsConfig k;
    for (int i = 0; i < 10000; ++i) {
      const Pose start{rng.real(-200, 200), rng.real(-200, 200), rng.real(0, 360)};
      const int mm = rng.uniform(1, 300);
      const int deg = rng.uniform(1, 720);
      StandState s{P(1), start, start};
      s = simulated_stand_step(s, MoveForward{mm}, 1e9, k);
      s = simulated_stand_step(s, MoveBackward{mm}, 1e9, k);
      s = simulated_stand_step(s, RotateCW{deg}, 1e9, k);
      s = simulated_stand_step(s, RotateCCW{deg}, 1e9, k);
      REQUIRE(near_pose(s.pose, start, 1e-6, 1e-6));
    }
  }

  TEST_CASE("property: return home from anywhere on the table") {
    testing::Rng rng(78);
    const KinematicsConfig k;
    const TableGeometry g;
    for (int i = 0; i < 10000; ++i) {
      const auto id = P(rng.uniform(1, 4));
      const double r = rng.real(0, 550);
      const double a = rng.real(0, 2 * M_PI);
      const Pose start{r * std::cos(a), r * std::sin(a), rng.real(0, 360)};
      const auto home = g.home_pose(id);
      const auto segs = plan_segments(ReturnHome{}, start, home, k);
      REQUIRE(near_pose(advance(start, segs, total_duration_ms(segs)), home, 1e-6, 1e-6));
    }
  }

  TEST_CASE("silence breaking") {
    const auto p = compile(FacilitationType::SilenceBreaking, {P(1), P(2), P(3), P(4)});
    for (int i = 1; i <= 4; ++i) {
      CHECK(verbs_for(p, P(i)) == std::vector<std::string>{"move_forward", "rotate_cw", "return_home"});
    }
    CHECK(p.sync_groups.size() == 3);
    CHECK(std::get<MoveForward>(p.commands[p.commands_for(P(3))[0]].verb).mm == 50);
    CHECK(std::get<RotateCW>(p.commands[p.commands_for(P(3))[1]].verb).deg == 360);
    CHECK(p.program_id == "silence_breaking:P1-P2-P3-P4");
  }

  TEST_CASE("basic participation balance touches only its targets") {
    const auto p = compile(FacilitationType::ParticipationBalanceBasic, {P(3)});
    CHECK(p.touched() == std::set<ParticipantId>{P(3)});
    CHECK(verbs_for(p, P(3)) == std::vector<std::string>{"move_forward", "rotate_cw", "return_home"});
    CHECK(std::get<MoveForward>(p.commands[0].verb).mm == 60);
    CHECK(compile(FacilitationType::ParticipationBalanceBasic, {P(2), P(3), P(4)}).touched().size() == 3);
    CHECK(code_of([] { compile(FacilitationType::ParticipationBalanceBasic, {P(1), P(2), P(3), P(4)}); }) ==
          Errc::ArityMismatch);
  }

  TEST_CASE("tickle blinks the receiver only") {
    const auto p = compile(FacilitationType::ConnectionTickle, {P(1), P(2)});
    CHECK(p.touched() == std::set<ParticipantId>{P(2)});
    CHECK(p.commands[0].verb == Verb{Blink{300, 300, 4}});
    CHECK(code_of([] { compile(FacilitationType::ConnectionTickle, {P(1), P(1)}); }) == Errc::SelfTickle);
  }

  TEST_CASE("icebreaking: one sync phase then sequential push-outs") {
    for (const auto& order : {std::vector{P(1), P(2), P(3), P(4)}, std::vector{P(2), P(1), P(4), P(3)}}) {
      const auto p = compile_icebreaking(order);
      check_invariants(p, {});
      std::vector<int> hint_start;
      for (auto stand : order) {
        const auto idx = p.commands_for(stand);
        for (auto i : idx) {
          if (const auto* h = std::get_if<ShowScreenHint>(&p.commands[i].verb)) {
            CHECK(h->token == "intro_card");
            hint_start.push_back(p.commands[i].start_offset_ms);
          }
        }
      }
      REQUIRE(hint_start.size() == 4);
      CHECK(std::is_sorted(hint_start.begin(), hint_start.end()));
    }
    CHECK(code_of([] { compile_icebreaking({P(1), P(2), P(3)}); }) == Errc::ArityMismatch);
  }

  TEST_CASE("conflict solving") {
    const auto p = compile_conflict_solving({P(2), P(4)});
    CHECK(p.touched() == std::set<ParticipantId>{P(2), P(4)});
    check_invariants(p, {});
    bool synced_blink = false;
    for (const auto& g : p.sync_groups) {
      synced_blink |= std::holds_alternative<Blink>(p.commands[g[0]].verb) && g.size() == 2;
    }
    CHECK(synced_blink);
    CHECK(code_of([] { compile_conflict_solving({P(2), P(2)}); }) == Errc::ArityMismatch);
    CHECK(code_of([] { compile_conflict_solving({P(2), P(4)}, {}, {P(4)}); }) == Errc::StandBusy);
  }

  TEST_CASE("strengthened balance") {
    const auto p = compile_strengthened(P(1), P(3));
    check_invariants(p, {});
    CHECK(p.targets == std::vector<ParticipantId>{P(1), P(3)});
    CHECK(code_of([] { compile_strengthened(P(1), P(1)); }) == Errc::ArityMismatch);
  }

  TEST_CASE("farewell") {
    const auto p = compile_farewell({P(1), P(2), P(3), P(4)});
    check_invariants(p, {});
    int qr = 0;
    for (const auto& c : p.commands)
      if (const auto* h = std::get_if<ShowScreenHint>(&c.verb)) qr += h->token == "qr_code";
    CHECK(qr == 4);
    CHECK(code_of([] { compile_farewell({}); }) == Errc::ArityMismatch);
    CHECK(code_of([] { compile_farewell({P(1), P(2), P(3), P(4)}, {}, {P(2)}); }) == Errc::StandBusy);
  }

  TEST_CASE("program serialization round-trips") {
    const auto p = compile(FacilitationType::LeaderElection, {P(2)});
    const auto j = to_json(p);
    for (const char* key : {"program_id", "facilitation", "commands", "sync_groups"}) CHECK(j.contains(key));
    const auto& c = j["commands"][0];
    for (const char* key : {"stand", "verb", "args", "start_offset_ms", "duration_ms"}) CHECK(c.contains(key));
    const auto back = program_from_json(j);
    CHECK(to_json(back) == j);
  }

  TEST_CASE("property: every facilitation satisfies the choreography invariants") {
    testing::Rng rng(909);
    const MovementParams params;
    for (int i = 0; i < 10000; ++i) {
      const auto type = kAllFacilitations[i % kAllFacilitations.size()];
      const auto targets = random_targets(type, rng);
      check_invariants(compile(type, targets, params), params);
    }
  }

  TEST_CASE("arity table") {
    const std::vector<ParticipantId> none;
    for (auto type : kAllFacilitations) CHECK_THROWS_AS(check_arity(type, none), Error);
    CHECK_NOTHROW(check_arity(FacilitationType::SpeechControl, {P(1)}));
    CHECK_THROWS_AS(check_arity(FacilitationType::SpeechControl, {P(1), P(2)}), Error);
    CHECK_THROWS_AS(check_arity(FacilitationType::SilenceBreaking, {P(1), P(2), P(3), P(3)}), Error);
    CHECK(code_of([] { compile(FacilitationType::SilenceBreaking, {P(1), P(2), P(3), P(4)}, {}, {P(1)}); }) ==
          Errc::StandBusy);
  }
}
