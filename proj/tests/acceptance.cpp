// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "facil/analytics.hpp"
#include "facil/engine.hpp"
#include "facil/features.hpp"
#include "facil/gateway.hpp"
#include "facil/oracle.hpp"
#include "facil/planner.hpp"
#include "facil/scenario.hpp"
#include "facil/stand.hpp"
#include "facil/wire.hpp"
#include "support.hpp"

using namespace facil;
using testing::P;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<ParticipantId> kAll = {P(1), P(2), P(3), P(4)};
const std::vector<std::string> kFixtures = {"silence_np",  "dyad_conflict", "monologue_p1",
                                            "round_robin", "no_reaction",   "scripted_session"};

Scenario fixture_scenario(const std::string& name) {
  return load_scenario(testing::fixture("scenarios/" + name + ".json"));
}

SpeakingTimes random_times(testing::Rng& rng, int hi) {
  SpeakingTimes t{};
  for (auto& v : t) v = rng.coin(0.15) ? 0 : rng.uniform(0, hi);
  return t;
}

Outcome entropy_oracle() {
  Outcome o;
  testing::Rng rng(1);
  constexpr int kCases = 10000;
  double worst = 0.0;
  for (int i = 0; i < kCases && o.pass; ++i) {
    const auto t = random_times(rng, i % 2 ? 60 : 3600);
    worst = std::max(worst, std::fabs(speech_entropy(t) - static_cast<double>(oracle::speech_entropy(t))));
    TurnMatrix c{};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (a != b) c[a][b] = rng.coin(0.3) ? 0 : rng.uniform(0, i % 2 ? 5 : 200);
    worst = std::max(worst, std::fabs(turn_entropy(c) - static_cast<double>(oracle::turn_entropy(c))));
  }
  o.require(worst <= 1e-9, fmt("max |engine - oracle| = %.3g", worst));

  o.require(speech_entropy(SpeakingTimes{}) == 0.0, "no speech must give h_speech = 0");
  o.require(turn_entropy(TurnMatrix{}) == 0.0, "no turns must give h_turn = 0");
  for (int k = 1; k <= 60; ++k) {
    o.require(speech_entropy(SpeakingTimes{k, k, k, k}) == 1.0, fmt("uniform speech %d must give exactly 1", k));
    TurnMatrix u{};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (a != b) u[a][b] = k;
    o.require(turn_entropy(u) == 1.0, fmt("uniform turns %d must give exactly 1", k));
  }
  if (o.pass) o.detail = fmt("%d vectors + %d matrices, max |diff| %.3g; boundaries exact", kCases, kCases, worst);
  return o;
}

Outcome partition_equivalence() {
  Outcome o;
  testing::Rng rng(2);
  constexpr int kCases = 10000;
  int ties = 0;
  for (int i = 0; i < kCases && o.pass; ++i) {
    const auto t = random_times(rng, i % 3 == 0 ? 4 : 60);
    const auto got = dominance_partition(t);
    const auto want = oracle::partition(t);
    std::set<int> distinct(t.begin(), t.end());
    ties += distinct.size() < 4;
    o.require(got.degenerate == want.degenerate &&
                  (got.degenerate || (got.dominant == want.dominant && got.non_dominant == want.non_dominant)),
              fmt("mismatch on [%d,%d,%d,%d]", t[0], t[1], t[2], t[3]));
  }
  const auto fixed = dominance_partition({35, 15, 8, 2});
  o.require(!fixed.degenerate && fixed.dominant == std::vector{P(1)}, "[35,15,8,2] must split off {P1}");
  if (o.pass) o.detail = fmt("%d vectors (%d with ties); [35,15,8,2] -> {P1}", kCases, ties);
  return o;
}

Outcome detector_suite() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::map<std::string, ScenarioRun> runs;
  for (const auto& name : kFixtures) {
    runs[name] = run_scenario(fixture_scenario(name));
    const auto mismatches =
        check_expectation(load_expectation(testing::fixture("scenarios/" + name + ".expect.json")), runs[name]);
    o.require(mismatches.empty(), name + ": " + (mismatches.empty() ? "" : mismatches.front()));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  auto of = [&](const std::string& name, WarningKind kind) {
    std::vector<CircumstanceWarning> out;
    for (const auto& w : runs[name].warnings)
      if (w.kind == kind) out.push_back(w);
    return out;
  };
  const auto silent = of("silence_np", WarningKind::AllSilent);
  o.require(silent.size() == 1 && runs["silence_np"].warnings.size() == 1,
            fmt("silence: %zu AllSilent warnings, %zu total", silent.size(), runs["silence_np"].warnings.size()));
  int silent_t = -1;
  if (!silent.empty()) {
    // The segment starts at the norming/performing mark; t counts from there.
    silent_t = silent[0].t;
    o.require(silent_t >= 120 && silent_t <= 122, fmt("AllSilent at t = %d, want 121 +/- 1", silent_t));
  }
  o.require(!of("dyad_conflict", WarningKind::DyadConflict).empty(), "ping-pong raised no DyadConflict");
  const auto dom = of("monologue_p1", WarningKind::DominanceImbalance);
  o.require(!dom.empty() && dom[0].targets == std::vector{P(2), P(3), P(4)},
            "monologue must raise DominanceImbalance on P2, P3, P4");
  int escalations = 0;
  for (const auto& w : runs["no_reaction"].warnings) escalations += w.escalation_of.has_value();
  o.require(escalations == 1, fmt("no-reaction script produced %d escalations", escalations));
  o.require(secs < 10.0, fmt("suite took %.2f s", secs));
  if (o.pass) {
    o.detail = fmt("%zu scenarios in %.2f s; AllSilent once at t=%d; DyadConflict; DominanceImbalance on P2-P4; "
                   "1 escalation",
                   kFixtures.size(), secs, silent_t);
  }
  return o;
}

Scenario random_scenario(testing::Rng& rng, int index) {
  Scenario s;
  s.name = "random_" + std::to_string(index);
  s.seed = static_cast<std::uint64_t>(index);
  int t = 0;
  for (int i = rng.uniform(2, 5); i > 0; --i) {
    SpeechSegment seg;
    seg.duration_s = rng.uniform(30, 240);
    switch (rng.uniform(0, 3)) {
      case 0: seg.pattern = SilencePattern{}; break;
      case 1: seg.pattern = RoundRobinPattern{rng.uniform(3, 20), rng.uniform(0, 2), rng.coin()}; break;
      case 2: seg.pattern = MonologuePattern{P(rng.uniform(1, 4)), rng.real(0.5, 1.0)}; break;
      default: {
        const int a = rng.uniform(1, 4);
        seg.pattern = DyadPingPongPattern{P(a), P(a % 4 + 1), rng.uniform(2, 8)};
      }
    }
    s.segments.push_back(seg);
    t += seg.duration_s;
  }
  s.events.push_back(SessionEvent::stage_mark(0, Stage::Forming));
  const int storming = rng.uniform(1, t - 2);
  s.events.push_back(SessionEvent::stage_mark(storming, Stage::Storming));
  s.events.push_back(SessionEvent::stage_mark(rng.uniform(storming + 1, t - 1), Stage::NormingPerforming));
  return s;
}

Outcome warnings_only() {
  Outcome o;
  std::vector<Scenario> scenarios;
  for (const auto& name : kFixtures) scenarios.push_back(fixture_scenario(name));
  testing::Rng rng(4);
  for (int i = 0; i < 100; ++i) scenarios.push_back(random_scenario(rng, i));

  const GatewayConfig config;
  std::size_t warnings = 0;
  for (auto& s : scenarios) {
    s.operator_actions.clear();
    auto fleet = make_simulated_fleet(config);
    StandGateway gateway(config, fleet.as_links());
    const auto run = run_scenario(s, {}, &gateway);
    warnings += run.warnings.size();
    std::size_t executed = 0;
    for (auto id : kAll) executed += fleet.stands.at(id)->executed().size();
    o.require(gateway.frames_sent() == 0 && run.programs == 0 && executed == 0,
              fmt("%s: %zu frames, %zu programs", s.name.c_str(), gateway.frames_sent(), run.programs));
  }
  if (o.pass) o.detail = fmt("%zu scenarios, %zu warnings raised, 0 stand frames", scenarios.size(), warnings);
  return o;
}

std::vector<std::vector<ParticipantId>> valid_targets(FacilitationType type) {
  std::vector<std::vector<ParticipantId>> out;
  auto perm = kAll;
  switch (type) {
    case FacilitationType::Icebreaking:
    case FacilitationType::SilenceBreaking:
    case FacilitationType::Farewell:
      do out.push_back(perm);
      while (std::next_permutation(perm.begin(), perm.end()));
      break;
    case FacilitationType::ConflictSolving:
    case FacilitationType::ConnectionTickle:
    case FacilitationType::ParticipationBalanceStrengthened:
      for (auto a : kAll)
        for (auto b : kAll)
          if (a != b) out.push_back({a, b});
      break;
    case FacilitationType::SpeechControl:
    case FacilitationType::LeaderElection:
      for (auto a : kAll) out.push_back({a});
      break;
    case FacilitationType::ParticipationBalanceBasic:
      for (int mask = 1; mask < 15; ++mask) {
        std::vector<ParticipantId> s;
        for (int i = 0; i < 4; ++i)
          if (mask >> i & 1) s.push_back(kAll[i]);
        out.push_back(s);
      }
      break;
  }
  return out;
}

Outcome choreography() {
  Outcome o;
  const GatewayConfig config;
  const MovementParams params;
  int programs = 0;
  double worst_mm = 0.0;
  for (auto type : kAllFacilitations) {
    for (const auto& targets : valid_targets(type)) {
      const auto program = compile(type, targets, params);
      const std::string label = program.program_id;
      ++programs;
      for (const auto& v : program_violations(program, params)) o.require(false, label + ": " + v);
      for (auto stand : program.touched()) {
        const auto idx = program.commands_for(stand);
        for (std::size_t k = 1; k < idx.size(); ++k) {
          o.require(program.commands[idx[k - 1]].end_ms() <= program.commands[idx[k]].start_offset_ms,
                    label + ": overlapping commands on " + stand.label());
        }
      }
      for (const auto& group : program.sync_groups) {
        for (auto i : group) {
          o.require(program.commands[i].start_offset_ms == program.commands[group.front()].start_offset_ms,
                    label + ": sync group offsets differ");
        }
      }
      const auto poses = simulate_program(program, params);
      // Same program through the gateway against simulated stand firmware.
      auto fleet = make_simulated_fleet(config);
      StandGateway gateway(config, fleet.as_links());
      const auto report = gateway.dispatch(program);
      o.require(report.ok(), label + ": gateway execution failed");
      for (auto stand : program.touched()) {
        const auto home = params.table.home_pose(stand);
        for (const auto& pose : {poses.at(stand), fleet.stands.at(stand)->state().pose}) {
          worst_mm = std::max(worst_mm, std::hypot(pose.x_mm - home.x_mm, pose.y_mm - home.y_mm));
          o.require(near_pose(pose, home, 5.0, 5.0), label + ": " + stand.label() + " not home");
        }
      }
    }
  }
  if (o.pass) {
    o.detail = fmt("%d programs over %zu facilitation types; max home error %.2g mm; intervals disjoint; "
                   "sync offsets equal",
                   programs, kAllFacilitations.size(), worst_mm);
  }
  return o;
}

Outcome protocol() {
  Outcome o;
  testing::Rng rng(6);
  const KinematicsConfig kin;
  int replays = 0;

  // Duplicated and reordered delivery straight at the stand firmware.
  for (int trial = 0; trial < 2000 && o.pass; ++trial) {
    const auto id = P(rng.uniform(1, 4));
    SimulatedStand stand(id, {}, kin);
    std::vector<CommandFrame> frames;
    for (int i = 1; i <= 6; ++i) {
      Verb v = rng.coin() ? Verb{MoveForward{rng.uniform(1, 80)}} : Verb{RotateCW{rng.uniform(1, 180)}};
      frames.push_back({static_cast<std::uint64_t>(i), id, v});
    }
    std::vector<CommandFrame> delivery;
    for (const auto& f : frames) {
      delivery.push_back(f);
      if (rng.coin(0.3)) delivery.push_back(f);
    }
    for (int k = rng.uniform(0, 4); k > 0; --k) {
      const auto a = static_cast<std::size_t>(rng.uniform(0, static_cast<int>(delivery.size()) - 1));
      const auto b = static_cast<std::size_t>(rng.uniform(0, static_cast<int>(delivery.size()) - 1));
      std::swap(delivery[a], delivery[b]);
    }
    // Expected behaviour: a frame runs only when its seq exceeds every seq run so far.
    std::uint64_t high = 0;
    std::vector<std::uint64_t> expected;
    auto model = stand.state();
    for (const auto& f : delivery) {
      const auto line = encode_command(f);
      const auto before = stand.state().pose;
      const auto ack = decode_ack(stand.handle_line(line));
      ++replays;
      if (f.seq > high) {
        high = f.seq;
        expected.push_back(f.seq);
        model = simulated_stand_step(model, f.verb, 1e12, kin);
        o.require(ack.status == AckStatus::Ok, "fresh frame not acked");
      } else {
        o.require(near_pose(stand.state().pose, before, 1e-12, 1e-12), "replayed frame moved the stand");
        o.require(ack.status == AckStatus::Error || ack.seq == high, "stale frame accepted");
      }
    }
    o.require(stand.executed() == expected, "executed seqs differ from the monotone model");
    o.require(near_pose(stand.state().pose, model.pose, 1e-6, 1e-6), "pose differs from single execution");
  }

  // Duplicated delivery and lost acks through the gateway.
  const GatewayConfig config;
  for (auto type : kAllFacilitations) {
    const auto program = compile(type, valid_targets(type).front());
    auto fleet = make_simulated_fleet(config);
    for (auto id : kAll) {
      fleet.links.at(id)->duplicate_delivery(true);
      fleet.links.at(id)->drop_acks(1);
    }
    StandGateway gateway(config, fleet.as_links());
    const auto report = gateway.dispatch(program);
    std::size_t executed = 0;
    for (auto id : kAll) executed += fleet.stands.at(id)->executed().size();
    o.require(report.ok() && executed == program.commands.size(),
              program.program_id + ": duplicate delivery repeated motion");
  }

  // Obstruction on every motion command of every facilitation.
  int obstructions = 0;
  for (auto type : kAllFacilitations) {
    const auto program = compile(type, valid_targets(type).front());
    for (auto stand : program.touched()) {
      std::map<std::string, int> nth;
      for (auto i : program.commands_for(stand)) {
        const auto name = verb_name(program.commands[i].verb);
        const int occurrence = ++nth[name];
        if (!is_motion(program.commands[i].verb)) continue;
        auto fleet = make_simulated_fleet(config);
        fleet.stands.at(stand)->inject_obstruction({name, occurrence, 0.5});
        StandGateway gateway(config, fleet.as_links());
        const auto report = gateway.dispatch(program);
        ++obstructions;
        const std::string label = program.program_id + " " + stand.label() + " cmd " + std::to_string(i);
        bool after = false;
        for (auto j : program.commands_for(stand)) {
          const auto outcome = report.commands[j].outcome;
          if (j == i) o.require(outcome == CommandOutcome::Obstructed, label + ": not reported obstructed");
          if (after) o.require(outcome == CommandOutcome::Cancelled, label + ": later command not cancelled");
          after |= j == i;
        }
        const auto& sr = report.stands.at(stand);
        o.require(sr.recovery_return_home && sr.last_verb_attempted == "return_home",
                  label + ": no recovery ReturnHome");
        o.require(sr.at_home, label + ": not home after recovery");
      }
    }
  }
  if (o.pass) {
    o.detail = fmt("%d frames replayed/reordered, no duplicate motion; %d obstructions cancelled and recovered",
                   replays, obstructions);
  }
  return o;
}

Outcome analytics() {
  Outcome o;
  const auto log = load_session_log(testing::fixture("analytics/session.ndjson"));
  const auto stats = stage_report(log);
  const auto& forming = stats.at(0);
  const auto minutes = fmt("%.2f", forming.duration_minutes);
  const auto scr = fmt("%.2f", forming.scr);
  o.require(forming.stage == Stage::Forming && minutes == "7.83" && scr == "0.36",
            "forming reported " + minutes + " min, SCR " + scr);
  o.require(stage_report_csv(stats).find("\nforming,0,470,7.83,0.36\n") != std::string::npos,
            "stage_report csv row differs");

  OnenessRatings sevens;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) sevens.ios[i][j] = sevens.we_scale[i][j] = 7;
  const double one = oneness(sevens).group;
  o.require(one == 7.0, fmt("oneness of all-7 = %g", one));
  const double sd = peer_eval_sd({{100, 0, 0, 0}}).per_rater_sd.at(0);
  o.require(std::fabs(sd - 43.30) <= 0.01, fmt("peer SD = %.4f", sd));
  if (o.pass) {
    o.detail = fmt("forming %s min (%d s), SCR %s (%d/%d voiced); oneness 7.0; peer SD %.4f", minutes.c_str(),
                   forming.end_t - forming.start_t, scr.c_str(), forming.voiced_s, forming.end_t - forming.start_t,
                   sd);
  }
  return o;
}

Outcome determinism() {
  Outcome o;
  const GatewayConfig config;
  std::size_t bytes = 0;
  for (const auto& name : {"scripted_session", "no_reaction"}) {
    const auto scenario = fixture_scenario(name);
    std::vector<ScenarioRun> runs;
    for (int k = 0; k < 2; ++k) {
      auto fleet = make_simulated_fleet(config);
      StandGateway gateway(config, fleet.as_links());
      runs.push_back(run_scenario(scenario, {}, &gateway));
    }
    // Third replay from the serialized stream, without stands.
    std::stringstream buffer;
    write_stream(buffer, generate(scenario));
    runs.push_back(run_stream(read_stream(buffer)));

    auto joined = [](const std::vector<std::string>& lines) {
      std::string s;
      for (const auto& l : lines) s += l + "\n";
      return s;
    };
    const auto w0 = joined(runs[0].warning_log);
    const auto p0 = joined(runs[0].program_log);
    bytes += w0.size() + p0.size();
    o.require(runs[0].programs > 0, std::string(name) + ": no programs dispatched");
    for (std::size_t k = 1; k < runs.size(); ++k) {
      o.require(joined(runs[k].warning_log) == w0, std::string(name) + ": warning logs differ");
      o.require(joined(runs[k].program_log) == p0, std::string(name) + ": program logs differ");
    }
  }
  if (o.pass) o.detail = fmt("2 scenarios x 3 replays byte-identical (%zu bytes of logs)", bytes);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"entropy_oracle_equivalence", entropy_oracle},
      {"dominance_partition_equivalence", partition_equivalence},
      {"detector_scenario_suite", detector_suite},
      {"warnings_only_contract", warnings_only},
      {"choreography_invariants", choreography},
      {"protocol_robustness", protocol},
      {"analytics_fixture", analytics},
      {"end_to_end_determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
