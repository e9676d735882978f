#pragma once

// Scripted sessions for replay and tests. A scenario is a list of speech
// segments plus timed session events and operator actions; generation is a
// pure function of the scenario (all randomness comes from its seed).

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "facil/detector.hpp"
#include "facil/engine.hpp"
#include "facil/stream.hpp"

namespace facil {

struct SilencePattern {};
struct RoundRobinPattern {
  int turn_len_s = 15;
  int jitter_s = 0;
  /// Reshuffle the speaking order every cycle.
  bool shuffle = false;
};
struct MonologuePattern {
  ParticipantId speaker;
  double share = 0.9;
};
struct DyadPingPongPattern {
  ParticipantId a;
  ParticipantId b = ParticipantId::from_index(2);
  int turn_len_s = 5;
};
struct ScriptedPattern {
  std::vector<Speaker> frames;
};

using Pattern = std::variant<SilencePattern, RoundRobinPattern, MonologuePattern, DyadPingPongPattern, ScriptedPattern>;

struct SpeechSegment {
  int duration_s = 0;
  Pattern pattern;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::string> participants = {"P1", "P2", "P3", "P4"};
  std::vector<SpeechSegment> segments;
  std::vector<SessionEvent> events;
  std::vector<OperatorAction> operator_actions;

  int total_duration_s() const;
};

/// Throws InvalidScenario.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);
nlohmann::json to_json(const Scenario& scenario);
void validate(const Scenario& scenario);

/// Frame speakers only, one per second.
std::vector<Speaker> generate_frames(const Scenario& scenario);
/// Header, then per second: events at t, frame t, operator actions at t.
/// Items timed after the last frame follow in time order.
std::vector<StreamItem> generate(const Scenario& scenario);

struct ExpectedWarning {
  int t = 0;
  WarningKind kind = WarningKind::AllSilent;
  std::vector<ParticipantId> targets;
  int tolerance_s = 0;
};

struct Expectation {
  std::vector<ExpectedWarning> warnings;
  /// Exact set of kinds raised, when given.
  std::optional<std::set<WarningKind>> kinds;
  std::map<WarningKind, int> counts;
  std::optional<int> escalations;
  std::optional<int> programs;
};

Expectation expectation_from_json(const nlohmann::json& j);
Expectation load_expectation(const std::string& path);

struct ScenarioRun {
  std::vector<CircumstanceWarning> warnings;
  std::vector<std::string> warning_log;
  std::vector<std::string> program_log;
  std::vector<std::string> journal;
  std::vector<std::string> feature_log;
  std::size_t programs = 0;
};

ScenarioRun run_scenario(const Scenario& scenario, const EngineConfig& config = {}, StandGateway* gateway = nullptr);
/// Replays a stream (header optional) through a fresh engine.
ScenarioRun run_stream(const std::vector<StreamItem>& items, const EngineConfig& config = {},
                       StandGateway* gateway = nullptr);

/// Mismatches between a run and its expectation; empty when they agree.
std::vector<std::string> check_expectation(const Expectation& expected, const ScenarioRun& run);

}  // namespace facil
