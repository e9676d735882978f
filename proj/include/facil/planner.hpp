#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "facil/motion.hpp"
#include "facil/types.hpp"

namespace facil {

struct StandCommand {
  ParticipantId stand;
  Verb verb;
  int start_offset_ms = 0;
  int duration_ms = 0;

  int end_ms() const { return start_offset_ms + duration_ms; }
  friend bool operator==(const StandCommand&, const StandCommand&) = default;
};

struct ChoreographyProgram {
  std::string program_id;
  FacilitationType facilitation = FacilitationType::SilenceBreaking;
  /// Roles as given to the compiler (tickle: sender, receiver; strengthened: active, inactive).
  std::vector<ParticipantId> targets;
  std::vector<StandCommand> commands;
  std::vector<std::vector<std::size_t>> sync_groups;

  int duration_ms() const;
  std::set<ParticipantId> touched() const;
  std::vector<std::size_t> commands_for(ParticipantId stand) const;

  friend bool operator==(const ChoreographyProgram&, const ChoreographyProgram&) = default;
};

nlohmann::json to_json(const StandCommand& command);
nlohmann::json to_json(const ChoreographyProgram& program);
ChoreographyProgram program_from_json(const nlohmann::json& j);

struct MovementParams {
  int step_out_mm = 60;
  int silence_step_mm = 50;
  int gather_mm = 50;
  int attention_rotation_deg = 360;
  int facing_rotation_deg = 180;
  Blink blink{300, 300, 4};
  int phase_gap_ms = 500;
  int speech_control_mm = 20;
  int speech_control_cycles = 3;
  int hint_ms = 1500;
  /// Conflict approach: min(approach_max_mm, (gap - approach_clearance_mm) / 2) per stand.
  int approach_max_mm = 120;
  int approach_clearance_mm = 200;
  /// Strengthened balance: active stops this far short of the inactive home.
  int standoff_mm = 100;
  int pause_ms = 1000;
  int center_advance_mm = 60;
  int max_program_ms = 30000;
  KinematicsConfig kinematics;
  TableGeometry table;
};

/// Target arity rules; throws ArityMismatch.
void check_arity(FacilitationType type, const std::vector<ParticipantId>& targets);

ChoreographyProgram compile(FacilitationType type, const std::vector<ParticipantId>& targets,
                            const MovementParams& params = {}, const std::set<ParticipantId>& busy = {});
ChoreographyProgram compile_icebreaking(const std::vector<ParticipantId>& order, const MovementParams& params = {},
                                        const std::set<ParticipantId>& busy = {});
ChoreographyProgram compile_conflict_solving(const std::vector<ParticipantId>& pair,
                                             const MovementParams& params = {},
                                             const std::set<ParticipantId>& busy = {});
ChoreographyProgram compile_strengthened(ParticipantId active, ParticipantId inactive,
                                         const MovementParams& params = {},
                                         const std::set<ParticipantId>& busy = {});
ChoreographyProgram compile_farewell(const std::vector<ParticipantId>& stands, const MovementParams& params = {},
                                     const std::set<ParticipantId>& busy = {});

/// Poses after open-loop execution of the whole program from the home poses.
std::map<ParticipantId, Pose> simulate_program(const ChoreographyProgram& program, const MovementParams& params);

/// Structural checks: per-stand ReturnHome last, disjoint intervals, shared
/// sync offsets, duration cap. Returns human-readable violations.
std::vector<std::string> program_violations(const ChoreographyProgram& program, const MovementParams& params);

}  // namespace facil
