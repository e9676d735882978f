#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "facil/motion.hpp"
#include "facil/wire.hpp"

namespace facil {

enum class LinkState { Connected, Lost };

const char* to_string(LinkState state);

struct StandState {
  ParticipantId stand;
  Pose pose;
  Pose home;
  bool busy = false;
  bool obstructed = false;
  LinkState link = LinkState::Connected;
  std::uint64_t last_seq = 0;
};

nlohmann::json to_json(const StandState& state);

/// Executes `verb` for dt_ms of simulated time (the whole command if dt_ms
/// exceeds its duration). Throws InvalidArgument unless dt_ms > 0.
StandState simulated_stand_step(const StandState& state, const Verb& verb, double dt_ms,
                                const KinematicsConfig& kinematics);

/// Blocks the Nth command with the given verb after `fraction` of its motion.
struct ObstructionFault {
  std::string verb = "move_forward";
  int nth = 1;
  double fraction = 0.5;
};

/// In-process model of a stand's firmware: dead-reckoned pose, seq
/// bookkeeping and idempotent acks.
class SimulatedStand {
 public:
  SimulatedStand(ParticipantId id, TableGeometry table = {}, KinematicsConfig kinematics = {});

  /// Handles one protocol line and returns the ack line.
  std::string handle_line(std::string_view line);
  AckFrame handle(const CommandFrame& frame);

  void inject_obstruction(ObstructionFault fault);

  StandState state() const;
  /// Seqs whose command changed the stand state, in execution order.
  std::vector<std::uint64_t> executed() const;

 private:
  AckFrame error_ack(std::uint64_t seq) const;

  mutable std::mutex mu_;
  StandState state_;
  KinematicsConfig kinematics_;
  std::optional<AckFrame> last_ack_;
  std::vector<std::uint64_t> executed_;
  std::vector<ObstructionFault> faults_;
  std::map<std::string, int> verb_counts_;
};

}  // namespace facil
