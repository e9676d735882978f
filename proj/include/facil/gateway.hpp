#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "facil/planner.hpp"
#include "facil/stand.hpp"
#include "facil/wire.hpp"

namespace facil {

/// Transport to one stand: send a line, wait for one reply line.
class StandLink {
 public:
  virtual ~StandLink() = default;
  /// nullopt when nothing arrived within the timeout.
  virtual std::optional<std::string> exchange(const std::string& line, std::chrono::milliseconds timeout) = 0;
};

/// Link to an in-process SimulatedStand with fault knobs.
class SimulatedLink : public StandLink {
 public:
  explicit SimulatedLink(std::shared_ptr<SimulatedStand> stand) : stand_(std::move(stand)) {}

  std::optional<std::string> exchange(const std::string& line, std::chrono::milliseconds timeout) override;

  /// The stand processes the next n frames but their acks are lost.
  void drop_acks(int n);
  /// Every frame is delivered twice; the second reply is the one returned.
  void duplicate_delivery(bool on);
  /// While down, nothing reaches the stand.
  void set_down(bool down);

  SimulatedStand& stand() { return *stand_; }

 private:
  std::shared_ptr<SimulatedStand> stand_;
  std::mutex mu_;
  int drop_acks_ = 0;
  bool duplicate_ = false;
  bool down_ = false;
};

/// Paces command release relative to a program's start.
class ReleaseClock {
 public:
  using TimePoint = std::chrono::steady_clock::time_point;
  virtual ~ReleaseClock() = default;
  virtual TimePoint now() = 0;
  virtual void wait_until(TimePoint origin, int offset_ms) = 0;
};

class RealtimeClock : public ReleaseClock {
 public:
  TimePoint now() override { return std::chrono::steady_clock::now(); }
  void wait_until(TimePoint origin, int offset_ms) override;
};

/// Releases every command immediately; ordering still follows offsets and sync groups.
class ImmediateClock : public ReleaseClock {
 public:
  TimePoint now() override { return std::chrono::steady_clock::now(); }
  void wait_until(TimePoint, int) override {}
};

struct StandEndpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

struct GatewayConfig {
  TableGeometry table;
  KinematicsConfig kinematics;
  int retries = 3;
  int ack_timeout_ms = 500;
  /// Network addresses of real or out-of-process stands; empty means in-process simulation.
  std::map<ParticipantId, StandEndpoint> endpoints;

  static GatewayConfig from_json(const nlohmann::json& j);
  static GatewayConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

enum class CommandOutcome { Acked, Obstructed, Rejected, LinkLost, Cancelled };

const char* to_string(CommandOutcome outcome);

struct CommandReport {
  std::size_t index = 0;  // position in the program; SIZE_MAX for recovery commands
  ParticipantId stand;
  std::string verb;
  std::uint64_t seq = 0;
  CommandOutcome outcome = CommandOutcome::Cancelled;
  int attempts = 0;
  double latency_ms = 0.0;
  std::optional<Pose> pose;
};

struct StandReport {
  Pose final_pose;
  bool obstructed = false;
  bool link_lost = false;
  bool recovery_return_home = false;
  /// Verb of the last frame sent to this stand during the program.
  std::string last_verb_attempted;
  bool at_home = false;
};

struct ExecutionReport {
  std::string program_id;
  std::vector<CommandReport> commands;
  std::map<ParticipantId, StandReport> stands;

  bool ok() const;
};

nlohmann::json to_json(const ExecutionReport& report);

struct FrameRecord {
  ParticipantId stand;
  std::string line;
};

struct TickleEvent {
  ParticipantId sender;
  ParticipantId receiver;
  bool queued = false;
};

struct TickleResult {
  bool queued = false;
  std::optional<ExecutionReport> report;
};

/// Dispatches programs to four stands. One worker thread per stand per
/// program; sync groups are released together through a shared gate.
class StandGateway {
 public:
  StandGateway(GatewayConfig config, std::map<ParticipantId, std::shared_ptr<StandLink>> links,
               std::shared_ptr<ReleaseClock> clock = std::make_shared<ImmediateClock>());
  ~StandGateway();

  StandGateway(const StandGateway&) = delete;
  StandGateway& operator=(const StandGateway&) = delete;

  /// Blocks until the program finished. Throws StandBusy / LinkLost before any frame is sent.
  ExecutionReport dispatch(const ChoreographyProgram& program);
  /// Busy check is synchronous; execution continues on a background thread.
  std::future<ExecutionReport> dispatch_async(const ChoreographyProgram& program);

  AckFrame direct_command(ParticipantId stand, const Verb& verb, bool force = false);

  TickleResult tickle(ParticipantId sender, ParticipantId receiver);

  StandState state(ParticipantId stand) const;
  std::vector<StandState> states() const;
  /// Operator reset after a lost link.
  void reconnect(ParticipantId stand);

  std::vector<FrameRecord> frame_log() const;
  std::size_t frames_sent() const;
  std::vector<TickleEvent> tickle_log() const;
  void set_tickle_listener(std::function<void(const TickleEvent&)> listener);

  const GatewayConfig& config() const { return config_; }

 private:
  struct Sent {
    std::optional<AckFrame> ack;
    int attempts = 0;
    double latency_ms = 0.0;
    std::uint64_t seq = 0;
  };

  void reserve(const std::set<ParticipantId>& stands);
  ExecutionReport run(const ChoreographyProgram& program);
  void release(const std::set<ParticipantId>& stands);
  Sent send(ParticipantId stand, const Verb& verb);
  void flush_tickles(const std::set<ParticipantId>& freed);

  GatewayConfig config_;
  std::map<ParticipantId, std::shared_ptr<StandLink>> links_;
  std::shared_ptr<ReleaseClock> clock_;

  mutable std::mutex mu_;
  std::map<ParticipantId, StandState> states_;
  std::map<ParticipantId, std::unique_ptr<std::mutex>> link_mu_;
  std::vector<FrameRecord> frames_;
  std::deque<TickleEvent> pending_tickles_;
  std::vector<TickleEvent> tickles_;
  std::function<void(const TickleEvent&)> tickle_listener_;
};

struct SimulatedFleet {
  std::map<ParticipantId, std::shared_ptr<SimulatedStand>> stands;
  std::map<ParticipantId, std::shared_ptr<SimulatedLink>> links;

  std::map<ParticipantId, std::shared_ptr<StandLink>> as_links() const;
};

SimulatedFleet make_simulated_fleet(const GatewayConfig& config);

}  // namespace facil
