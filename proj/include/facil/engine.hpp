#pragma once

#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "facil/detector.hpp"
#include "facil/features.hpp"
#include "facil/gateway.hpp"
#include "facil/planner.hpp"
#include "facil/session.hpp"
#include "facil/stream.hpp"

namespace facil {

struct EngineConfig {
  FeatureConfig features;
  DetectorConfig detector;
  MovementParams movement;
  /// Live mode: dispatch on a background thread and report through the listener.
  bool async_dispatch = false;

  static EngineConfig from_json(const nlohmann::json& j);
};

struct ActionResult {
  bool ok = false;
  std::string error;  // Errc name when !ok
  std::string message;
  std::optional<std::string> program_id;
  std::optional<std::string> warning_id;
  bool queued = false;
  std::optional<ExecutionReport> report;
  std::optional<AckFrame> ack;
};

nlohmann::json to_json(const ActionResult& result);

/// Per-session driver: ingest -> window features -> detector -> (operator) ->
/// planner -> gateway. Nothing reaches a stand without an operator action.
class FacilitationEngine {
 public:
  explicit FacilitationEngine(const std::vector<std::string>& labels, EngineConfig config = {},
                              StandGateway* gateway = nullptr);
  ~FacilitationEngine();

  FacilitationEngine(const FacilitationEngine&) = delete;
  FacilitationEngine& operator=(const FacilitationEngine&) = delete;

  /// Session errors propagate as Error.
  void push_frame(const DiarizationFrame& frame);
  void push_event(const SessionEvent& event);
  /// Operator decisions never throw; failures are reported and journaled.
  ActionResult apply(const OperatorAction& action);
  /// Dispatches one replay-stream item. A participants header is ignored.
  void ingest(const StreamItem& item);

  /// Records a tickle that reached the gateway through another channel.
  void note_tickle(const TickleEvent& event);

  /// Outbound panel messages ({"type": "tick" | "warning" | "state" | "report"}).
  void set_listener(std::function<void(const nlohmann::json&)> listener);
  nlohmann::json snapshot() const;

  int clock() const;
  std::set<ParticipantId> busy_at(int t) const;
  std::vector<CircumstanceWarning> warnings() const;
  CircumstanceWarning warning(const std::string& id) const;

  /// Deterministic NDJSON logs (one JSON document per line).
  std::vector<std::string> warning_log() const;
  std::vector<std::string> program_log() const;
  std::vector<std::string> journal() const;
  std::vector<std::string> feature_log() const;
  std::vector<ExecutionReport> execution_reports() const;
  std::size_t programs_dispatched() const;

  /// Waits for background dispatches to finish.
  void drain();

  /// Program targets implied by a warning's recommendation.
  static std::vector<ParticipantId> program_targets(const CircumstanceWarning& warning);

 private:
  struct Watch {
    std::string warning_id;
    int completed_t = 0;
    std::array<std::optional<int>, kGroupSize> first_speech{};
    bool done = false;
  };
  struct QueuedTickle {
    OperatorAction action;
    int release_t = 0;
  };

  void emit(const nlohmann::json& message);
  void start_stage(int t);
  ActionResult apply_locked(const OperatorAction& action);
  ActionResult run_program(const ChoreographyProgram& program, const OperatorAction& action,
                           const std::string& source, std::optional<std::string> warning_id);
  std::set<ParticipantId> busy_locked(int t) const;
  void log_transition(const WarningTransition& tr);
  void advance_watches(int t, const Speaker& speaker);
  void release_tickles(int t);
  nlohmann::json stands_json() const;

  mutable std::mutex mu_;
  EngineConfig config_;
  StandGateway* gateway_;
  Session session_;
  CircumstanceDetector detector_;

  StageState stage_;
  int silence_run_ = 0;
  std::optional<ParticipantId> last_speaker_;
  int last_speech_t_ = -1;
  std::optional<WindowFeatures> last_features_;

  std::map<ParticipantId, int> busy_until_;
  std::vector<Watch> watches_;
  std::vector<QueuedTickle> queued_tickles_;

  std::vector<std::string> warning_log_;
  std::vector<std::string> program_log_;
  std::vector<std::string> journal_;
  std::vector<std::string> feature_log_;
  std::vector<ExecutionReport> reports_;

  std::function<void(const nlohmann::json&)> listener_;
  std::vector<std::future<void>> background_;
};

}  // namespace facil
