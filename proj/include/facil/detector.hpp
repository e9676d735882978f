#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "facil/features.hpp"
#include "facil/types.hpp"

namespace facil {

enum class WarningKind {
  NoIcebreak,
  IntroTooShort,
  NoLeader,
  DyadConflict,
  AllSilent,
  DominanceImbalance,
  LowInterdependencePair,
};

const char* to_string(WarningKind kind);
WarningKind parse_warning_kind(std::string_view text);

enum class WarningState { Open, Confirmed, Dismissed, Expired };

const char* to_string(WarningState state);
inline bool is_terminal(WarningState s) { return s != WarningState::Open; }

/// Stages in which each kind may be raised.
bool kind_allowed_in(WarningKind kind, Stage stage);

struct Evidence {
  WindowFeatures window;
  std::vector<std::string> trace;
};

struct CircumstanceWarning {
  std::string id;
  int t = 0;
  Stage stage = Stage::Forming;
  WarningKind kind = WarningKind::AllSilent;
  /// Ordered for two-role facilitations: tickle (sender, receiver) and
  /// strengthened balance (active, inactive). Otherwise ascending ids.
  std::vector<ParticipantId> targets;
  FacilitationType recommended = FacilitationType::SilenceBreaking;
  Evidence evidence;
  WarningState state = WarningState::Open;
  int state_t = 0;
  bool judgment_required = false;
  std::optional<std::string> escalation_of;
};

nlohmann::json to_json(const CircumstanceWarning& warning);

struct WarningTransition {
  std::optional<WarningState> from;  // nullopt for a newly raised warning
  CircumstanceWarning warning;
};

struct DetectorConfig {
  int silence_threshold_s = 120;
  int intro_min_s = 15;
  /// Turns shorter than this are back-channel, not an introduction attempt.
  int intro_attempt_min_s = 3;
  int imbalance_dwell_s = 60;
  double imbalance_share = 0.2;
  double conflict_dyad_share = 0.8;
  int conflict_min_switches = 6;
  int cooldown_s = 120;
  int no_reaction_window_s = 60;
  /// Open warnings expire after this long without an operator decision.
  int warning_ttl_s = 90;
  int low_interdependence_horizon_s = 600;
  int low_interdependence_min_speech_s = 30;
  int advisory_cooldown_s = 600;
  /// Silence gap that ends a turn, same meaning as FeatureConfig::turn_gap_s.
  int turn_gap_s = 10;

  /// Throws InvalidArgument on non-positive values.
  void validate() const;
};

/// Stage context assembled by the session driver for each tick.
struct StageState {
  std::optional<Stage> stage;
  int stage_start_t = 0;
  /// Speaking seconds and directed turns accumulated since the stage began.
  SpeakingTimes cumulative_time{};
  TurnMatrix cumulative_turns{};
  /// A leader-election facilitation has been confirmed this session.
  bool leader_elected = false;
};

struct DetectorInput {
  WindowFeatures features;
  StageState stage;
  Speaker current_speaker;
  int silence_runlength = 0;
  /// Participants whose stands are executing a choreography right now.
  std::set<ParticipantId> busy;
};

/// Result of a confirmed basic participation-balance facilitation.
struct FacilitationOutcome {
  int completed_t = 0;
  int now_t = 0;
  /// First speaking second of each participant after completion, if any.
  std::array<std::optional<int>, kGroupSize> first_speech_after{};
  /// Speaking times used to pick the active and inactive members.
  SpeakingTimes speaking_time{};
};

/// Dyad carrying at least conflict_dyad_share of the window's turns, if any.
std::optional<std::pair<ParticipantId, ParticipantId>> detect_conflict(const TurnMatrix& counts,
                                                                       const DetectorConfig& config);

/// Participant with the most cumulative speech; ties to the lower id.
ParticipantId leader_candidate(const SpeakingTimes& cumulative);

/// Rule engine over the feature stream. Emits warnings only; nothing here can
/// move a stand.
class CircumstanceDetector {
 public:
  explicit CircumstanceDetector(DetectorConfig config = {});

  const DetectorConfig& config() const { return config_; }

  std::vector<WarningTransition> tick(const DetectorInput& input);

  std::optional<CircumstanceWarning> recommend_leader_election(const DetectorInput& input) const;

  /// Operator decisions. Throw UnknownWarning / AlreadyTerminal.
  WarningTransition confirm(const std::string& id, int t);
  WarningTransition dismiss(const std::string& id, int t);

  /// Escalates a confirmed basic balance facilitation whose targets stayed
  /// silent for no_reaction_window_s after it completed. At most once per warning.
  std::optional<WarningTransition> mark_no_reaction(const std::string& id,
                                                    const FacilitationOutcome& outcome);

  const CircumstanceWarning& warning(const std::string& id) const;
  std::vector<CircumstanceWarning> open_warnings() const;
  const std::vector<CircumstanceWarning>& all_warnings() const { return warnings_; }

 private:
  using Key = std::pair<WarningKind, std::vector<ParticipantId>>;

  CircumstanceWarning& find(const std::string& id);
  bool suppressed(const Key& key, int t, int cooldown) const;
  std::optional<WarningTransition> raise(const DetectorInput& input, WarningKind kind,
                                         std::vector<ParticipantId> targets,
                                         FacilitationType recommended,
                                         std::vector<std::string> trace, int cooldown);
  void on_terminal(const CircumstanceWarning& w);
  void track_introductions(const DetectorInput& input, std::vector<WarningTransition>& out);

  DetectorConfig config_;
  std::vector<CircumstanceWarning> warnings_;
  std::map<Key, int> last_terminal_t_;
  std::set<std::string> escalated_;
  int next_id_ = 1;
  std::optional<int> last_tick_;

  int silence_emitted_at_run_ = 0;
  std::vector<ParticipantId> imbalance_dominant_;
  int imbalance_dwell_ = 0;

  struct IntroTurn {
    int slot = -1;
    int spoken = 0;
    int last_speech_t = 0;
  };
  IntroTurn intro_turn_;
  std::array<bool, kGroupSize> intro_done_{};
  struct PendingIntro {
    int slot = 0;
    int spoken = 0;
  };
  std::vector<PendingIntro> pending_intros_;
};

}  // namespace facil
