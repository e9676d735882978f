#include "facil/detector.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "facil/error.hpp"
#include "facil/stream.hpp"

namespace facil {

const char* to_string(WarningKind kind) {
  switch (kind) {
    case WarningKind::NoIcebreak: return "NoIcebreak";
    case WarningKind::IntroTooShort: return "IntroTooShort";
    case WarningKind::NoLeader: return "NoLeader";
    case WarningKind::DyadConflict: return "DyadConflict";
    case WarningKind::AllSilent: return "AllSilent";
    case WarningKind::DominanceImbalance: return "DominanceImbalance";
    case WarningKind::LowInterdependencePair: return "LowInterdependencePair";
  }
  return "?";
}

WarningKind parse_warning_kind(std::string_view text) {
  for (auto kind : {WarningKind::NoIcebreak, WarningKind::IntroTooShort, WarningKind::NoLeader,
                    WarningKind::DyadConflict, WarningKind::AllSilent,
                    WarningKind::DominanceImbalance, WarningKind::LowInterdependencePair}) {
    if (text == to_string(kind)) return kind;
  }
  throw Error(Errc::ParseError, "unknown warning kind: " + std::string(text));
}

const char* to_string(WarningState state) {
  switch (state) {
    case WarningState::Open: return "open";
    case WarningState::Confirmed: return "confirmed";
    case WarningState::Dismissed: return "dismissed";
    case WarningState::Expired: return "expired";
  }
  return "?";
}

bool kind_allowed_in(WarningKind kind, Stage stage) {
  switch (kind) {
    case WarningKind::NoIcebreak:
    case WarningKind::IntroTooShort:
      return stage == Stage::Forming;
    case WarningKind::NoLeader:
      return stage == Stage::Storming;
    case WarningKind::AllSilent:
    case WarningKind::DyadConflict:
    case WarningKind::LowInterdependencePair:
      return stage == Stage::Storming || stage == Stage::NormingPerforming;
    case WarningKind::DominanceImbalance:
      return stage == Stage::NormingPerforming;
  }
  return false;
}

nlohmann::json to_json(const CircumstanceWarning& w) {
  nlohmann::json obj = {
      {"id", w.id},
      {"t", w.t},
      {"stage", to_string(w.stage)},
      {"kind", to_string(w.kind)},
      {"targets", targets_json(w.targets)},
      {"recommended", to_string(w.recommended)},
      {"evidence", {{"window", to_json(w.evidence.window)}, {"trace", w.evidence.trace}}},
      {"state", to_string(w.state)},
      {"state_t", w.state_t},
      {"judgment_required", w.judgment_required},
  };
  if (w.escalation_of) obj["escalation_of"] = *w.escalation_of;
  return obj;
}

void DetectorConfig::validate() const {
  const int ints[] = {silence_threshold_s, intro_min_s, intro_attempt_min_s, imbalance_dwell_s,
                      conflict_min_switches, cooldown_s, no_reaction_window_s, warning_ttl_s,
                      low_interdependence_horizon_s, low_interdependence_min_speech_s,
                      advisory_cooldown_s, turn_gap_s};
  for (int v : ints) {
    if (v <= 0) throw Error(Errc::InvalidArgument, "detector thresholds must be positive");
  }
  if (imbalance_share <= 0.0 || conflict_dyad_share <= 0.0 || conflict_dyad_share > 1.0) {
    throw Error(Errc::InvalidArgument, "detector shares must lie in (0, 1]");
  }
}

std::optional<std::pair<ParticipantId, ParticipantId>> detect_conflict(const TurnMatrix& counts,
                                                                       const DetectorConfig& config) {
  int total = 0;
  for (int a = 0; a < kGroupSize; ++a) {
    for (int b = 0; b < kGroupSize; ++b) {
      if (a != b) total += counts[a][b];
    }
  }
  if (total < config.conflict_min_switches) return std::nullopt;

  int best = -1;
  std::pair<int, int> best_pair{0, 1};
  for (int a = 0; a < kGroupSize; ++a) {
    for (int b = a + 1; b < kGroupSize; ++b) {
      const int both = counts[a][b] + counts[b][a];
      if (both > best) {
        best = both;
        best_pair = {a, b};
      }
    }
  }
  if (static_cast<double>(best) < config.conflict_dyad_share * total) return std::nullopt;
  return std::pair{ParticipantId::from_slot(best_pair.first), ParticipantId::from_slot(best_pair.second)};
}

ParticipantId leader_candidate(const SpeakingTimes& cumulative) {
  int best = 0;
  for (int i = 1; i < kGroupSize; ++i) {
    if (cumulative[i] > cumulative[best]) best = i;
  }
  return ParticipantId::from_slot(best);
}

CircumstanceDetector::CircumstanceDetector(DetectorConfig config) : config_(config) {
  config_.validate();
}

CircumstanceWarning& CircumstanceDetector::find(const std::string& id) {
  for (auto& w : warnings_) {
    if (w.id == id) return w;
  }
  throw Error(Errc::UnknownWarning, id);
}

const CircumstanceWarning& CircumstanceDetector::warning(const std::string& id) const {
  for (const auto& w : warnings_) {
    if (w.id == id) return w;
  }
  throw Error(Errc::UnknownWarning, id);
}

std::vector<CircumstanceWarning> CircumstanceDetector::open_warnings() const {
  std::vector<CircumstanceWarning> out;
  std::copy_if(warnings_.begin(), warnings_.end(), std::back_inserter(out),
               [](const auto& w) { return w.state == WarningState::Open; });
  return out;
}

namespace {

std::vector<ParticipantId> sorted(std::vector<ParticipantId> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string format_id(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "w%04d", n);
  return buf;
}

}  // namespace

bool CircumstanceDetector::suppressed(const Key& key, int t, int cooldown) const {
  for (const auto& w : warnings_) {
    if (w.state == WarningState::Open && w.kind == key.first && sorted(w.targets) == key.second) {
      return true;
    }
  }
  const auto it = last_terminal_t_.find(key);
  return it != last_terminal_t_.end() && t - it->second < cooldown;
}

void CircumstanceDetector::on_terminal(const CircumstanceWarning& w) {
  last_terminal_t_[{w.kind, sorted(w.targets)}] = w.state_t;
}

std::optional<WarningTransition> CircumstanceDetector::raise(const DetectorInput& input,
                                                             WarningKind kind,
                                                             std::vector<ParticipantId> targets,
                                                             FacilitationType recommended,
                                                             std::vector<std::string> trace,
                                                             int cooldown) {
  if (!input.stage.stage || !kind_allowed_in(kind, *input.stage.stage)) return std::nullopt;
  for (auto id : targets) {
    if (input.busy.count(id)) return std::nullopt;
  }
  const int t = input.features.t_end;
  if (suppressed({kind, sorted(targets)}, t, cooldown)) return std::nullopt;

  CircumstanceWarning w;
  w.id = format_id(next_id_++);
  w.t = t;
  w.stage = *input.stage.stage;
  w.kind = kind;
  w.targets = std::move(targets);
  w.recommended = recommended;
  w.evidence = {input.features, std::move(trace)};
  w.state_t = t;
  w.judgment_required = kind == WarningKind::DyadConflict;
  warnings_.push_back(w);
  return WarningTransition{std::nullopt, w};
}

std::optional<CircumstanceWarning> CircumstanceDetector::recommend_leader_election(
    const DetectorInput& input) const {
  if (input.stage.stage != Stage::Storming) return std::nullopt;
  if (input.silence_runlength <= config_.silence_threshold_s) return std::nullopt;
  CircumstanceWarning w;
  w.t = input.features.t_end;
  w.stage = Stage::Storming;
  w.kind = WarningKind::NoLeader;
  w.targets = {leader_candidate(input.stage.cumulative_time)};
  w.recommended = FacilitationType::LeaderElection;
  w.evidence = {input.features,
                {"silence " + std::to_string(input.silence_runlength) + "s > " +
                     std::to_string(config_.silence_threshold_s) + "s in storming",
                 "push target " + w.targets.front().label() + " has most speech since storming began"}};
  w.state_t = w.t;
  return w;
}

void CircumstanceDetector::track_introductions(const DetectorInput& input,
                                               std::vector<WarningTransition>& out) {
  const int t = input.features.t_end;
  const auto& speaker = input.current_speaker;

  auto finish_turn = [&] {
    const int slot = intro_turn_.slot;
    const int spoken = intro_turn_.spoken;
    intro_turn_ = {};
    if (slot < 0 || intro_done_[slot] || spoken < config_.intro_attempt_min_s) return;
    intro_done_[slot] = true;
    if (spoken >= config_.intro_min_s) return;
    pending_intros_.push_back({slot, spoken});
  };

  if (intro_turn_.slot >= 0) {
    const bool other_speaks = speaker && speaker->slot() != intro_turn_.slot;
    const bool gap_closed = !speaker && t - intro_turn_.last_speech_t > config_.turn_gap_s;
    if (other_speaks || gap_closed) finish_turn();
  }
  if (speaker) {
    if (intro_turn_.slot == speaker->slot()) {
      ++intro_turn_.spoken;
      intro_turn_.last_speech_t = t;
    } else {
      intro_turn_ = {speaker->slot(), 1, t};
    }
  }

  // A short introduction may end while its stand is still moving; hold it until free.
  std::vector<PendingIntro> still_pending;
  for (const auto& p : pending_intros_) {
    const auto id = ParticipantId::from_slot(p.slot);
    auto raised = raise(input, WarningKind::IntroTooShort, {id}, FacilitationType::SpeechControl,
                        {"introduction of " + id.label() + " lasted " + std::to_string(p.spoken) +
                         "s < " + std::to_string(config_.intro_min_s) + "s"},
                        config_.cooldown_s);
    if (raised) {
      out.push_back(std::move(*raised));
    } else {
      still_pending.push_back(p);
    }
  }
  pending_intros_ = std::move(still_pending);
}

std::vector<WarningTransition> CircumstanceDetector::tick(const DetectorInput& input) {
  const int t = input.features.t_end;
  if (last_tick_ && t <= *last_tick_) {
    throw Error(Errc::OutOfOrderTick, "tick t=" + std::to_string(t) + " after t=" + std::to_string(*last_tick_));
  }
  last_tick_ = t;

  std::vector<WarningTransition> out;
  for (auto& w : warnings_) {
    if (w.state == WarningState::Open && t - w.t >= config_.warning_ttl_s) {
      w.state = WarningState::Expired;
      w.state_t = t;
      on_terminal(w);
      out.push_back({WarningState::Open, w});
    }
  }

  const auto stage = input.stage.stage;
  if (!stage) return out;
  const auto& f = input.features;

  if (*stage == Stage::Forming) {
    track_introductions(input, out);
  } else {
    intro_turn_ = {};
    pending_intros_.clear();
  }

  // Silence is a raw run-length, so thresholds longer than the window work.
  if (input.silence_runlength == 0) silence_emitted_at_run_ = 0;
  if (input.silence_runlength > config_.silence_threshold_s &&
      input.silence_runlength - silence_emitted_at_run_ > config_.silence_threshold_s) {
    std::optional<WarningTransition> raised;
    if (*stage == Stage::Storming && !input.stage.leader_elected) {
      if (auto rec = recommend_leader_election(input)) {
        raised = raise(input, WarningKind::NoLeader, rec->targets, rec->recommended,
                       rec->evidence.trace, config_.cooldown_s);
      }
    } else {
      const auto everyone = all_participants();
      raised = raise(input, WarningKind::AllSilent, {everyone.begin(), everyone.end()},
                     FacilitationType::SilenceBreaking,
                     {"all members silent for " + std::to_string(input.silence_runlength) + "s > " +
                      std::to_string(config_.silence_threshold_s) + "s"},
                     config_.cooldown_s);
    }
    if (raised) {
      silence_emitted_at_run_ = input.silence_runlength;
      out.push_back(std::move(*raised));
    }
  }

  if (*stage == Stage::NormingPerforming && !f.dominance.degenerate) {
    const int total = std::accumulate(f.speaking_time.begin(), f.speaking_time.end(), 0);
    int quiet = 0;
    for (auto id : f.dominance.non_dominant) quiet += f.speaking_time[id.slot()];
    const double share = total > 0 ? static_cast<double>(quiet) / total : 1.0;
    if (share < config_.imbalance_share) {
      if (f.dominance.dominant == imbalance_dominant_) {
        ++imbalance_dwell_;
      } else {
        imbalance_dominant_ = f.dominance.dominant;
        imbalance_dwell_ = 1;
      }
    } else {
      imbalance_dominant_.clear();
      imbalance_dwell_ = 0;
    }
    if (imbalance_dwell_ >= config_.imbalance_dwell_s) {
      char share_text[64];
      std::snprintf(share_text, sizeof share_text, "%.3f", share);
      auto raised = raise(input, WarningKind::DominanceImbalance, f.dominance.non_dominant,
                          FacilitationType::ParticipationBalanceBasic,
                          {"dominant set " + targets_json(f.dominance.dominant).dump() + " held for " +
                               std::to_string(imbalance_dwell_) + "s",
                           std::string("non-dominant share ") + share_text + " < " +
                               std::to_string(config_.imbalance_share)},
                          config_.cooldown_s);
      if (raised) {
        imbalance_dwell_ = 0;
        out.push_back(std::move(*raised));
      }
    }
  } else {
    imbalance_dominant_.clear();
    imbalance_dwell_ = 0;
  }

  if (auto pair = detect_conflict(f.turn_counts, config_)) {
    const auto [a, b] = *pair;
    const int both = f.turn_counts[a.slot()][b.slot()] + f.turn_counts[b.slot()][a.slot()];
    if (auto raised = raise(input, WarningKind::DyadConflict, {a, b}, FacilitationType::ConflictSolving,
                            {"dyad " + a.label() + "-" + b.label() + " holds " + std::to_string(both) +
                                 " of the window's turns",
                             "operator judgment required: content cues unavailable"},
                            config_.cooldown_s)) {
      out.push_back(std::move(*raised));
    }
  }

  if ((*stage == Stage::Storming || *stage == Stage::NormingPerforming) &&
      t - input.stage.stage_start_t >= config_.low_interdependence_horizon_s) {
    const auto& cum_t = input.stage.cumulative_time;
    const auto& cum_c = input.stage.cumulative_turns;
    for (int a = 0; a < kGroupSize; ++a) {
      for (int b = a + 1; b < kGroupSize; ++b) {
        if (cum_t[a] < config_.low_interdependence_min_speech_s ||
            cum_t[b] < config_.low_interdependence_min_speech_s || cum_c[a][b] + cum_c[b][a] != 0) {
          continue;
        }
        const auto pa = ParticipantId::from_slot(a);
        const auto pb = ParticipantId::from_slot(b);
        if (auto raised = raise(input, WarningKind::LowInterdependencePair, {pa, pb},
                                FacilitationType::ConnectionTickle,
                                {"no turns between " + pa.label() + " and " + pb.label() + " in " +
                                 std::to_string(t - input.stage.stage_start_t) + "s of this stage"},
                                config_.advisory_cooldown_s)) {
          out.push_back(std::move(*raised));
        }
      }
    }
  }
  return out;
}

WarningTransition CircumstanceDetector::confirm(const std::string& id, int t) {
  auto& w = find(id);
  if (is_terminal(w.state)) throw Error(Errc::AlreadyTerminal, id + " is " + to_string(w.state));
  w.state = WarningState::Confirmed;
  w.state_t = t;
  on_terminal(w);
  return {WarningState::Open, w};
}

WarningTransition CircumstanceDetector::dismiss(const std::string& id, int t) {
  auto& w = find(id);
  if (is_terminal(w.state)) throw Error(Errc::AlreadyTerminal, id + " is " + to_string(w.state));
  w.state = WarningState::Dismissed;
  w.state_t = t;
  on_terminal(w);
  return {WarningState::Open, w};
}

std::optional<WarningTransition> CircumstanceDetector::mark_no_reaction(const std::string& id,
                                                                        const FacilitationOutcome& outcome) {
  const auto parent = find(id);
  if (parent.state != WarningState::Confirmed ||
      parent.recommended != FacilitationType::ParticipationBalanceBasic) {
    throw Error(Errc::InvalidArgument, id + " is not a confirmed basic participation-balance warning");
  }
  if (escalated_.count(id)) return std::nullopt;

  const int deadline = outcome.completed_t + config_.no_reaction_window_s;
  std::vector<ParticipantId> silent;
  for (auto target : parent.targets) {
    const auto& first = outcome.first_speech_after[target.slot()];
    if (!first || *first > deadline) silent.push_back(target);
  }
  if (silent.empty()) {
    escalated_.insert(id);
    return std::nullopt;
  }
  if (outcome.now_t < deadline) return std::nullopt;

  const auto& T = outcome.speaking_time;
  ParticipantId inactive = silent.front();
  for (auto id2 : silent) {
    if (T[id2.slot()] < T[inactive.slot()]) inactive = id2;
  }
  std::optional<ParticipantId> active;
  for (auto p : all_participants()) {
    if (p == inactive) continue;
    const bool was_target = std::find(parent.targets.begin(), parent.targets.end(), p) != parent.targets.end();
    if (was_target) continue;
    if (!active || T[p.slot()] > T[active->slot()]) active = p;
  }
  if (!active) {
    for (auto p : all_participants()) {
      if (p != inactive && (!active || T[p.slot()] > T[active->slot()])) active = p;
    }
  }

  CircumstanceWarning w;
  w.id = format_id(next_id_++);
  w.t = outcome.now_t;
  w.stage = parent.stage;
  w.kind = WarningKind::DominanceImbalance;
  w.targets = {*active, inactive};
  w.recommended = FacilitationType::ParticipationBalanceStrengthened;
  w.evidence = {parent.evidence.window,
                {"no speech from " + inactive.label() + " within " +
                     std::to_string(config_.no_reaction_window_s) + "s of basic facilitation (" + id + ")",
                 "active member " + active->label() + " pulls " + inactive.label() + " toward the center"}};
  w.state_t = w.t;
  w.escalation_of = id;
  warnings_.push_back(w);
  escalated_.insert(id);
  return WarningTransition{std::nullopt, w};
}

}  // namespace facil
