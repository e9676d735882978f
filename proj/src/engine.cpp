#include "facil/engine.hpp"

#include <algorithm>
#include <cmath>

#include "facil/error.hpp"

namespace facil {

namespace {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

nlohmann::json symmetrized(const TurnMatrix& c) {
  nlohmann::json out = nlohmann::json::array();
  for (int a = 0; a < kGroupSize; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int b = 0; b < kGroupSize; ++b) row.push_back(a == b ? 0 : c[a][b] + c[b][a]);
    out.push_back(row);
  }
  return out;
}

std::vector<ParticipantId> seating_order() {
  const auto all = all_participants();
  return {all.begin(), all.end()};
}

}  // namespace

EngineConfig EngineConfig::from_json(const nlohmann::json& j) {
  EngineConfig c;
  try {
    if (j.contains("features")) {
      read_field(j["features"], "window_s", c.features.window_s);
      read_field(j["features"], "turn_gap_s", c.features.turn_gap_s);
    }
    if (j.contains("detector")) {
      const auto& d = j["detector"];
      auto& o = c.detector;
      read_field(d, "silence_threshold_s", o.silence_threshold_s);
      read_field(d, "intro_min_s", o.intro_min_s);
      read_field(d, "intro_attempt_min_s", o.intro_attempt_min_s);
      read_field(d, "imbalance_dwell_s", o.imbalance_dwell_s);
      read_field(d, "imbalance_share", o.imbalance_share);
      read_field(d, "conflict_dyad_share", o.conflict_dyad_share);
      read_field(d, "conflict_min_switches", o.conflict_min_switches);
      read_field(d, "cooldown_s", o.cooldown_s);
      read_field(d, "no_reaction_window_s", o.no_reaction_window_s);
      read_field(d, "warning_ttl_s", o.warning_ttl_s);
      read_field(d, "low_interdependence_horizon_s", o.low_interdependence_horizon_s);
      read_field(d, "low_interdependence_min_speech_s", o.low_interdependence_min_speech_s);
      read_field(d, "advisory_cooldown_s", o.advisory_cooldown_s);
      read_field(d, "turn_gap_s", o.turn_gap_s);
    }
    if (j.contains("movement")) {
      const auto& m = j["movement"];
      auto& o = c.movement;
      read_field(m, "step_out_mm", o.step_out_mm);
      read_field(m, "silence_step_mm", o.silence_step_mm);
      read_field(m, "gather_mm", o.gather_mm);
      read_field(m, "attention_rotation_deg", o.attention_rotation_deg);
      read_field(m, "facing_rotation_deg", o.facing_rotation_deg);
      read_field(m, "phase_gap_ms", o.phase_gap_ms);
      read_field(m, "speech_control_mm", o.speech_control_mm);
      read_field(m, "speech_control_cycles", o.speech_control_cycles);
      read_field(m, "hint_ms", o.hint_ms);
      if (m.contains("blink")) {
        read_field(m["blink"], "on_ms", o.blink.on_ms);
        read_field(m["blink"], "off_ms", o.blink.off_ms);
        read_field(m["blink"], "repeats", o.blink.repeats);
      }
    }
    read_field(j, "async_dispatch", c.async_dispatch);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("engine config: ") + e.what());
  }
  if (c.features.window_s <= 0 || c.features.turn_gap_s < 0) {
    throw Error(Errc::InvalidArgument, "engine config: window and gap must be positive");
  }
  c.detector.validate();
  return c;
}

nlohmann::json to_json(const ActionResult& r) {
  nlohmann::json j{{"ok", r.ok}, {"queued", r.queued}};
  if (!r.ok) {
    j["error"] = r.error;
    j["message"] = r.message;
  }
  if (r.program_id) j["program_id"] = *r.program_id;
  if (r.warning_id) j["warning"] = *r.warning_id;
  if (r.report) j["report"] = to_json(*r.report);
  if (r.ack) {
    j["ack"] = {{"seq", r.ack->seq},
                {"status", to_string(r.ack->status)},
                {"pose", {r.ack->pose.x_mm, r.ack->pose.y_mm, r.ack->pose.heading_deg}}};
  }
  return j;
}

FacilitationEngine::FacilitationEngine(const std::vector<std::string>& labels, EngineConfig config,
                                       StandGateway* gateway)
    : config_(std::move(config)),
      gateway_(gateway),
      session_(Session::register_session(labels)),
      detector_(config_.detector) {}

FacilitationEngine::~FacilitationEngine() { drain(); }

std::vector<ParticipantId> FacilitationEngine::program_targets(const CircumstanceWarning& w) {
  switch (w.recommended) {
    case FacilitationType::Icebreaking:
    case FacilitationType::SilenceBreaking:
    case FacilitationType::Farewell:
      return seating_order();
    default:
      return w.targets;
  }
}

void FacilitationEngine::set_listener(std::function<void(const nlohmann::json&)> listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

void FacilitationEngine::emit(const nlohmann::json& message) {
  if (listener_) listener_(message);
}

void FacilitationEngine::start_stage(int t) {
  const bool leader = stage_.leader_elected;
  stage_ = {};
  stage_.stage = session_.stage();
  stage_.stage_start_t = t;
  stage_.leader_elected = leader;
  last_speaker_.reset();
  last_speech_t_ = -1;
}

void FacilitationEngine::push_frame(const DiarizationFrame& frame) {
  std::lock_guard lock(mu_);
  session_.push_frame(frame);
  const int t = frame.t;
  const Speaker& speaker = frame.speaker;

  if (stage_.stage && speaker) {
    const int s = speaker->slot();
    ++stage_.cumulative_time[s];
    if (last_speaker_ && *last_speaker_ != *speaker && t - last_speech_t_ - 1 <= config_.features.turn_gap_s) {
      ++stage_.cumulative_turns[last_speaker_->slot()][s];
    }
    last_speaker_ = speaker;
    last_speech_t_ = t;
  }
  silence_run_ = speaker ? 0 : silence_run_ + 1;

  const auto features = evaluate_window(session_.matrix(), t, config_.features);
  feature_log_.push_back(to_json(features).dump());
  last_features_ = features;

  DetectorInput input{features, stage_, speaker, silence_run_, busy_locked(t)};
  for (const auto& tr : detector_.tick(input)) log_transition(tr);
  advance_watches(t, speaker);
  release_tickles(t);

  emit({{"type", "tick"},
        {"features", to_json(features)},
        {"switches", symmetrized(features.turn_counts)},
        {"silence_run", silence_run_},
        {"stage", stage_.stage ? nlohmann::json(to_string(*stage_.stage)) : nlohmann::json(nullptr)}});
}

void FacilitationEngine::push_event(const SessionEvent& event) {
  std::lock_guard lock(mu_);
  session_.push_event(event);
  if (event.kind == EventKind::StageMark) start_stage(event.t);
  nlohmann::json j = to_json(event);
  emit({{"type", "event"}, {"event", j}});
}

void FacilitationEngine::ingest(const StreamItem& item) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DiarizationFrame>) {
          push_frame(v);
        } else if constexpr (std::is_same_v<T, SessionEvent>) {
          push_event(v);
        } else if constexpr (std::is_same_v<T, OperatorAction>) {
          apply(v);
        }
      },
      item);
}

void FacilitationEngine::log_transition(const WarningTransition& tr) {
  nlohmann::json j{{"t", tr.warning.state_t},
                   {"from", tr.from ? nlohmann::json(to_string(*tr.from)) : nlohmann::json(nullptr)},
                   {"warning", to_json(tr.warning)}};
  warning_log_.push_back(j.dump());
  emit({{"type", "warning"}, {"from", j["from"]}, {"warning", j["warning"]}});
}

std::set<ParticipantId> FacilitationEngine::busy_locked(int t) const {
  std::set<ParticipantId> out;
  for (const auto& [id, until] : busy_until_) {
    if (t <= until) out.insert(id);
  }
  return out;
}

std::set<ParticipantId> FacilitationEngine::busy_at(int t) const {
  std::lock_guard lock(mu_);
  return busy_locked(t);
}

void FacilitationEngine::advance_watches(int t, const Speaker& speaker) {
  for (auto& w : watches_) {
    if (w.done || t <= w.completed_t) continue;
    if (speaker && !w.first_speech[speaker->slot()]) w.first_speech[speaker->slot()] = t;
    FacilitationOutcome outcome{w.completed_t, t, w.first_speech, stage_.cumulative_time};
    if (auto tr = detector_.mark_no_reaction(w.warning_id, outcome)) {
      log_transition(*tr);
      w.done = true;
      continue;
    }
    const auto& targets = detector_.warning(w.warning_id).targets;
    const bool all_spoke = std::all_of(targets.begin(), targets.end(),
                                       [&](ParticipantId p) { return w.first_speech[p.slot()].has_value(); });
    if (all_spoke || t >= w.completed_t + config_.detector.no_reaction_window_s) w.done = true;
  }
}

void FacilitationEngine::release_tickles(int t) {
  std::vector<QueuedTickle> keep;
  auto due = std::move(queued_tickles_);
  queued_tickles_.clear();
  for (auto& q : due) {
    if (t < q.release_t || busy_locked(t + 1).count(*q.action.to)) {
      keep.push_back(std::move(q));
      continue;
    }
    nlohmann::json entry{{"t", session_.clock()}, {"operator", q.action.operator_id}, {"action", to_json(q.action)},
                         {"released", true}};
    try {
      const auto program = compile(FacilitationType::ConnectionTickle, {*q.action.from, *q.action.to},
                                   config_.movement, busy_locked(t + 1));
      const auto r = run_program(program, q.action, "tickle", std::nullopt);
      entry["ok"] = r.ok;
    } catch (const Error& e) {
      entry["ok"] = false;
      entry["error"] = to_string(e.code());
    }
    journal_.push_back(entry.dump());
  }
  for (auto& q : keep) queued_tickles_.push_back(std::move(q));
}

ActionResult FacilitationEngine::run_program(const ChoreographyProgram& program, const OperatorAction& action,
                                             const std::string& source, std::optional<std::string> warning_id) {
  ActionResult result;
  const int now = session_.clock();
  const int seconds = (program.duration_ms() + 999) / 1000;

  if (gateway_) {
    if (config_.async_dispatch) {
      auto fut = gateway_->dispatch_async(program);
      background_.push_back(std::async(std::launch::async, [this, f = std::move(fut)]() mutable {
        try {
          auto report = f.get();
          std::lock_guard lock(mu_);
          reports_.push_back(report);
          emit({{"type", "report"}, {"report", to_json(report)}});
          emit({{"type", "state"}, {"stands", stands_json()}});
        } catch (const Error& e) {
          std::lock_guard lock(mu_);
          emit({{"type", "error"}, {"error", to_string(e.code())}, {"message", e.what()}});
        }
      }));
    } else {
      auto report = gateway_->dispatch(program);
      reports_.push_back(report);
      result.report = report;
    }
  }

  for (auto stand : program.touched()) busy_until_[stand] = now + seconds;
  nlohmann::json entry{{"t", now},
                       {"source", source},
                       {"operator", action.operator_id},
                       {"warning", warning_id ? nlohmann::json(*warning_id) : nlohmann::json(nullptr)},
                       {"busy_until", now + seconds},
                       {"program", to_json(program)}};
  program_log_.push_back(entry.dump());
  emit({{"type", "program"}, {"entry", entry}});
  if (result.report) {
    emit({{"type", "report"}, {"report", to_json(*result.report)}});
    emit({{"type", "state"}, {"stands", stands_json()}});
  }

  result.ok = true;
  result.program_id = program.program_id;
  result.warning_id = std::move(warning_id);
  return result;
}

ActionResult FacilitationEngine::apply(const OperatorAction& action) {
  std::lock_guard lock(mu_);
  ActionResult result;
  try {
    result = apply_locked(action);
  } catch (const Error& e) {
    result = {};
    result.ok = false;
    result.error = to_string(e.code());
    result.message = e.what();
  }
  nlohmann::json entry{{"t", session_.clock()},
                       {"operator", action.operator_id},
                       {"action", to_json(action)},
                       {"ok", result.ok},
                       {"queued", result.queued}};
  if (!result.ok) entry["error"] = result.error;
  if (result.program_id) entry["program_id"] = *result.program_id;
  if (result.warning_id) entry["warning"] = *result.warning_id;
  journal_.push_back(entry.dump());
  return result;
}

ActionResult FacilitationEngine::apply_locked(const OperatorAction& action) {
  const int now = session_.clock();
  const auto busy_next = busy_locked(now + 1);

  auto resolve_warning = [&]() -> std::string {
    if (!action.warning_id.empty()) return detector_.warning(action.warning_id).id;
    if (action.warning_kind.empty()) throw Error(Errc::InvalidArgument, "no warning id or kind given");
    const auto kind = parse_warning_kind(action.warning_kind);
    for (const auto& w : detector_.all_warnings()) {
      if (w.kind == kind && w.state == WarningState::Open) return w.id;
    }
    throw Error(Errc::UnknownWarning, "no open " + action.warning_kind + " warning");
  };

  switch (action.verb) {
    case OperatorVerb::Dismiss: {
      const auto id = resolve_warning();
      log_transition(detector_.dismiss(id, now));
      ActionResult r;
      r.ok = true;
      r.warning_id = id;
      return r;
    }
    case OperatorVerb::Confirm: {
      const auto id = resolve_warning();
      const auto w = detector_.warning(id);
      if (is_terminal(w.state)) throw Error(Errc::AlreadyTerminal, id + " is " + to_string(w.state));
      const auto targets = action.targets ? *action.targets : program_targets(w);
      const auto program = compile(w.recommended, targets, config_.movement, busy_next);
      const bool overridden = action.targets && *action.targets != program_targets(w);
      auto r = run_program(program, action, overridden ? "warning_override" : "warning", id);
      log_transition(detector_.confirm(id, now));
      if (w.recommended == FacilitationType::LeaderElection) stage_.leader_elected = true;
      if (w.recommended == FacilitationType::ParticipationBalanceBasic) {
        watches_.push_back({id, busy_until_.at(program.commands.front().stand), {}, false});
      }
      return r;
    }
    case OperatorVerb::Manual: {
      if (!action.facilitation) throw Error(Errc::InvalidArgument, "manual action needs a facilitation");
      const auto type = *action.facilitation;
      std::vector<ParticipantId> targets;
      if (action.targets) {
        targets = *action.targets;
      } else if (type == FacilitationType::Icebreaking || type == FacilitationType::Farewell ||
                 type == FacilitationType::SilenceBreaking) {
        targets = seating_order();
      }
      const auto program = compile(type, targets, config_.movement, busy_next);
      auto r = run_program(program, action, "manual", std::nullopt);
      if (type == FacilitationType::LeaderElection) stage_.leader_elected = true;
      return r;
    }
    case OperatorVerb::Direct: {
      if (!action.stand || !action.command.is_object()) {
        throw Error(Errc::InvalidArgument, "direct action needs a stand and a command");
      }
      const auto verb = parse_verb(action.command.value("verb", std::string()),
                                   action.command.value("args", nlohmann::json::object()));
      if (busy_next.count(*action.stand) && !action.force) {
        throw Error(Errc::StandBusy, "stand " + action.stand->label() + " is executing a program");
      }
      ActionResult r;
      if (gateway_) r.ack = gateway_->direct_command(*action.stand, verb, action.force);
      nlohmann::json entry{{"t", now},
                           {"source", "direct"},
                           {"operator", action.operator_id},
                           {"stand", action.stand->label()},
                           {"verb", verb_name(verb)},
                           {"args", verb_args(verb)},
                           {"force", action.force}};
      program_log_.push_back(entry.dump());
      emit({{"type", "state"}, {"stands", stands_json()}});
      r.ok = true;
      return r;
    }
    case OperatorVerb::Tickle: {
      if (!action.from || !action.to) throw Error(Errc::InvalidArgument, "tickle needs from and to");
      if (*action.from == *action.to) throw Error(Errc::SelfTickle, "a participant cannot tickle themselves");
      if (busy_next.count(*action.to)) {
        queued_tickles_.push_back({action, busy_until_.at(*action.to) + 1});
        ActionResult r;
        r.ok = true;
        r.queued = true;
        return r;
      }
      const auto program =
          compile(FacilitationType::ConnectionTickle, {*action.from, *action.to}, config_.movement, busy_next);
      return run_program(program, action, "tickle", std::nullopt);
    }
  }
  throw Error(Errc::InvalidArgument, "unknown operator verb");
}

void FacilitationEngine::note_tickle(const TickleEvent& event) {
  std::lock_guard lock(mu_);
  journal_.push_back(nlohmann::json{{"t", session_.clock()},
                                    {"channel", "http"},
                                    {"action", {{"operator", "tickle"}, {"from", event.sender.label()},
                                                {"to", event.receiver.label()}}},
                                    {"ok", true},
                                    {"queued", event.queued}}
                         .dump());
}

nlohmann::json FacilitationEngine::stands_json() const {
  nlohmann::json out = nlohmann::json::array();
  if (gateway_) {
    for (const auto& s : gateway_->states()) out.push_back(to_json(s));
    return out;
  }
  const auto busy = busy_locked(session_.clock() + 1);
  for (auto id : all_participants()) {
    StandState s;
    s.stand = id;
    s.home = config_.movement.table.home_pose(id);
    s.pose = s.home;
    s.busy = busy.count(id) > 0;
    out.push_back(to_json(s));
  }
  return out;
}

nlohmann::json FacilitationEngine::snapshot() const {
  std::lock_guard lock(mu_);
  nlohmann::json warnings = nlohmann::json::array();
  for (const auto& w : detector_.all_warnings()) warnings.push_back(to_json(w));
  nlohmann::json j{{"type", "snapshot"},
                   {"labels", session_.labels()},
                   {"clock", session_.clock()},
                   {"stage", stage_.stage ? nlohmann::json(to_string(*stage_.stage)) : nlohmann::json(nullptr)},
                   {"silence_run", silence_run_},
                   {"warnings", warnings},
                   {"stands", stands_json()},
                   {"programs", program_log_.size()}};
  if (last_features_) {
    j["features"] = to_json(*last_features_);
    j["switches"] = symmetrized(last_features_->turn_counts);
  }
  return j;
}

int FacilitationEngine::clock() const {
  std::lock_guard lock(mu_);
  return session_.clock();
}

std::vector<CircumstanceWarning> FacilitationEngine::warnings() const {
  std::lock_guard lock(mu_);
  return detector_.all_warnings();
}

CircumstanceWarning FacilitationEngine::warning(const std::string& id) const {
  std::lock_guard lock(mu_);
  return detector_.warning(id);
}

std::vector<std::string> FacilitationEngine::warning_log() const {
  std::lock_guard lock(mu_);
  return warning_log_;
}

std::vector<std::string> FacilitationEngine::program_log() const {
  std::lock_guard lock(mu_);
  return program_log_;
}

std::vector<std::string> FacilitationEngine::journal() const {
  std::lock_guard lock(mu_);
  return journal_;
}

std::vector<std::string> FacilitationEngine::feature_log() const {
  std::lock_guard lock(mu_);
  return feature_log_;
}

std::vector<ExecutionReport> FacilitationEngine::execution_reports() const {
  std::lock_guard lock(mu_);
  return reports_;
}

std::size_t FacilitationEngine::programs_dispatched() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& line : program_log_) {
    if (line.find("\"program\":") != std::string::npos) ++n;
  }
  return n;
}

void FacilitationEngine::drain() {
  std::vector<std::future<void>> pending;
  {
    std::lock_guard lock(mu_);
    pending = std::move(background_);
    background_.clear();
  }
  for (auto& f : pending) f.wait();
}

}  // namespace facil
