#include "facil/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "facil/error.hpp"

namespace facil {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::InvalidScenario, what); }

ParticipantId participant(const nlohmann::json& j) {
  if (!j.is_string()) invalid("participant must be a string like \"P1\"");
  try {
    return ParticipantId::parse(j.get<std::string>());
  } catch (const Error& e) {
    invalid(e.what());
  }
}

Speaker speaker(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return participant(j);
}

nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) invalid(path + ": invalid JSON");
  return j;
}

// Portable across standard libraries, unlike <random> distributions.
int uniform(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

int Scenario::total_duration_s() const {
  int total = 0;
  for (const auto& s : segments) total += s.duration_s;
  return total;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) invalid("scenario must be a JSON object");
  Scenario sc;
  try {
    sc.name = j.value("name", std::string("unnamed"));
    sc.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("participants")) sc.participants = j["participants"].get<std::vector<std::string>>();
    for (const auto& seg : j.at("segments")) {
      SpeechSegment s;
      const auto pattern = seg.at("pattern").get<std::string>();
      if (pattern == "silence") {
        s.pattern = SilencePattern{};
      } else if (pattern == "round_robin") {
        s.pattern = RoundRobinPattern{seg.value("turn_len_s", 15), seg.value("jitter_s", 0), seg.value("shuffle", false)};
      } else if (pattern == "monologue") {
        s.pattern = MonologuePattern{participant(seg.at("speaker")), seg.value("share", 0.9)};
      } else if (pattern == "dyad_ping_pong") {
        const auto& pair = seg.at("pair");
        if (!pair.is_array() || pair.size() != 2) invalid("dyad_ping_pong needs a pair");
        s.pattern = DyadPingPongPattern{participant(pair[0]), participant(pair[1]), seg.value("turn_len_s", 5)};
      } else if (pattern == "scripted") {
        ScriptedPattern sp;
        for (const auto& f : seg.at("frames")) sp.frames.push_back(speaker(f));
        s.pattern = std::move(sp);
      } else {
        invalid("unknown pattern: " + pattern);
      }
      if (seg.contains("duration_s")) {
        s.duration_s = seg["duration_s"].get<int>();
      } else if (auto* sp = std::get_if<ScriptedPattern>(&s.pattern)) {
        s.duration_s = static_cast<int>(sp->frames.size());
      } else {
        invalid("segment needs duration_s");
      }
      sc.segments.push_back(std::move(s));
    }
    for (const auto& ev : j.value("events", nlohmann::json::array())) {
      auto item = parse_stream_line(ev.dump());
      if (!std::holds_alternative<SessionEvent>(item)) invalid("events must be session events");
      sc.events.push_back(std::get<SessionEvent>(item));
    }
    for (const auto& op : j.value("operator", nlohmann::json::array())) {
      auto item = parse_stream_line(op.dump());
      if (!std::holds_alternative<OperatorAction>(item)) invalid("operator entries must be operator actions");
      sc.operator_actions.push_back(std::get<OperatorAction>(item));
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("scenario: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidScenario) throw;
    invalid(e.what());
  }
  validate(sc);
  return sc;
}

Scenario load_scenario(const std::string& path) { return scenario_from_json(parse_file(path)); }

nlohmann::json to_json(const Scenario& sc) {
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& s : sc.segments) {
    nlohmann::json js = std::visit(
        overloaded{
            [](const SilencePattern&) { return nlohmann::json{{"pattern", "silence"}}; },
            [](const RoundRobinPattern& p) {
              return nlohmann::json{{"pattern", "round_robin"},
                                    {"turn_len_s", p.turn_len_s},
                                    {"jitter_s", p.jitter_s},
                                    {"shuffle", p.shuffle}};
            },
            [](const MonologuePattern& p) {
              return nlohmann::json{{"pattern", "monologue"}, {"speaker", p.speaker.label()}, {"share", p.share}};
            },
            [](const DyadPingPongPattern& p) {
              return nlohmann::json{
                  {"pattern", "dyad_ping_pong"}, {"pair", {p.a.label(), p.b.label()}}, {"turn_len_s", p.turn_len_s}};
            },
            [](const ScriptedPattern& p) {
              nlohmann::json frames = nlohmann::json::array();
              for (const auto& f : p.frames) frames.push_back(f ? nlohmann::json(f->label()) : nlohmann::json(nullptr));
              return nlohmann::json{{"pattern", "scripted"}, {"frames", frames}};
            },
        },
        s.pattern);
    js["duration_s"] = s.duration_s;
    segments.push_back(std::move(js));
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : sc.events) events.push_back(to_json(e));
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& a : sc.operator_actions) ops.push_back(to_json(a));
  return {{"name", sc.name},
          {"seed", sc.seed},
          {"participants", sc.participants},
          {"segments", segments},
          {"events", events},
          {"operator", ops}};
}

void validate(const Scenario& sc) {
  if (sc.participants.size() != kGroupSize) invalid("scenario needs four participants");
  if (sc.segments.empty()) invalid("scenario has no segments");
  for (const auto& s : sc.segments) {
    if (s.duration_s <= 0) invalid("segment durations must be positive");
    std::visit(overloaded{
                   [](const SilencePattern&) {},
                   [](const RoundRobinPattern& p) {
                     if (p.turn_len_s <= 0 || p.jitter_s < 0) invalid("round_robin turn length must be positive");
                   },
                   [](const MonologuePattern& p) {
                     if (!(p.share > 0.0 && p.share <= 1.0)) invalid("monologue share must lie in (0, 1]");
                   },
                   [](const DyadPingPongPattern& p) {
                     if (p.a == p.b) invalid("dyad_ping_pong needs two distinct participants");
                     if (p.turn_len_s <= 0) invalid("dyad_ping_pong turn length must be positive");
                   },
                   [&](const ScriptedPattern& p) {
                     if (static_cast<int>(p.frames.size()) != s.duration_s) {
                       invalid("scripted frames must match duration_s");
                     }
                   },
               },
               s.pattern);
  }
  int last = -1;
  for (const auto& e : sc.events) {
    if (e.t < 0 || e.t < last) invalid("events must be in time order");
    last = e.t;
  }
  last = -1;
  for (const auto& a : sc.operator_actions) {
    if (a.t < 0 || a.t < last) invalid("operator actions must be in time order");
    last = a.t;
  }
}

std::vector<Speaker> generate_frames(const Scenario& sc) {
  validate(sc);
  std::mt19937_64 rng(sc.seed);
  std::vector<Speaker> out;
  out.reserve(static_cast<std::size_t>(sc.total_duration_s()));
  for (const auto& seg : sc.segments) {
    const int n = seg.duration_s;
    std::visit(overloaded{
                   [&](const SilencePattern&) { out.insert(out.end(), n, std::nullopt); },
                   [&](const RoundRobinPattern& p) {
                     auto order = all_participants();
                     int produced = 0;
                     std::size_t k = 0;
                     while (produced < n) {
                       if (k % kGroupSize == 0 && p.shuffle) {
                         for (int i = kGroupSize - 1; i > 0; --i) std::swap(order[i], order[uniform(rng, 0, i)]);
                       }
                       const int len = std::max(1, p.turn_len_s + (p.jitter_s ? uniform(rng, -p.jitter_s, p.jitter_s) : 0));
                       const int take = std::min(len, n - produced);
                       out.insert(out.end(), take, order[k % kGroupSize]);
                       produced += take;
                       ++k;
                     }
                   },
                   [&](const MonologuePattern& p) {
                     std::vector<ParticipantId> others;
                     for (auto id : all_participants()) {
                       if (id != p.speaker) others.push_back(id);
                     }
                     const long long interjections = n - std::llround(p.share * n);
                     std::size_t next_other = 0;
                     // Spread the other speakers' seconds evenly through the segment.
                     for (long long i = 0; i < n; ++i) {
                       if ((i + 1) * interjections / n > i * interjections / n) {
                         out.push_back(others[next_other++ % others.size()]);
                       } else {
                         out.push_back(p.speaker);
                       }
                     }
                   },
                   [&](const DyadPingPongPattern& p) {
                     for (int i = 0; i < n; ++i) out.push_back((i / p.turn_len_s) % 2 == 0 ? p.a : p.b);
                   },
                   [&](const ScriptedPattern& p) { out.insert(out.end(), p.frames.begin(), p.frames.end()); },
               },
               seg.pattern);
  }
  return out;
}

std::vector<StreamItem> generate(const Scenario& sc) {
  const auto frames = generate_frames(sc);
  std::vector<StreamItem> items;
  items.push_back(ParticipantsHeader{sc.participants});
  std::size_t e = 0;
  std::size_t a = 0;
  for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
    while (e < sc.events.size() && sc.events[e].t <= t) items.push_back(sc.events[e++]);
    items.push_back(DiarizationFrame{t, frames[static_cast<std::size_t>(t)]});
    while (a < sc.operator_actions.size() && sc.operator_actions[a].t <= t) items.push_back(sc.operator_actions[a++]);
  }
  while (e < sc.events.size() || a < sc.operator_actions.size()) {
    const bool event_first = a >= sc.operator_actions.size() ||
                             (e < sc.events.size() && sc.events[e].t <= sc.operator_actions[a].t);
    if (event_first) {
      items.push_back(sc.events[e++]);
    } else {
      items.push_back(sc.operator_actions[a++]);
    }
  }
  return items;
}

Expectation expectation_from_json(const nlohmann::json& j) {
  Expectation ex;
  try {
    for (const auto& w : j.value("warnings", nlohmann::json::array())) {
      ExpectedWarning ew;
      ew.t = w.at("t").get<int>();
      ew.kind = parse_warning_kind(w.at("kind").get<std::string>());
      for (const auto& t : w.value("targets", nlohmann::json::array())) ew.targets.push_back(participant(t));
      ew.tolerance_s = w.value("tolerance_s", 0);
      ex.warnings.push_back(std::move(ew));
    }
    if (j.contains("kinds")) {
      ex.kinds.emplace();
      for (const auto& k : j["kinds"]) ex.kinds->insert(parse_warning_kind(k.get<std::string>()));
    }
    const auto counts = j.value("counts", nlohmann::json::object());
    for (const auto& [k, v] : counts.items()) {
      ex.counts[parse_warning_kind(k)] = v.get<int>();
    }
    if (j.contains("escalations")) ex.escalations = j["escalations"].get<int>();
    if (j.contains("programs")) ex.programs = j["programs"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("expectation: ") + e.what());
  }
  return ex;
}

Expectation load_expectation(const std::string& path) { return expectation_from_json(parse_file(path)); }

ScenarioRun run_stream(const std::vector<StreamItem>& items, const EngineConfig& config, StandGateway* gateway) {
  std::vector<std::string> labels = {"P1", "P2", "P3", "P4"};
  if (!items.empty()) {
    if (const auto* h = std::get_if<ParticipantsHeader>(&items.front())) labels = h->labels;
  }
  FacilitationEngine engine(labels, config, gateway);
  for (const auto& item : items) engine.ingest(item);
  engine.drain();
  ScenarioRun run;
  run.warnings = engine.warnings();
  run.warning_log = engine.warning_log();
  run.program_log = engine.program_log();
  run.journal = engine.journal();
  run.feature_log = engine.feature_log();
  run.programs = engine.programs_dispatched();
  return run;
}

ScenarioRun run_scenario(const Scenario& scenario, const EngineConfig& config, StandGateway* gateway) {
  return run_stream(generate(scenario), config, gateway);
}

std::vector<std::string> check_expectation(const Expectation& ex, const ScenarioRun& run) {
  std::vector<std::string> out;
  auto sorted = [](std::vector<ParticipantId> v) {
    std::sort(v.begin(), v.end());
    return v;
  };

  std::set<WarningKind> kinds;
  std::map<WarningKind, int> counts;
  int escalations = 0;
  for (const auto& w : run.warnings) {
    kinds.insert(w.kind);
    ++counts[w.kind];
    if (w.escalation_of) ++escalations;
  }
  if (ex.kinds && kinds != *ex.kinds) {
    std::string got, want;
    for (auto k : kinds) got += std::string(to_string(k)) + " ";
    for (auto k : *ex.kinds) want += std::string(to_string(k)) + " ";
    out.push_back("kinds: got {" + got + "} want {" + want + "}");
  }
  for (const auto& [kind, n] : ex.counts) {
    if (counts[kind] != n) {
      out.push_back(std::string(to_string(kind)) + ": got " + std::to_string(counts[kind]) + " want " +
                    std::to_string(n));
    }
  }
  for (const auto& e : ex.warnings) {
    const bool found = std::any_of(run.warnings.begin(), run.warnings.end(), [&](const CircumstanceWarning& w) {
      return w.kind == e.kind && std::abs(w.t - e.t) <= e.tolerance_s &&
             (e.targets.empty() || sorted(w.targets) == sorted(e.targets));
    });
    if (!found) {
      out.push_back("missing " + std::string(to_string(e.kind)) + " at t=" + std::to_string(e.t) + " +/- " +
                    std::to_string(e.tolerance_s) + " targets " + targets_json(e.targets).dump());
    }
  }
  if (ex.escalations && *ex.escalations != escalations) {
    out.push_back("escalations: got " + std::to_string(escalations) + " want " + std::to_string(*ex.escalations));
  }
  if (ex.programs && static_cast<std::size_t>(*ex.programs) != run.programs) {
    out.push_back("programs: got " + std::to_string(run.programs) + " want " + std::to_string(*ex.programs));
  }
  return out;
}

}  // namespace facil
