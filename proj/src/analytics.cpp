#include "facil/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "facil/error.hpp"

namespace facil {

SessionLog session_log_from_stream(const std::vector<StreamItem>& items) {
  SessionLog log;
  if (!items.empty()) {
    if (const auto* h = std::get_if<ParticipantsHeader>(&items.front())) log.labels = h->labels;
  }
  auto session = Session::register_session(log.labels);
  for (const auto& item : items) {
    if (const auto* f = std::get_if<DiarizationFrame>(&item)) {
      session.push_frame(*f);
    } else if (const auto* e = std::get_if<SessionEvent>(&item)) {
      session.push_event(*e);
      log.events.push_back(*e);
    }
  }
  log.matrix = session.snapshot();
  return log;
}

SessionLog load_session_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path);
  return session_log_from_stream(read_stream(in));
}

namespace {

std::optional<int> stage_mark(const SessionLog& log, Stage stage) {
  for (const auto& e : log.events) {
    if (e.kind == EventKind::StageMark && e.stage == stage) return e.t;
  }
  return std::nullopt;
}

std::optional<int> first_event(const SessionLog& log, EventKind kind) {
  for (const auto& e : log.events) {
    if (e.kind == kind) return e.t;
  }
  return std::nullopt;
}

int voiced(const SpeechActivityMatrix& m, int begin, int end) {
  int n = 0;
  for (int t = std::max(0, begin); t < std::min(end, m.rows()); ++t) n += m.silent_at(t) ? 0 : 1;
  return n;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::vector<StageStat> stage_report(const SessionLog& log) {
  constexpr std::array<Stage, 4> stages = {Stage::Forming, Stage::Storming, Stage::NormingPerforming,
                                           Stage::Adjourning};
  std::array<int, 4> starts{};
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto t = stage_mark(log, stages[i]);
    if (!t) throw Error(Errc::MissingStageMark, std::string("no ") + to_string(stages[i]) + " mark");
    starts[i] = *t;
  }
  int session_end = log.matrix.rows();
  if (const auto end = first_event(log, EventKind::SessionEnd)) session_end = std::min(session_end, *end);

  std::vector<StageStat> out;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    StageStat s;
    s.stage = stages[i];
    s.start_t = starts[i];
    s.end_t = std::max(s.start_t, i + 1 < stages.size() ? starts[i + 1] : session_end);
    const int span = s.end_t - s.start_t;
    s.voiced_s = voiced(log.matrix, s.start_t, s.end_t);
    s.duration_minutes = span / 60.0;
    s.scr = span > 0 ? static_cast<double>(s.voiced_s) / span : 0.0;
    out.push_back(s);
  }
  return out;
}

SubstageBoundaries segment_substages(const SessionLog& log, const SubstageConfig& config) {
  const auto np = stage_mark(log, Stage::NormingPerforming);
  if (!np) throw Error(Errc::MissingStageMark, "no norming_performing mark");
  const auto alert = first_event(log, EventKind::CountdownAlert);
  if (!alert) throw Error(Errc::MissingCountdownAlert, "no countdown alert");

  SubstageBoundaries b;
  b.t0 = *np;
  b.t2 = std::max(*alert, b.t0);
  b.t_end = log.matrix.rows();
  for (const auto& e : log.events) {
    const bool closes = e.kind == EventKind::SessionEnd || (e.kind == EventKind::TaskComplete && e.t >= b.t2) ||
                        (e.kind == EventKind::StageMark && e.stage == Stage::Adjourning);
    if (closes) b.t_end = std::min(b.t_end, e.t);
  }
  b.t_end = std::max(b.t_end, b.t2);

  // Regular operation starts at the first speech onset that breaks a silence
  // (or opens the stage) and leads into an exchange among enough speakers.
  const auto& m = log.matrix;
  b.t1 = b.t2;
  for (int s = b.t0; s < std::min(b.t2, m.rows()); ++s) {
    if (m.silent_at(s)) continue;
    if (s != b.t0 && !m.silent_at(s - 1)) continue;
    std::set<int> speakers;
    for (int t = s; t < std::min({s + config.span_s, b.t2, m.rows()}); ++t) {
      if (const auto sp = m.speaker_at(t)) speakers.insert(sp->slot());
    }
    if (static_cast<int>(speakers.size()) >= config.min_speakers) {
      b.t1 = s;
      break;
    }
  }
  return b;
}

SegmentMetrics segment_mean(const std::vector<WindowFeatures>& dump, const std::string& name, int begin, int end) {
  SegmentMetrics s;
  s.name = name;
  s.begin = begin;
  s.end = end;
  for (const auto& f : dump) {
    if (f.t_end < begin || f.t_end >= end) continue;
    ++s.ticks;
    s.scr += f.scr;
    s.h_speech += f.h_speech;
    s.h_turn += f.h_turn;
  }
  if (s.ticks == 0) {
    throw Error(Errc::EmptySegment, name + " [" + std::to_string(begin) + ", " + std::to_string(end) + ") has no ticks");
  }
  s.scr /= s.ticks;
  s.h_speech /= s.ticks;
  s.h_turn /= s.ticks;
  return s;
}

std::vector<SegmentMetrics> segment_metrics(const std::vector<WindowFeatures>& dump, const SubstageBoundaries& b) {
  return {segment_mean(dump, "initialization", b.t0, b.t1), segment_mean(dump, "regular", b.t1, b.t2),
          segment_mean(dump, "countdown", b.t2, b.t_end)};
}

OnenessResult oneness(const OnenessRatings& r) {
  OnenessResult out;
  for (int i = 0; i < kGroupSize; ++i) {
    double lowest = 0.0;
    for (int j = 0; j < kGroupSize; ++j) {
      if (i == j) continue;
      const auto& ios = r.ios[i][j];
      const auto& we = r.we_scale[i][j];
      if (!ios || !we) {
        throw Error(Errc::IncompleteRatings, "missing rating of P" + std::to_string(j + 1) + " by P" +
                                                 std::to_string(i + 1));
      }
      if (*ios < 1 || *ios > 7 || *we < 1 || *we > 7) throw Error(Errc::InvalidArgument, "ratings must lie in [1, 7]");
      out.pairwise[i][j] = (*ios + *we) / 2.0;
      lowest = (j == (i == 0 ? 1 : 0)) ? out.pairwise[i][j] : std::min(lowest, out.pairwise[i][j]);
    }
    out.per_member_min[i] = lowest;
  }
  out.group = std::accumulate(out.per_member_min.begin(), out.per_member_min.end(), 0.0) / kGroupSize;
  return out;
}

PeerEvalStats peer_eval_sd(const std::vector<std::array<int, kGroupSize>>& allocations) {
  PeerEvalStats out;
  for (const auto& a : allocations) {
    const int sum = std::accumulate(a.begin(), a.end(), 0);
    const bool negative = std::any_of(a.begin(), a.end(), [](int v) { return v < 0; });
    if (sum != 100 || negative) throw Error(Errc::BadAllocation, "allocation sums to " + std::to_string(sum));
    const double mean = sum / static_cast<double>(kGroupSize);
    double var = 0.0;
    for (int v : a) var += (v - mean) * (v - mean);
    out.per_rater_sd.push_back(std::sqrt(var / kGroupSize));
  }
  if (!out.per_rater_sd.empty()) {
    out.mean_sd = std::accumulate(out.per_rater_sd.begin(), out.per_rater_sd.end(), 0.0) / out.per_rater_sd.size();
  }
  return out;
}

namespace {

RatingMatrix rating_matrix(const nlohmann::json& j, const char* name) {
  RatingMatrix m{};
  if (!j.is_array() || j.size() != kGroupSize) throw Error(Errc::ParseError, std::string(name) + " must be 4x4");
  for (int i = 0; i < kGroupSize; ++i) {
    if (!j[i].is_array() || j[i].size() != kGroupSize) throw Error(Errc::ParseError, std::string(name) + " must be 4x4");
    for (int k = 0; k < kGroupSize; ++k) {
      if (!j[i][k].is_null()) m[i][k] = j[i][k].get<int>();
    }
  }
  return m;
}

}  // namespace

RatingsFile ratings_from_json(const nlohmann::json& j) {
  RatingsFile out;
  try {
    if (j.contains("ios") || j.contains("we_scale")) {
      out.oneness = OnenessRatings{rating_matrix(j.value("ios", nlohmann::json()), "ios"),
                                   rating_matrix(j.value("we_scale", nlohmann::json()), "we_scale")};
    }
    for (const auto& a : j.value("peer_allocations", nlohmann::json::array())) {
      const auto v = a.get<std::vector<int>>();
      if (v.size() != kGroupSize) throw Error(Errc::BadAllocation, "allocation needs four entries");
      out.peer_allocations.push_back({v[0], v[1], v[2], v[3]});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("ratings: ") + e.what());
  }
  return out;
}

RatingsFile load_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ParseError, path + ": invalid JSON");
  return ratings_from_json(j);
}

std::string stage_report_csv(const std::vector<StageStat>& stats) {
  std::ostringstream out;
  out << "stage,start_t,end_t,duration_minutes,scr\n";
  for (const auto& s : stats) {
    out << to_string(s.stage) << ',' << s.start_t << ',' << s.end_t << ',' << fixed2(s.duration_minutes) << ','
        << fixed2(s.scr) << '\n';
  }
  return out.str();
}

std::string segment_metrics_csv(const std::vector<SegmentMetrics>& metrics) {
  std::ostringstream out;
  out << "segment,begin,end,ticks,scr,h_speech,h_turn\n";
  for (const auto& m : metrics) {
    out << m.name << ',' << m.begin << ',' << m.end << ',' << m.ticks << ',' << fixed4(m.scr) << ','
        << fixed4(m.h_speech) << ',' << fixed4(m.h_turn) << '\n';
  }
  return out.str();
}

std::string oneness_csv(const OnenessResult& r) {
  std::ostringstream out;
  out << "member,min_oneness\n";
  for (int i = 0; i < kGroupSize; ++i) out << 'P' << (i + 1) << ',' << fixed4(r.per_member_min[i]) << '\n';
  out << "group," << fixed4(r.group) << '\n';
  return out.str();
}

std::string peer_sd_csv(const PeerEvalStats& s) {
  std::ostringstream out;
  out << "rater,sd\n";
  for (std::size_t i = 0; i < s.per_rater_sd.size(); ++i) out << 'P' << (i + 1) << ',' << fixed4(s.per_rater_sd[i]) << '\n';
  out << "mean," << fixed4(s.mean_sd) << '\n';
  return out.str();
}

}  // namespace facil
