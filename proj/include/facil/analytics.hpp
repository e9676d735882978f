#pragma once

// Offline measures over a finished session: stage durations and coverage,
// substage segmentation with windowed means, oneness and peer-evaluation SD.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "facil/features.hpp"
#include "facil/session.hpp"
#include "facil/stream.hpp"

namespace facil {

/// Frames and events of one session, validated through Session.
struct SessionLog {
  std::vector<std::string> labels = {"P1", "P2", "P3", "P4"};
  SpeechActivityMatrix matrix;
  std::vector<SessionEvent> events;
};

/// Operator actions in the stream are skipped.
SessionLog session_log_from_stream(const std::vector<StreamItem>& items);
SessionLog load_session_log(const std::string& path);

struct StageStat {
  Stage stage = Stage::Forming;
  int start_t = 0;
  int end_t = 0;  // exclusive
  int voiced_s = 0;
  double duration_minutes = 0.0;
  double scr = 0.0;
};

/// Throws MissingStageMark unless all four stages are marked.
std::vector<StageStat> stage_report(const SessionLog& log);

struct SubstageConfig {
  /// An exchange counts once this many distinct speakers talk within span_s.
  int min_speakers = 3;
  int span_s = 120;
};

/// Half-open second ranges inside the norming/performing stage.
struct SubstageBoundaries {
  int t0 = 0;
  int t1 = 0;
  int t2 = 0;
  int t_end = 0;
};

SubstageBoundaries segment_substages(const SessionLog& log, const SubstageConfig& config = {});

struct SegmentMetrics {
  std::string name;
  int begin = 0;
  int end = 0;
  int ticks = 0;
  double scr = 0.0;
  double h_speech = 0.0;
  double h_turn = 0.0;
};

/// Means of per-tick window features with t in each segment. Throws EmptySegment.
std::vector<SegmentMetrics> segment_metrics(const std::vector<WindowFeatures>& dump,
                                            const SubstageBoundaries& boundaries);
SegmentMetrics segment_mean(const std::vector<WindowFeatures>& dump, const std::string& name, int begin, int end);

using RatingMatrix = std::array<std::array<std::optional<int>, kGroupSize>, kGroupSize>;

/// Row i holds member i's ratings of every other member; the diagonal is unused.
struct OnenessRatings {
  RatingMatrix ios{};
  RatingMatrix we_scale{};
};

struct OnenessResult {
  std::array<std::array<double, kGroupSize>, kGroupSize> pairwise{};
  std::array<double, kGroupSize> per_member_min{};
  double group = 0.0;
};

/// Throws IncompleteRatings on a missing off-diagonal cell, InvalidArgument outside [1, 7].
OnenessResult oneness(const OnenessRatings& ratings);

struct PeerEvalStats {
  std::vector<double> per_rater_sd;
  double mean_sd = 0.0;
};

/// Population SD of each rater's allocation. Throws BadAllocation unless each
/// vector is non-negative and sums to exactly 100.
PeerEvalStats peer_eval_sd(const std::vector<std::array<int, kGroupSize>>& allocations);

struct RatingsFile {
  std::optional<OnenessRatings> oneness;
  std::vector<std::array<int, kGroupSize>> peer_allocations;
};

/// {"ios": 4x4, "we_scale": 4x4, "peer_allocations": [[4 ints], ...]}; null marks a missing cell.
RatingsFile ratings_from_json(const nlohmann::json& j);
RatingsFile load_ratings(const std::string& path);

std::string stage_report_csv(const std::vector<StageStat>& stats);
std::string segment_metrics_csv(const std::vector<SegmentMetrics>& metrics);
std::string oneness_csv(const OnenessResult& result);
std::string peer_sd_csv(const PeerEvalStats& stats);

}  // namespace facil
