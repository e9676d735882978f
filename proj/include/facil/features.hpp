#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "facil/session.hpp"
#include "facil/types.hpp"

namespace facil {

struct FeatureConfig {
  /// Evaluation window; rows [max(0, t - window_s + 1), t].
  int window_s = 60;
  /// Longest silence that still links two speech runs into a turn transition.
  int turn_gap_s = 10;
};

/// Min-SSE split of speaking times into dominant / non-dominant speakers.
struct DominancePartition {
  bool degenerate = true;
  std::vector<ParticipantId> dominant;
  std::vector<ParticipantId> non_dominant;
  /// Cluster-mean gap over pooled within-cluster spread (spread floored at 1 s).
  double separation = 0.0;
};

/// One evaluation over a sliding window ending at t_end.
struct WindowFeatures {
  int t_end = 0;
  int window_len = 0;
  SpeakingTimes speaking_time{};
  double scr = 0.0;
  double h_speech = 0.0;
  TurnMatrix turn_counts{};
  double h_turn = 0.0;
  DominancePartition dominance;
};

/// Normalised Shannon entropy of speaking shares, 0 when nobody spoke.
double speech_entropy(std::span<const double> seconds);
double speech_entropy(const SpeakingTimes& seconds);

/// Normalised entropy of directed turn shares over the N(N-1) ordered pairs.
double turn_entropy(const TurnMatrix& counts);

/// Counts a -> b whenever a speech run of a is followed by a run of b after at
/// most turn_gap_s silent seconds. Same-speaker resumption is not a turn.
TurnMatrix count_turns(std::span<const Speaker> frames, int turn_gap_s = 10);

/// Exact 1-D 2-means over the four speaking times. Ties in SSE go to the
/// smaller dominant set; equal times are ordered by participant id.
DominancePartition dominance_partition(const SpeakingTimes& seconds);

WindowFeatures evaluate_window(const SpeechActivityMatrix& matrix, int t,
                               const FeatureConfig& config = {});

/// Per-tick features for every row of the matrix.
std::vector<WindowFeatures> feature_dump(const SpeechActivityMatrix& matrix,
                                         const FeatureConfig& config = {});

/// {"t","scr","h_speech","h_turn","T","C","dominant"}
nlohmann::json to_json(const WindowFeatures& features);

}  // namespace facil
