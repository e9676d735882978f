#include "facil/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "facil/error.hpp"

namespace facil {

namespace {

double normalised_entropy(std::span<const double> weights, double total, double categories) {
  double h = 0.0;
  for (double w : weights) {
    if (w <= 0.0) continue;
    const double p = w / total;
    h -= p * std::log2(p);
  }
  return std::clamp(h / std::log2(categories), 0.0, 1.0);
}

}  // namespace

double speech_entropy(std::span<const double> seconds) {
  double total = 0.0;
  for (double s : seconds) {
    if (s < 0.0 || std::isnan(s)) throw Error(Errc::NegativeDuration, "speaking time must be >= 0");
    total += s;
  }
  if (total <= 0.0 || seconds.size() < 2) return 0.0;
  return normalised_entropy(seconds, total, static_cast<double>(seconds.size()));
}

double speech_entropy(const SpeakingTimes& seconds) {
  std::array<double, kGroupSize> as_double{};
  std::copy(seconds.begin(), seconds.end(), as_double.begin());
  return speech_entropy(std::span<const double>(as_double));
}

double turn_entropy(const TurnMatrix& counts) {
  std::vector<double> off_diagonal;
  off_diagonal.reserve(kGroupSize * (kGroupSize - 1));
  double total = 0.0;
  for (int a = 0; a < kGroupSize; ++a) {
    for (int b = 0; b < kGroupSize; ++b) {
      const int c = counts[a][b];
      if (a == b) {
        if (c != 0) throw Error(Errc::NonzeroDiagonal, "self-transition count on P" + std::to_string(a + 1));
        continue;
      }
      if (c < 0) throw Error(Errc::InvalidArgument, "negative turn count");
      off_diagonal.push_back(c);
      total += c;
    }
  }
  if (total <= 0.0) return 0.0;
  return normalised_entropy(off_diagonal, total, kGroupSize * (kGroupSize - 1));
}

TurnMatrix count_turns(std::span<const Speaker> frames, int turn_gap_s) {
  TurnMatrix counts{};
  int last_slot = -1;
  std::ptrdiff_t last_index = 0;
  for (std::ptrdiff_t i = 0; i < std::ssize(frames); ++i) {
    const auto& speaker = frames[static_cast<std::size_t>(i)];
    if (!speaker) continue;
    const int slot = speaker->slot();
    if (last_slot >= 0 && slot != last_slot && (i - last_index - 1) <= turn_gap_s) {
      ++counts[last_slot][slot];
    }
    last_slot = slot;
    last_index = i;
  }
  return counts;
}

DominancePartition dominance_partition(const SpeakingTimes& seconds) {
  for (int s : seconds) {
    if (s < 0) throw Error(Errc::NegativeDuration, "speaking time must be >= 0");
  }
  DominancePartition out;
  if (std::all_of(seconds.begin(), seconds.end(), [&](int s) { return s == seconds[0]; })) {
    return out;
  }

  std::array<int, kGroupSize> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return seconds[a] > seconds[b]; });

  // 6 * SSE stays integral for cluster sizes 1..3.
  std::int64_t sum_sq = 0;
  for (int s : seconds) sum_sq += std::int64_t{s} * s;
  const std::int64_t total = std::accumulate(seconds.begin(), seconds.end(), std::int64_t{0});

  int best_k = 0;
  std::int64_t best_sse6 = 0;
  std::int64_t head = 0;
  for (int k = 1; k < kGroupSize; ++k) {
    head += seconds[order[k - 1]];
    const std::int64_t tail = total - head;
    const std::int64_t sse6 = 6 * sum_sq - (6 / k) * head * head - (6 / (kGroupSize - k)) * tail * tail;
    if (best_k == 0 || sse6 < best_sse6) {
      best_k = k;
      best_sse6 = sse6;
    }
  }

  out.degenerate = false;
  double dominant_sum = 0.0;
  for (int i = 0; i < kGroupSize; ++i) {
    const auto id = ParticipantId::from_slot(order[i]);
    if (i < best_k) {
      out.dominant.push_back(id);
      dominant_sum += seconds[order[i]];
    } else {
      out.non_dominant.push_back(id);
    }
  }
  std::sort(out.dominant.begin(), out.dominant.end());
  std::sort(out.non_dominant.begin(), out.non_dominant.end());

  const double dominant_mean = dominant_sum / best_k;
  const double other_mean = (static_cast<double>(total) - dominant_sum) / (kGroupSize - best_k);
  const double spread = std::sqrt(static_cast<double>(best_sse6) / 6.0 / kGroupSize);
  out.separation = (dominant_mean - other_mean) / std::max(1.0, spread);
  return out;
}

WindowFeatures evaluate_window(const SpeechActivityMatrix& matrix, int t, const FeatureConfig& config) {
  if (matrix.empty()) throw Error(Errc::EmptyMatrix, "no frames ingested");
  if (t < 0 || t >= matrix.rows()) {
    throw Error(Errc::InvalidArgument, "tick t=" + std::to_string(t) + " outside matrix of " +
                                           std::to_string(matrix.rows()) + " rows");
  }
  const int begin = std::max(0, t - config.window_s + 1);
  const auto window = matrix.slice(begin, t + 1);

  WindowFeatures f;
  f.t_end = t;
  f.window_len = t - begin + 1;
  int voiced = 0;
  for (const auto& speaker : window) {
    if (!speaker) continue;
    ++voiced;
    ++f.speaking_time[speaker->slot()];
  }
  f.scr = static_cast<double>(voiced) / f.window_len;
  f.h_speech = speech_entropy(f.speaking_time);
  f.turn_counts = count_turns(window, config.turn_gap_s);
  f.h_turn = turn_entropy(f.turn_counts);
  f.dominance = dominance_partition(f.speaking_time);
  return f;
}

std::vector<WindowFeatures> feature_dump(const SpeechActivityMatrix& matrix, const FeatureConfig& config) {
  std::vector<WindowFeatures> out;
  out.reserve(static_cast<std::size_t>(matrix.rows()));
  for (int t = 0; t < matrix.rows(); ++t) out.push_back(evaluate_window(matrix, t, config));
  return out;
}

nlohmann::json to_json(const WindowFeatures& f) {
  nlohmann::json dominant = nlohmann::json::array();
  for (auto id : f.dominance.dominant) dominant.push_back(id.label());
  return {
      {"t", f.t_end},
      {"scr", f.scr},
      {"h_speech", f.h_speech},
      {"h_turn", f.h_turn},
      {"T", f.speaking_time},
      {"C", f.turn_counts},
      {"dominant", dominant},
  };
}

}  // namespace facil
