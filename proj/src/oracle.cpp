#include "facil/oracle.hpp"

#include <cmath>
#include <cstdint>

namespace facil::oracle {

namespace {

long double entropy_by_log_total(std::span<const long double> weights, long double categories) {
  long double total = 0.0L;
  long double weighted_log = 0.0L;
  for (long double w : weights) {
    total += w;
    if (w > 0.0L) weighted_log += w * std::log2(w);
  }
  if (total <= 0.0L) return 0.0L;
  const long double h = std::log2(total) - weighted_log / total;
  return h / std::log2(categories);
}

// a/b < c/d with positive denominators.
bool less_fraction(__int128 a, __int128 b, __int128 c, __int128 d) { return a * d < c * b; }
bool equal_fraction(__int128 a, __int128 b, __int128 c, __int128 d) { return a * d == c * b; }

}  // namespace

long double speech_entropy(std::span<const long double> seconds) {
  if (seconds.size() < 2) return 0.0L;
  return entropy_by_log_total(seconds, static_cast<long double>(seconds.size()));
}

long double speech_entropy(const SpeakingTimes& seconds) {
  std::vector<long double> w(seconds.begin(), seconds.end());
  return speech_entropy(std::span<const long double>(w));
}

long double turn_entropy(const TurnMatrix& counts) {
  std::vector<long double> w;
  for (int a = 0; a < kGroupSize; ++a) {
    for (int b = 0; b < kGroupSize; ++b) {
      if (a != b) w.push_back(counts[a][b]);
    }
  }
  return entropy_by_log_total(w, static_cast<long double>(kGroupSize * (kGroupSize - 1)));
}

Partition partition(const SpeakingTimes& seconds) {
  Partition best;
  bool all_equal = true;
  for (int v : seconds) all_equal = all_equal && v == seconds[0];
  if (all_equal) return best;

  bool have = false;
  __int128 best_num = 0, best_den = 1;
  int best_size = 0;
  __int128 best_sum = 0;
  unsigned best_mask = 0;

  for (unsigned mask = 1; mask + 1 < (1u << kGroupSize); ++mask) {
    __int128 s1 = 0, s2 = 0, sq = 0;
    int n1 = 0, n2 = 0;
    for (int i = 0; i < kGroupSize; ++i) {
      const __int128 v = seconds[i];
      sq += v * v;
      if (mask & (1u << i)) {
        s1 += v;
        ++n1;
      } else {
        s2 += v;
        ++n2;
      }
    }
    // Dominant side has the larger mean; equal means never win (not optimal unless all equal).
    if (s1 * n2 <= s2 * n1) continue;
    // SSE = sq - s1^2/n1 - s2^2/n2  ->  numerator over n1*n2.
    const __int128 num = sq * n1 * n2 - s1 * s1 * n2 - s2 * s2 * n1;
    const __int128 den = static_cast<__int128>(n1) * n2;

    bool better = !have || less_fraction(num, den, best_num, best_den);
    if (have && equal_fraction(num, den, best_num, best_den)) {
      if (n1 != best_size) {
        better = n1 < best_size;
      } else if (s1 != best_sum) {
        better = s1 > best_sum;
      } else {
        // Lexicographically smaller id list == lowest differing bit set in the mask.
        const unsigned diff = mask ^ best_mask;
        better = (mask & (diff & (~diff + 1))) != 0;
      }
    }
    if (better) {
      have = true;
      best_num = num;
      best_den = den;
      best_size = n1;
      best_sum = s1;
      best_mask = mask;
    }
  }

  best.degenerate = false;
  for (int i = 0; i < kGroupSize; ++i) {
    const auto id = ParticipantId::from_slot(i);
    if (best_mask & (1u << i)) {
      best.dominant.push_back(id);
    } else {
      best.non_dominant.push_back(id);
    }
  }
  best.sse = static_cast<long double>(best_num) / static_cast<long double>(best_den);
  return best;
}

}  // namespace facil::oracle
