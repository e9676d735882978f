#pragma once

// Reference implementations used by the test suites to check the engine.
// Deliberately written along a different algebraic route than the engine:
// entropies via log2(S) - (1/S) * sum(T log2 T) in long double, and the
// dominance split by enumerating every bipartition with exact rationals.

#include <span>
#include <vector>

#include "facil/types.hpp"

namespace facil::oracle {

long double speech_entropy(std::span<const long double> seconds);
long double speech_entropy(const SpeakingTimes& seconds);
long double turn_entropy(const TurnMatrix& counts);

struct Partition {
  bool degenerate = true;
  std::vector<ParticipantId> dominant;
  std::vector<ParticipantId> non_dominant;
  long double sse = 0.0L;
};

/// Min-SSE bipartition over all 2^4 labelings. Ties: smaller dominant set,
/// then larger dominant total, then lexicographically smaller ids.
Partition partition(const SpeakingTimes& seconds);

}  // namespace facil::oracle
