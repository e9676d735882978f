#pragma once

#include <stdexcept>
#include <string>

namespace facil {

enum class Errc {
  InvalidArgument,
  ParseError,
  // session ingest
  DuplicateLabel,
  WrongGroupSize,
  OutOfOrderFrame,
  GapDetected,
  OutOfOrderEvent,
  EventInFuture,
  StageOrderViolation,
  DuplicateCountdownAlert,
  SessionEnded,
  // window features
  EmptyMatrix,
  NegativeDuration,
  NonzeroDiagonal,
  // detector
  OutOfOrderTick,
  UnknownWarning,
  AlreadyTerminal,
  // planner / gateway
  ArityMismatch,
  StandBusy,
  LinkLost,
  Obstructed,
  SelfTickle,
  ChecksumMismatch,
  OperatorSessionActive,
  Unauthorized,
  // scenario / analytics
  InvalidScenario,
  MissingStageMark,
  MissingCountdownAlert,
  EmptySegment,
  IncompleteRatings,
  BadAllocation,
};

const char* to_string(Errc code);

/// The single exception type thrown across the engine. Callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace facil
