#pragma once

// Stand motion vocabulary and the differential-drive kinematic model shared by
// the choreography planner (open-loop durations) and the simulated stand.
//
// Table frame: origin at the table centre, x to the right, y up, headings in
// degrees counter-clockwise from +x. A stand at home sits on a circle around
// the centre and faces outward, toward its owner.

#include <array>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "facil/types.hpp"

namespace facil {

struct MoveForward {
  int mm = 0;
  friend bool operator==(const MoveForward&, const MoveForward&) = default;
};
struct MoveBackward {
  int mm = 0;
  friend bool operator==(const MoveBackward&, const MoveBackward&) = default;
};
struct RotateCW {
  int deg = 0;
  friend bool operator==(const RotateCW&, const RotateCW&) = default;
};
struct RotateCCW {
  int deg = 0;
  friend bool operator==(const RotateCCW&, const RotateCCW&) = default;
};
struct Blink {
  int on_ms = 300;
  int off_ms = 300;
  int repeats = 4;
  friend bool operator==(const Blink&, const Blink&) = default;
};
/// Screen content is rendered by the phone; only the token travels.
struct ShowScreenHint {
  std::string token;
  friend bool operator==(const ShowScreenHint&, const ShowScreenHint&) = default;
};
struct ReturnHome {
  friend bool operator==(const ReturnHome&, const ReturnHome&) = default;
};

using Verb = std::variant<MoveForward, MoveBackward, RotateCW, RotateCCW, Blink, ShowScreenHint, ReturnHome>;

const char* verb_name(const Verb& verb);
nlohmann::json verb_args(const Verb& verb);
/// Inverse of verb_name/verb_args; rejects non-positive distances, angles and timings.
Verb parse_verb(std::string_view name, const nlohmann::json& args);
bool is_motion(const Verb& verb);

struct Pose {
  double x_mm = 0.0;
  double y_mm = 0.0;
  double heading_deg = 0.0;

  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Wraps into [0, 360).
double normalize_heading(double deg);
/// Shortest signed turn from one heading to another, in (-180, 180].
double heading_delta(double from_deg, double to_deg);
double distance_mm(const Pose& a, const Pose& b);
/// Position error and absolute heading error between two poses.
bool near_pose(const Pose& a, const Pose& b, double tol_mm, double tol_deg);

struct KinematicsConfig {
  double linear_speed_mm_s = 120.0;
  double angular_speed_deg_s = 240.0;
  /// Hold appended to ReturnHome so the stand settles before the next phase.
  int settle_ms = 100;
};

struct TableGeometry {
  double home_radius_mm = 300.0;
  double table_radius_mm = 600.0;
  /// Seat angle of P1..P4 around the table centre.
  std::array<double, kGroupSize> seat_angle_deg = {270.0, 0.0, 90.0, 180.0};

  Pose home_pose(ParticipantId stand) const;
  bool within_bounds(const Pose& pose) const;
};

/// Primitive motion: signed rotation (deg, +CCW), signed translation along the
/// heading (mm, + forward) or a timed hold.
struct Segment {
  enum class Kind { Rotate, Translate, Hold } kind = Kind::Hold;
  double amount = 0.0;
  double duration_ms = 0.0;
};

std::vector<Segment> plan_segments(const Verb& verb, const Pose& from, const Pose& home,
                                   const KinematicsConfig& kinematics);
double total_duration_ms(const std::vector<Segment>& segments);
/// Pose after executing the segments for elapsed_ms (clamped to completion).
Pose advance(Pose from, const std::vector<Segment>& segments, double elapsed_ms);

}  // namespace facil
