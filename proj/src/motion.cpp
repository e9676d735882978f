#include "facil/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "facil/error.hpp"

namespace facil {

namespace {

constexpr double kRadPerDeg = std::numbers::pi / 180.0;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

int positive_arg(const nlohmann::json& args, const char* key) {
  if (!args.contains(key) || !args[key].is_number_integer()) {
    throw Error(Errc::InvalidArgument, std::string("missing integer arg \"") + key + "\"");
  }
  const int v = args[key].get<int>();
  if (v <= 0) throw Error(Errc::InvalidArgument, std::string(key) + " must be positive");
  return v;
}

}  // namespace

const char* verb_name(const Verb& verb) {
  return std::visit(overloaded{
                        [](const MoveForward&) { return "move_forward"; },
                        [](const MoveBackward&) { return "move_backward"; },
                        [](const RotateCW&) { return "rotate_cw"; },
                        [](const RotateCCW&) { return "rotate_ccw"; },
                        [](const Blink&) { return "blink"; },
                        [](const ShowScreenHint&) { return "show_screen_hint"; },
                        [](const ReturnHome&) { return "return_home"; },
                    },
                    verb);
}

nlohmann::json verb_args(const Verb& verb) {
  using nlohmann::json;
  return std::visit(overloaded{
                        [](const MoveForward& v) { return json{{"mm", v.mm}}; },
                        [](const MoveBackward& v) { return json{{"mm", v.mm}}; },
                        [](const RotateCW& v) { return json{{"deg", v.deg}}; },
                        [](const RotateCCW& v) { return json{{"deg", v.deg}}; },
                        [](const Blink& v) {
                          return json{{"on_ms", v.on_ms}, {"off_ms", v.off_ms}, {"repeats", v.repeats}};
                        },
                        [](const ShowScreenHint& v) { return json{{"token", v.token}}; },
                        [](const ReturnHome&) { return json::object(); },
                    },
                    verb);
}

Verb parse_verb(std::string_view name, const nlohmann::json& args) {
  if (name == "move_forward") return MoveForward{positive_arg(args, "mm")};
  if (name == "move_backward") return MoveBackward{positive_arg(args, "mm")};
  if (name == "rotate_cw") return RotateCW{positive_arg(args, "deg")};
  if (name == "rotate_ccw") return RotateCCW{positive_arg(args, "deg")};
  if (name == "blink") {
    return Blink{positive_arg(args, "on_ms"), positive_arg(args, "off_ms"), positive_arg(args, "repeats")};
  }
  if (name == "show_screen_hint") {
    if (!args.contains("token") || !args["token"].is_string() || args["token"].get<std::string>().empty()) {
      throw Error(Errc::InvalidArgument, "show_screen_hint needs a token");
    }
    return ShowScreenHint{args["token"].get<std::string>()};
  }
  if (name == "return_home") return ReturnHome{};
  throw Error(Errc::InvalidArgument, "unknown verb: " + std::string(name));
}

bool is_motion(const Verb& verb) {
  return !std::holds_alternative<Blink>(verb) && !std::holds_alternative<ShowScreenHint>(verb);
}

double normalize_heading(double deg) {
  double h = std::fmod(deg, 360.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  return h;
}

double heading_delta(double from_deg, double to_deg) {
  double d = normalize_heading(to_deg - from_deg);
  if (d > 180.0) d -= 360.0;
  return d;
}

double distance_mm(const Pose& a, const Pose& b) { return std::hypot(a.x_mm - b.x_mm, a.y_mm - b.y_mm); }

bool near_pose(const Pose& a, const Pose& b, double tol_mm, double tol_deg) {
  return distance_mm(a, b) <= tol_mm && std::abs(heading_delta(a.heading_deg, b.heading_deg)) <= tol_deg;
}

Pose TableGeometry::home_pose(ParticipantId stand) const {
  const double angle = seat_angle_deg[stand.slot()];
  return {home_radius_mm * std::cos(angle * kRadPerDeg), home_radius_mm * std::sin(angle * kRadPerDeg),
          normalize_heading(angle)};
}

bool TableGeometry::within_bounds(const Pose& pose) const {
  return std::hypot(pose.x_mm, pose.y_mm) <= table_radius_mm;
}

namespace {

Segment rotate(double deg, const KinematicsConfig& k) {
  return {Segment::Kind::Rotate, deg, std::abs(deg) / k.angular_speed_deg_s * 1000.0};
}

Segment translate(double mm, const KinematicsConfig& k) {
  return {Segment::Kind::Translate, mm, std::abs(mm) / k.linear_speed_mm_s * 1000.0};
}

// Dead-reckoning path home: turn, drive (in reverse when home lies behind), turn.
std::vector<Segment> return_home_segments(const Pose& from, const Pose& home, const KinematicsConfig& k) {
  std::vector<Segment> out;
  auto push_rotation = [&](double deg) {
    if (std::abs(deg) > 1e-9) out.push_back(rotate(deg, k));
  };
  const double dist = distance_mm(from, home);
  double heading = from.heading_deg;
  if (dist > 1e-6) {
    const double bearing = std::atan2(home.y_mm - from.y_mm, home.x_mm - from.x_mm) / kRadPerDeg;
    const double ahead = heading_delta(heading, bearing);
    if (std::abs(ahead) <= 90.0) {
      push_rotation(ahead);
      heading = bearing;
      out.push_back(translate(dist, k));
    } else {
      const double reversed = bearing + 180.0;
      push_rotation(heading_delta(heading, reversed));
      heading = reversed;
      out.push_back(translate(-dist, k));
    }
  }
  push_rotation(heading_delta(heading, home.heading_deg));
  out.push_back({Segment::Kind::Hold, 0.0, static_cast<double>(k.settle_ms)});
  return out;
}

}  // namespace

std::vector<Segment> plan_segments(const Verb& verb, const Pose& from, const Pose& home,
                                   const KinematicsConfig& k) {
  return std::visit(overloaded{
                        [&](const MoveForward& v) { return std::vector{translate(v.mm, k)}; },
                        [&](const MoveBackward& v) { return std::vector{translate(-v.mm, k)}; },
                        [&](const RotateCW& v) { return std::vector{rotate(-v.deg, k)}; },
                        [&](const RotateCCW& v) { return std::vector{rotate(v.deg, k)}; },
                        [&](const Blink& v) {
                          return std::vector{Segment{Segment::Kind::Hold, 0.0,
                                                     static_cast<double>(v.repeats * (v.on_ms + v.off_ms))}};
                        },
                        [&](const ShowScreenHint&) { return std::vector<Segment>{}; },
                        [&](const ReturnHome&) { return return_home_segments(from, home, k); },
                    },
                    verb);
}

double total_duration_ms(const std::vector<Segment>& segments) {
  double total = 0.0;
  for (const auto& s : segments) total += s.duration_ms;
  return total;
}

Pose advance(Pose pose, const std::vector<Segment>& segments, double elapsed_ms) {
  double remaining = std::max(0.0, elapsed_ms);
  for (const auto& s : segments) {
    if (remaining <= 0.0) break;
    const double fraction = s.duration_ms <= 0.0 ? 1.0 : std::min(1.0, remaining / s.duration_ms);
    remaining -= s.duration_ms;
    switch (s.kind) {
      case Segment::Kind::Rotate:
        pose.heading_deg = normalize_heading(pose.heading_deg + s.amount * fraction);
        break;
      case Segment::Kind::Translate: {
        const double d = s.amount * fraction;
        pose.x_mm += d * std::cos(pose.heading_deg * kRadPerDeg);
        pose.y_mm += d * std::sin(pose.heading_deg * kRadPerDeg);
        break;
      }
      case Segment::Kind::Hold:
        break;
    }
  }
  return pose;
}

}  // namespace facil
