#include "facil/stand.hpp"

#include <algorithm>
#include <limits>

#include "facil/error.hpp"

namespace facil {

const char* to_string(LinkState state) { return state == LinkState::Connected ? "connected" : "lost"; }

nlohmann::json to_json(const StandState& s) {
  return {{"stand", s.stand.label()},
          {"pose", {s.pose.x_mm, s.pose.y_mm, s.pose.heading_deg}},
          {"home", {s.home.x_mm, s.home.y_mm, s.home.heading_deg}},
          {"busy", s.busy},
          {"obstructed", s.obstructed},
          {"link", to_string(s.link)},
          {"last_seq", s.last_seq}};
}

StandState simulated_stand_step(const StandState& state, const Verb& verb, double dt_ms,
                                const KinematicsConfig& kinematics) {
  if (!(dt_ms > 0.0)) throw Error(Errc::InvalidArgument, "dt must be positive");
  StandState next = state;
  next.pose = advance(state.pose, plan_segments(verb, state.pose, state.home, kinematics), dt_ms);
  return next;
}

SimulatedStand::SimulatedStand(ParticipantId id, TableGeometry table, KinematicsConfig kinematics)
    : kinematics_(kinematics) {
  state_.stand = id;
  state_.home = table.home_pose(id);
  state_.pose = state_.home;
}

void SimulatedStand::inject_obstruction(ObstructionFault fault) {
  std::lock_guard lock(mu_);
  faults_.push_back(std::move(fault));
}

StandState SimulatedStand::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::vector<std::uint64_t> SimulatedStand::executed() const {
  std::lock_guard lock(mu_);
  return executed_;
}

AckFrame SimulatedStand::error_ack(std::uint64_t seq) const { return {seq, AckStatus::Error, state_.pose}; }

std::string SimulatedStand::handle_line(std::string_view line) {
  try {
    return encode_ack(handle(decode_command(line)));
  } catch (const Error&) {
    std::lock_guard lock(mu_);
    std::uint64_t seq = 0;
    auto j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_object() && j.contains("seq") && j["seq"].is_number_unsigned()) seq = j["seq"].get<std::uint64_t>();
    return encode_ack(error_ack(seq));
  }
}

AckFrame SimulatedStand::handle(const CommandFrame& frame) {
  std::lock_guard lock(mu_);
  if (frame.stand != state_.stand) return error_ack(frame.seq);
  // Re-delivery of the last frame: answer from cache, do not move again.
  if (last_ack_ && frame.seq == last_ack_->seq) return *last_ack_;
  if (frame.seq <= state_.last_seq) return error_ack(frame.seq);

  const std::string name = verb_name(frame.verb);
  const int occurrence = ++verb_counts_[name];
  const auto segments = plan_segments(frame.verb, state_.pose, state_.home, kinematics_);
  const double full = total_duration_ms(segments);

  AckFrame ack{frame.seq, AckStatus::Ok, {}};
  auto fault = std::find_if(faults_.begin(), faults_.end(),
                            [&](const ObstructionFault& f) { return f.verb == name && f.nth == occurrence; });
  if (fault != faults_.end()) {
    state_.pose = advance(state_.pose, segments, full * std::clamp(fault->fraction, 0.0, 1.0));
    state_.obstructed = true;
    ack.status = AckStatus::Obstructed;
    faults_.erase(fault);
  } else {
    state_.pose = advance(state_.pose, segments, std::numeric_limits<double>::infinity());
    if (std::holds_alternative<ReturnHome>(frame.verb)) state_.obstructed = false;
  }
  state_.last_seq = frame.seq;
  executed_.push_back(frame.seq);
  ack.pose = state_.pose;
  last_ack_ = ack;
  return ack;
}

}  // namespace facil
