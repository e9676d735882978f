#include "facil/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "facil/error.hpp"

namespace facil {

int ChoreographyProgram::duration_ms() const {
  int end = 0;
  for (const auto& c : commands) end = std::max(end, c.end_ms());
  return end;
}

std::set<ParticipantId> ChoreographyProgram::touched() const {
  std::set<ParticipantId> out;
  for (const auto& c : commands) out.insert(c.stand);
  return out;
}

std::vector<std::size_t> ChoreographyProgram::commands_for(ParticipantId stand) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (commands[i].stand == stand) out.push_back(i);
  }
  std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return commands[a].start_offset_ms < commands[b].start_offset_ms;
  });
  return out;
}

nlohmann::json to_json(const StandCommand& c) {
  return {{"stand", c.stand.label()},
          {"verb", verb_name(c.verb)},
          {"args", verb_args(c.verb)},
          {"start_offset_ms", c.start_offset_ms},
          {"duration_ms", c.duration_ms}};
}

nlohmann::json to_json(const ChoreographyProgram& p) {
  nlohmann::json commands = nlohmann::json::array();
  for (const auto& c : p.commands) commands.push_back(to_json(c));
  nlohmann::json targets = nlohmann::json::array();
  for (auto t : p.targets) targets.push_back(t.label());
  return {{"program_id", p.program_id},
          {"facilitation", to_string(p.facilitation)},
          {"targets", targets},
          {"commands", commands},
          {"sync_groups", p.sync_groups}};
}

ChoreographyProgram program_from_json(const nlohmann::json& j) {
  try {
    ChoreographyProgram p;
    p.program_id = j.at("program_id").get<std::string>();
    p.facilitation = parse_facilitation(j.at("facilitation").get<std::string>());
    if (j.contains("targets")) {
      for (const auto& t : j["targets"]) p.targets.push_back(ParticipantId::parse(t.get<std::string>()));
    }
    for (const auto& c : j.at("commands")) {
      StandCommand cmd;
      cmd.stand = ParticipantId::parse(c.at("stand").get<std::string>());
      cmd.verb = parse_verb(c.at("verb").get<std::string>(), c.value("args", nlohmann::json::object()));
      cmd.start_offset_ms = c.at("start_offset_ms").get<int>();
      cmd.duration_ms = c.at("duration_ms").get<int>();
      p.commands.push_back(std::move(cmd));
    }
    p.sync_groups = j.value("sync_groups", std::vector<std::vector<std::size_t>>{});
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("program: ") + e.what());
  }
}

namespace {

constexpr double kRadPerDeg = std::numbers::pi / 180.0;

bool distinct(const std::vector<ParticipantId>& ids) {
  std::set<ParticipantId> s(ids.begin(), ids.end());
  return s.size() == ids.size();
}

void require(bool ok, FacilitationType type, const std::string& what) {
  if (!ok) throw Error(Errc::ArityMismatch, std::string(to_string(type)) + ": " + what);
}

void check_not_busy(const std::set<ParticipantId>& touched, const std::set<ParticipantId>& busy) {
  for (auto id : touched) {
    if (busy.count(id)) throw Error(Errc::StandBusy, "stand " + id.label() + " is executing a program");
  }
}

std::string program_id(FacilitationType type, const std::vector<ParticipantId>& targets) {
  std::string id = to_string(type);
  id += ':';
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (i) id += '-';
    id += targets[i].label();
  }
  return id;
}

// In-place turn to an absolute heading; nullopt when already there.
std::optional<Verb> turn_to(const Pose& pose, double heading_deg) {
  const int deg = static_cast<int>(std::lround(heading_delta(pose.heading_deg, heading_deg)));
  if (deg > 0) return RotateCCW{deg};
  if (deg < 0) return RotateCW{-deg};
  return std::nullopt;
}

double bearing_deg(const Pose& from, double x, double y) {
  return std::atan2(y - from.y_mm, x - from.x_mm) / kRadPerDeg;
}

// Lays phases out on a global timeline while tracking each stand's open-loop pose.
class ProgramBuilder {
 public:
  explicit ProgramBuilder(const MovementParams& params) : params_(params) {
    for (auto id : all_participants()) pose_[id] = params.table.home_pose(id);
  }

  const Pose& pose(ParticipantId id) const { return pose_.at(id); }

  void phase(const std::vector<std::pair<ParticipantId, Verb>>& moves) {
    if (moves.empty()) return;
    std::vector<std::size_t> group;
    int end = cursor_;
    for (const auto& [stand, verb] : moves) {
      const int duration = duration_of(stand, verb);
      group.push_back(commands_.size());
      commands_.push_back({stand, verb, cursor_, duration});
      end = std::max(end, cursor_ + duration);
      pose_[stand] = advance(pose_[stand], segments(stand, verb), std::numeric_limits<double>::infinity());
    }
    if (group.size() > 1) sync_groups_.push_back(std::move(group));
    cursor_ = end + params_.phase_gap_ms;
  }

  void single(ParticipantId stand, Verb verb) { phase({{stand, std::move(verb)}}); }

  void all(const std::vector<ParticipantId>& stands, const Verb& verb) {
    std::vector<std::pair<ParticipantId, Verb>> moves;
    for (auto s : stands) moves.emplace_back(s, verb);
    phase(moves);
  }

  void pause(int ms) { cursor_ += ms; }

  // Attention opener shared by several designs: gather toward the centre,
  // rotate together, return.
  void gather_and_rotate(const std::vector<ParticipantId>& stands) {
    all(stands, MoveBackward{params_.gather_mm});
    all(stands, RotateCW{params_.attention_rotation_deg});
    all(stands, ReturnHome{});
  }

  ChoreographyProgram finish(FacilitationType type, std::vector<ParticipantId> targets) {
    ChoreographyProgram p;
    p.program_id = program_id(type, targets);
    p.facilitation = type;
    p.targets = std::move(targets);
    p.commands = std::move(commands_);
    p.sync_groups = std::move(sync_groups_);
    return p;
  }

 private:
  std::vector<Segment> segments(ParticipantId stand, const Verb& verb) const {
    return plan_segments(verb, pose_.at(stand), params_.table.home_pose(stand), params_.kinematics);
  }

  int duration_of(ParticipantId stand, const Verb& verb) const {
    if (std::holds_alternative<ShowScreenHint>(verb)) return params_.hint_ms;
    return static_cast<int>(std::ceil(total_duration_ms(segments(stand, verb)) - 1e-9));
  }

  const MovementParams& params_;
  std::map<ParticipantId, Pose> pose_;
  std::vector<StandCommand> commands_;
  std::vector<std::vector<std::size_t>> sync_groups_;
  int cursor_ = 0;
};

std::vector<ParticipantId> everyone() {
  const auto all = all_participants();
  return {all.begin(), all.end()};
}

ChoreographyProgram silence_breaking(const MovementParams& params) {
  ProgramBuilder b(params);
  const auto stands = everyone();
  b.all(stands, MoveForward{params.silence_step_mm});
  b.all(stands, RotateCW{params.attention_rotation_deg});
  b.all(stands, ReturnHome{});
  return b.finish(FacilitationType::SilenceBreaking, stands);
}

ChoreographyProgram balance_basic(const std::vector<ParticipantId>& targets, const MovementParams& params) {
  ProgramBuilder b(params);
  b.all(targets, MoveForward{params.step_out_mm});
  b.all(targets, RotateCW{params.attention_rotation_deg});
  b.all(targets, ReturnHome{});
  return b.finish(FacilitationType::ParticipationBalanceBasic, targets);
}

ChoreographyProgram tickle(ParticipantId sender, ParticipantId receiver, const MovementParams& params) {
  ProgramBuilder b(params);
  b.single(receiver, params.blink);
  b.single(receiver, ReturnHome{});
  return b.finish(FacilitationType::ConnectionTickle, {sender, receiver});
}

ChoreographyProgram speech_control(ParticipantId target, const MovementParams& params) {
  ProgramBuilder b(params);
  for (int i = 0; i < params.speech_control_cycles; ++i) {
    b.single(target, MoveForward{params.speech_control_mm});
    b.single(target, MoveBackward{params.speech_control_mm});
  }
  b.single(target, ReturnHome{});
  return b.finish(FacilitationType::SpeechControl, {target});
}

ChoreographyProgram leader_election(ParticipantId target, const MovementParams& params) {
  ProgramBuilder b(params);
  const auto stands = everyone();
  b.gather_and_rotate(stands);
  std::vector<std::pair<ParticipantId, Verb>> spotlight{{target, MoveForward{params.step_out_mm}}};
  for (auto s : stands) {
    if (s != target) spotlight.emplace_back(s, params.blink);
  }
  b.phase(spotlight);
  b.all(stands, ReturnHome{});
  return b.finish(FacilitationType::LeaderElection, {target});
}

}  // namespace

void check_arity(FacilitationType type, const std::vector<ParticipantId>& targets) {
  const std::size_t n = targets.size();
  switch (type) {
    case FacilitationType::Icebreaking:
    case FacilitationType::SilenceBreaking:
    case FacilitationType::Farewell:
      require(n == kGroupSize && distinct(targets), type, "needs all four distinct participants");
      break;
    case FacilitationType::ConflictSolving:
    case FacilitationType::ParticipationBalanceStrengthened:
      require(n == 2 && distinct(targets), type, "needs two distinct participants");
      break;
    case FacilitationType::ConnectionTickle:
      require(n == 2, type, "needs a sender and a receiver");
      if (targets[0] == targets[1]) throw Error(Errc::SelfTickle, "sender and receiver are the same participant");
      break;
    case FacilitationType::SpeechControl:
    case FacilitationType::LeaderElection:
      require(n == 1, type, "needs exactly one target");
      break;
    case FacilitationType::ParticipationBalanceBasic:
      require(n >= 1 && n < kGroupSize && distinct(targets), type, "needs one to three distinct targets");
      break;
  }
}

ChoreographyProgram compile(FacilitationType type, const std::vector<ParticipantId>& targets,
                            const MovementParams& params, const std::set<ParticipantId>& busy) {
  check_arity(type, targets);
  switch (type) {
    case FacilitationType::Icebreaking:
      return compile_icebreaking(targets, params, busy);
    case FacilitationType::ConflictSolving:
      return compile_conflict_solving(targets, params, busy);
    case FacilitationType::ParticipationBalanceStrengthened:
      return compile_strengthened(targets[0], targets[1], params, busy);
    case FacilitationType::Farewell:
      return compile_farewell(targets, params, busy);
    default:
      break;
  }
  ChoreographyProgram p;
  switch (type) {
    case FacilitationType::SilenceBreaking:
      p = silence_breaking(params);
      break;
    case FacilitationType::ParticipationBalanceBasic: {
      auto sorted = targets;
      std::sort(sorted.begin(), sorted.end());
      p = balance_basic(sorted, params);
      break;
    }
    case FacilitationType::ConnectionTickle:
      p = tickle(targets[0], targets[1], params);
      break;
    case FacilitationType::SpeechControl:
      p = speech_control(targets[0], params);
      break;
    case FacilitationType::LeaderElection:
      p = leader_election(targets[0], params);
      break;
    default:
      break;
  }
  check_not_busy(p.touched(), busy);
  return p;
}

ChoreographyProgram compile_icebreaking(const std::vector<ParticipantId>& order, const MovementParams& params,
                                        const std::set<ParticipantId>& busy) {
  check_arity(FacilitationType::Icebreaking, order);
  check_not_busy({order.begin(), order.end()}, busy);
  ProgramBuilder b(params);
  b.gather_and_rotate(order);
  for (auto stand : order) {
    b.single(stand, MoveForward{params.step_out_mm});
    b.single(stand, RotateCW{params.facing_rotation_deg});
    b.single(stand, ShowScreenHint{"intro_card"});
    b.single(stand, ReturnHome{});
  }
  return b.finish(FacilitationType::Icebreaking, order);
}

ChoreographyProgram compile_conflict_solving(const std::vector<ParticipantId>& pair, const MovementParams& params,
                                             const std::set<ParticipantId>& busy) {
  check_arity(FacilitationType::ConflictSolving, pair);
  check_not_busy({pair.begin(), pair.end()}, busy);
  auto ids = pair;
  std::sort(ids.begin(), ids.end());
  const auto [a, b] = std::pair{ids[0], ids[1]};

  ProgramBuilder pb(params);
  const Pose ha = params.table.home_pose(a);
  const Pose hb = params.table.home_pose(b);
  const double gap = distance_mm(ha, hb);
  const int approach = std::max(
      1, std::min(params.approach_max_mm, static_cast<int>((gap - params.approach_clearance_mm) / 2.0)));

  std::vector<std::pair<ParticipantId, Verb>> face;
  if (auto v = turn_to(pb.pose(a), bearing_deg(ha, hb.x_mm, hb.y_mm))) face.emplace_back(a, *v);
  if (auto v = turn_to(pb.pose(b), bearing_deg(hb, ha.x_mm, ha.y_mm))) face.emplace_back(b, *v);
  pb.phase(face);
  pb.all(ids, MoveForward{approach});
  pb.all(ids, params.blink);
  pb.all(ids, MoveBackward{approach});
  pb.all(ids, ReturnHome{});
  return pb.finish(FacilitationType::ConflictSolving, ids);
}

ChoreographyProgram compile_strengthened(ParticipantId active, ParticipantId inactive, const MovementParams& params,
                                         const std::set<ParticipantId>& busy) {
  check_arity(FacilitationType::ParticipationBalanceStrengthened, {active, inactive});
  check_not_busy({active, inactive}, busy);

  ProgramBuilder b(params);
  const Pose target = params.table.home_pose(inactive);
  if (auto v = turn_to(b.pose(active), bearing_deg(b.pose(active), target.x_mm, target.y_mm))) {
    b.single(active, *v);
  }
  const int approach = static_cast<int>(std::lround(distance_mm(b.pose(active), target))) - params.standoff_mm;
  if (approach > 0) b.single(active, MoveForward{approach});
  b.pause(params.pause_ms);
  if (auto v = turn_to(b.pose(active), bearing_deg(b.pose(active), 0.0, 0.0))) b.single(active, *v);
  b.phase({{active, MoveForward{params.center_advance_mm}}, {inactive, MoveBackward{params.center_advance_mm}}});
  b.all({active, inactive}, ReturnHome{});
  return b.finish(FacilitationType::ParticipationBalanceStrengthened, {active, inactive});
}

ChoreographyProgram compile_farewell(const std::vector<ParticipantId>& stands, const MovementParams& params,
                                     const std::set<ParticipantId>& busy) {
  check_arity(FacilitationType::Farewell, stands);
  check_not_busy({stands.begin(), stands.end()}, busy);
  ProgramBuilder b(params);
  b.gather_and_rotate(stands);
  for (auto stand : stands) {
    b.single(stand, RotateCW{params.facing_rotation_deg});
    b.single(stand, ShowScreenHint{"qr_code"});
    b.single(stand, ReturnHome{});
  }
  return b.finish(FacilitationType::Farewell, stands);
}

std::map<ParticipantId, Pose> simulate_program(const ChoreographyProgram& program, const MovementParams& params) {
  std::map<ParticipantId, Pose> poses;
  for (auto stand : program.touched()) {
    const Pose home = params.table.home_pose(stand);
    Pose pose = home;
    for (auto i : program.commands_for(stand)) {
      const auto segs = plan_segments(program.commands[i].verb, pose, home, params.kinematics);
      pose = advance(pose, segs, std::numeric_limits<double>::infinity());
    }
    poses[stand] = pose;
  }
  return poses;
}

std::vector<std::string> program_violations(const ChoreographyProgram& program, const MovementParams& params) {
  std::vector<std::string> out;
  auto report = [&](const std::string& msg) { out.push_back(program.program_id + ": " + msg); };

  if (program.duration_ms() > params.max_program_ms) {
    report("duration " + std::to_string(program.duration_ms()) + " ms exceeds cap");
  }
  for (auto stand : program.touched()) {
    const auto idx = program.commands_for(stand);
    if (!std::holds_alternative<ReturnHome>(program.commands[idx.back()].verb)) {
      report(stand.label() + " does not end with return_home");
    }
    for (std::size_t k = 1; k < idx.size(); ++k) {
      if (program.commands[idx[k - 1]].end_ms() >= program.commands[idx[k]].start_offset_ms) {
        report(stand.label() + " commands " + std::to_string(idx[k - 1]) + " and " + std::to_string(idx[k]) +
               " overlap");
      }
    }
    const Pose home = params.table.home_pose(stand);
    Pose pose = home;
    for (auto i : idx) {
      pose = advance(pose, plan_segments(program.commands[i].verb, pose, home, params.kinematics),
                     std::numeric_limits<double>::infinity());
      if (!params.table.within_bounds(pose)) report(stand.label() + " leaves the table");
    }
    if (!near_pose(pose, home, 5.0, 5.0)) report(stand.label() + " does not return home");
  }
  for (const auto& group : program.sync_groups) {
    if (group.empty()) continue;
    for (auto i : group) {
      if (i >= program.commands.size()) {
        report("sync group index out of range");
      } else if (program.commands[i].start_offset_ms != program.commands[group.front()].start_offset_ms) {
        report("sync group start offsets differ");
      }
    }
  }
  for (const auto& c : program.commands) {
    if (c.duration_ms <= 0 || c.start_offset_ms < 0) report("non-positive duration or negative offset");
  }
  return out;
}

}  // namespace facil
