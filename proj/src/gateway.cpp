#include "facil/gateway.hpp"

#include <fstream>
#include <limits>
#include <thread>

#include "facil/error.hpp"

namespace facil {

std::optional<std::string> SimulatedLink::exchange(const std::string& line, std::chrono::milliseconds) {
  bool drop = false;
  bool twice = false;
  {
    std::lock_guard lock(mu_);
    if (down_) return std::nullopt;
    if (drop_acks_ > 0) {
      --drop_acks_;
      drop = true;
    }
    twice = duplicate_;
  }
  std::string reply = stand_->handle_line(line);
  if (twice) reply = stand_->handle_line(line);
  if (drop) return std::nullopt;
  return reply;
}

void SimulatedLink::drop_acks(int n) {
  std::lock_guard lock(mu_);
  drop_acks_ = n;
}

void SimulatedLink::duplicate_delivery(bool on) {
  std::lock_guard lock(mu_);
  duplicate_ = on;
}

void SimulatedLink::set_down(bool down) {
  std::lock_guard lock(mu_);
  down_ = down;
}

void RealtimeClock::wait_until(TimePoint origin, int offset_ms) {
  std::this_thread::sleep_until(origin + std::chrono::milliseconds(offset_ms));
}

GatewayConfig GatewayConfig::from_json(const nlohmann::json& j) {
  GatewayConfig c;
  try {
    if (j.contains("table")) {
      const auto& t = j["table"];
      c.table.home_radius_mm = t.value("home_radius_mm", c.table.home_radius_mm);
      c.table.table_radius_mm = t.value("table_radius_mm", c.table.table_radius_mm);
      if (t.contains("seat_angle_deg")) {
        const auto angles = t["seat_angle_deg"].get<std::vector<double>>();
        if (angles.size() != kGroupSize) throw Error(Errc::InvalidArgument, "seat_angle_deg needs 4 entries");
        std::copy(angles.begin(), angles.end(), c.table.seat_angle_deg.begin());
      }
    }
    if (j.contains("kinematics")) {
      const auto& k = j["kinematics"];
      c.kinematics.linear_speed_mm_s = k.value("linear_speed_mm_s", c.kinematics.linear_speed_mm_s);
      c.kinematics.angular_speed_deg_s = k.value("angular_speed_deg_s", c.kinematics.angular_speed_deg_s);
      c.kinematics.settle_ms = k.value("settle_ms", c.kinematics.settle_ms);
    }
    c.retries = j.value("retries", c.retries);
    c.ack_timeout_ms = j.value("ack_timeout_ms", c.ack_timeout_ms);
    if (j.contains("stands")) {
      for (const auto& [label, ep] : j["stands"].items()) {
        c.endpoints[ParticipantId::parse(label)] = {ep.value("host", std::string("127.0.0.1")),
                                                    ep.at("port").get<std::uint16_t>()};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("gateway config: ") + e.what());
  }
  if (c.retries < 0 || c.ack_timeout_ms <= 0 || c.kinematics.linear_speed_mm_s <= 0 ||
      c.kinematics.angular_speed_deg_s <= 0 || c.table.home_radius_mm <= 0 ||
      c.table.table_radius_mm < c.table.home_radius_mm) {
    throw Error(Errc::InvalidArgument, "gateway config: values out of range");
  }
  return c;
}

GatewayConfig GatewayConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ParseError, path + ": invalid JSON");
  return from_json(j);
}

nlohmann::json GatewayConfig::to_json() const {
  nlohmann::json stands = nlohmann::json::object();
  for (const auto& [id, ep] : endpoints) stands[id.label()] = {{"host", ep.host}, {"port", ep.port}};
  return {{"table",
           {{"home_radius_mm", table.home_radius_mm},
            {"table_radius_mm", table.table_radius_mm},
            {"seat_angle_deg", table.seat_angle_deg}}},
          {"kinematics",
           {{"linear_speed_mm_s", kinematics.linear_speed_mm_s},
            {"angular_speed_deg_s", kinematics.angular_speed_deg_s},
            {"settle_ms", kinematics.settle_ms}}},
          {"retries", retries},
          {"ack_timeout_ms", ack_timeout_ms},
          {"stands", stands}};
}

const char* to_string(CommandOutcome outcome) {
  switch (outcome) {
    case CommandOutcome::Acked: return "acked";
    case CommandOutcome::Obstructed: return "obstructed";
    case CommandOutcome::Rejected: return "rejected";
    case CommandOutcome::LinkLost: return "link_lost";
    case CommandOutcome::Cancelled: return "cancelled";
  }
  return "cancelled";
}

bool ExecutionReport::ok() const {
  for (const auto& c : commands) {
    if (c.outcome != CommandOutcome::Acked) return false;
  }
  for (const auto& [id, s] : stands) {
    if (!s.at_home) return false;
  }
  return true;
}

nlohmann::json to_json(const ExecutionReport& r) {
  nlohmann::json commands = nlohmann::json::array();
  for (const auto& c : r.commands) {
    nlohmann::json jc{{"stand", c.stand.label()},
                      {"verb", c.verb},
                      {"seq", c.seq},
                      {"outcome", to_string(c.outcome)},
                      {"attempts", c.attempts},
                      {"latency_ms", c.latency_ms}};
    jc["index"] = c.index == std::numeric_limits<std::size_t>::max() ? nlohmann::json(nullptr)
                                                                      : nlohmann::json(c.index);
    if (c.pose) jc["pose"] = {c.pose->x_mm, c.pose->y_mm, c.pose->heading_deg};
    commands.push_back(std::move(jc));
  }
  nlohmann::json stands = nlohmann::json::object();
  for (const auto& [id, s] : r.stands) {
    stands[id.label()] = {{"final_pose", {s.final_pose.x_mm, s.final_pose.y_mm, s.final_pose.heading_deg}},
                          {"obstructed", s.obstructed},
                          {"link_lost", s.link_lost},
                          {"recovery_return_home", s.recovery_return_home},
                          {"last_verb_attempted", s.last_verb_attempted},
                          {"at_home", s.at_home}};
  }
  return {{"program_id", r.program_id}, {"ok", r.ok()}, {"commands", commands}, {"stands", stands}};
}

namespace {

// Releases a sync group once every member stand has arrived or dropped out.
class SyncGate {
 public:
  explicit SyncGate(int members) : remaining_(members) {}

  void arrive_and_wait() {
    std::unique_lock lock(mu_);
    if (--remaining_ <= 0) {
      cv_.notify_all();
      return;
    }
    cv_.wait(lock, [&] { return remaining_ <= 0; });
  }

  void drop() {
    std::lock_guard lock(mu_);
    if (--remaining_ <= 0) cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int remaining_;
};

}  // namespace

StandGateway::StandGateway(GatewayConfig config, std::map<ParticipantId, std::shared_ptr<StandLink>> links,
                           std::shared_ptr<ReleaseClock> clock)
    : config_(std::move(config)), links_(std::move(links)), clock_(std::move(clock)) {
  for (auto id : all_participants()) {
    StandState s;
    s.stand = id;
    s.home = config_.table.home_pose(id);
    s.pose = s.home;
    s.link = links_.count(id) && links_[id] ? LinkState::Connected : LinkState::Lost;
    states_[id] = s;
    link_mu_[id] = std::make_unique<std::mutex>();
  }
}

StandGateway::~StandGateway() = default;

void StandGateway::reserve(const std::set<ParticipantId>& stands) {
  std::lock_guard lock(mu_);
  for (auto id : stands) {
    if (states_[id].link == LinkState::Lost) throw Error(Errc::LinkLost, "stand " + id.label() + " link lost");
    if (states_[id].busy) throw Error(Errc::StandBusy, "stand " + id.label() + " is busy");
  }
  for (auto id : stands) states_[id].busy = true;
}

void StandGateway::release(const std::set<ParticipantId>& stands) {
  {
    std::lock_guard lock(mu_);
    for (auto id : stands) states_[id].busy = false;
  }
  flush_tickles(stands);
}

ExecutionReport StandGateway::dispatch(const ChoreographyProgram& program) {
  const auto touched = program.touched();
  reserve(touched);
  ExecutionReport report;
  try {
    report = run(program);
  } catch (...) {
    release(touched);
    throw;
  }
  release(touched);
  return report;
}

std::future<ExecutionReport> StandGateway::dispatch_async(const ChoreographyProgram& program) {
  const auto touched = program.touched();
  reserve(touched);
  return std::async(std::launch::async, [this, program, touched] {
    ExecutionReport report;
    try {
      report = run(program);
    } catch (...) {
      release(touched);
      throw;
    }
    release(touched);
    return report;
  });
}

StandGateway::Sent StandGateway::send(ParticipantId stand, const Verb& verb) {
  std::lock_guard link_lock(*link_mu_.at(stand));
  Sent sent;
  {
    std::lock_guard lock(mu_);
    sent.seq = ++states_[stand].last_seq;
  }
  const std::string line = encode_command({sent.seq, stand, verb});
  const auto timeout = std::chrono::milliseconds(config_.ack_timeout_ms);
  const auto t0 = std::chrono::steady_clock::now();
  auto link = links_.count(stand) ? links_.at(stand) : nullptr;
  for (int attempt = 0; attempt <= config_.retries && link; ++attempt) {
    {
      std::lock_guard lock(mu_);
      frames_.push_back({stand, line});
    }
    ++sent.attempts;
    auto reply = link->exchange(line, timeout);
    if (!reply) continue;
    try {
      auto ack = decode_ack(*reply);
      if (ack.seq != sent.seq) continue;
      sent.ack = ack;
      break;
    } catch (const Error&) {
      continue;
    }
  }
  sent.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  std::lock_guard lock(mu_);
  auto& state = states_[stand];
  if (!sent.ack) {
    state.link = LinkState::Lost;
  } else {
    state.pose = sent.ack->pose;
    if (sent.ack->status == AckStatus::Obstructed) {
      state.obstructed = true;
    } else if (sent.ack->status == AckStatus::Ok && std::holds_alternative<ReturnHome>(verb)) {
      state.obstructed = false;
    }
  }
  return sent;
}

ExecutionReport StandGateway::run(const ChoreographyProgram& program) {
  ExecutionReport report;
  report.program_id = program.program_id;
  report.commands.resize(program.commands.size());
  for (std::size_t i = 0; i < program.commands.size(); ++i) {
    auto& c = report.commands[i];
    c.index = i;
    c.stand = program.commands[i].stand;
    c.verb = verb_name(program.commands[i].verb);
  }

  std::map<std::size_t, std::shared_ptr<SyncGate>> gates;
  for (const auto& group : program.sync_groups) {
    auto gate = std::make_shared<SyncGate>(static_cast<int>(group.size()));
    for (auto i : group) gates[i] = gate;
  }

  const auto origin = clock_->now();
  const auto touched = program.touched();
  std::map<ParticipantId, StandReport> stand_reports;
  std::map<ParticipantId, std::vector<CommandReport>> recoveries;
  for (auto id : touched) {
    stand_reports[id];
    recoveries[id];
  }

  auto worker = [&](ParticipantId stand) {
    StandReport& sr = stand_reports.at(stand);
    bool aborted = false;
    for (auto i : program.commands_for(stand)) {
      auto& rep = report.commands[i];
      const auto gate = gates.count(i) ? gates.at(i) : nullptr;
      if (aborted) {
        rep.outcome = CommandOutcome::Cancelled;
        if (gate) gate->drop();
        continue;
      }
      clock_->wait_until(origin, program.commands[i].start_offset_ms);
      if (gate) gate->arrive_and_wait();
      const auto sent = send(stand, program.commands[i].verb);
      sr.last_verb_attempted = rep.verb;
      rep.seq = sent.seq;
      rep.attempts = sent.attempts;
      rep.latency_ms = sent.latency_ms;
      if (!sent.ack) {
        rep.outcome = CommandOutcome::LinkLost;
        sr.link_lost = true;
        aborted = true;
        continue;
      }
      rep.pose = sent.ack->pose;
      switch (sent.ack->status) {
        case AckStatus::Ok:
          rep.outcome = CommandOutcome::Acked;
          break;
        case AckStatus::Obstructed:
          rep.outcome = CommandOutcome::Obstructed;
          sr.obstructed = true;
          aborted = true;
          break;
        case AckStatus::Error:
          rep.outcome = CommandOutcome::Rejected;
          aborted = true;
          break;
      }
    }
    if (aborted) {
      // Best effort: the stand should not be left away from home.
      const auto sent = send(stand, ReturnHome{});
      sr.recovery_return_home = true;
      sr.last_verb_attempted = verb_name(Verb{ReturnHome{}});
      CommandReport rep;
      rep.index = std::numeric_limits<std::size_t>::max();
      rep.stand = stand;
      rep.verb = sr.last_verb_attempted;
      rep.seq = sent.seq;
      rep.attempts = sent.attempts;
      rep.latency_ms = sent.latency_ms;
      if (!sent.ack) {
        rep.outcome = CommandOutcome::LinkLost;
        sr.link_lost = true;
      } else {
        rep.pose = sent.ack->pose;
        rep.outcome = sent.ack->status == AckStatus::Ok ? CommandOutcome::Acked
                      : sent.ack->status == AckStatus::Obstructed ? CommandOutcome::Obstructed
                                                                    : CommandOutcome::Rejected;
      }
      recoveries.at(stand).push_back(rep);
    }
  };

  std::vector<std::thread> threads;
  for (auto id : touched) threads.emplace_back(worker, id);
  for (auto& t : threads) t.join();

  for (auto id : touched) {
    for (auto& r : recoveries.at(id)) report.commands.push_back(r);
    auto& sr = stand_reports.at(id);
    const auto st = state(id);
    sr.final_pose = st.pose;
    sr.at_home = near_pose(st.pose, st.home, 5.0, 5.0);
  }
  report.stands = std::move(stand_reports);
  return report;
}

AckFrame StandGateway::direct_command(ParticipantId stand, const Verb& verb, bool force) {
  {
    std::lock_guard lock(mu_);
    const auto& s = states_.at(stand);
    if (s.link == LinkState::Lost) throw Error(Errc::LinkLost, "stand " + stand.label() + " link lost");
    if (s.busy && !force) throw Error(Errc::StandBusy, "stand " + stand.label() + " is busy");
  }
  const auto sent = send(stand, verb);
  if (!sent.ack) throw Error(Errc::LinkLost, "stand " + stand.label() + " did not acknowledge");
  return *sent.ack;
}

TickleResult StandGateway::tickle(ParticipantId sender, ParticipantId receiver) {
  if (sender == receiver) throw Error(Errc::SelfTickle, "a participant cannot tickle themselves");
  const auto program = compile(FacilitationType::ConnectionTickle, {sender, receiver});
  TickleEvent event{sender, receiver, false};
  std::function<void(const TickleEvent&)> listener;
  TickleResult result;
  {
    std::lock_guard lock(mu_);
    const auto& s = states_.at(receiver);
    if (s.link == LinkState::Lost) throw Error(Errc::LinkLost, "stand " + receiver.label() + " link lost");
    listener = tickle_listener_;
    if (s.busy) {
      event.queued = true;
      pending_tickles_.push_back(event);
      tickles_.push_back(event);
      result.queued = true;
    }
  }
  if (!result.queued) {
    try {
      reserve(program.touched());
    } catch (const Error& e) {
      if (e.code() != Errc::StandBusy) throw;
      std::lock_guard lock(mu_);
      event.queued = true;
      pending_tickles_.push_back(event);
      tickles_.push_back(event);
      result.queued = true;
    }
    if (!result.queued) {
      {
        std::lock_guard lock(mu_);
        tickles_.push_back(event);
      }
      ExecutionReport report;
      try {
        report = run(program);
      } catch (...) {
        release(program.touched());
        throw;
      }
      release(program.touched());
      result.report = std::move(report);
    }
  }
  if (listener) listener(event);
  return result;
}

void StandGateway::flush_tickles(const std::set<ParticipantId>& freed) {
  std::vector<TickleEvent> due;
  {
    std::lock_guard lock(mu_);
    for (auto it = pending_tickles_.begin(); it != pending_tickles_.end();) {
      if (freed.count(it->receiver)) {
        due.push_back(*it);
        it = pending_tickles_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (const auto& t : due) {
    try {
      dispatch(compile(FacilitationType::ConnectionTickle, {t.sender, t.receiver}));
    } catch (const Error& e) {
      if (e.code() != Errc::StandBusy) continue;
      std::lock_guard lock(mu_);
      pending_tickles_.push_back(t);
    }
  }
}

StandState StandGateway::state(ParticipantId stand) const {
  std::lock_guard lock(mu_);
  return states_.at(stand);
}

std::vector<StandState> StandGateway::states() const {
  std::lock_guard lock(mu_);
  std::vector<StandState> out;
  for (const auto& [id, s] : states_) out.push_back(s);
  return out;
}

void StandGateway::reconnect(ParticipantId stand) {
  std::lock_guard lock(mu_);
  if (links_.count(stand) && links_.at(stand)) states_[stand].link = LinkState::Connected;
}

std::vector<FrameRecord> StandGateway::frame_log() const {
  std::lock_guard lock(mu_);
  return frames_;
}

std::size_t StandGateway::frames_sent() const {
  std::lock_guard lock(mu_);
  return frames_.size();
}

std::vector<TickleEvent> StandGateway::tickle_log() const {
  std::lock_guard lock(mu_);
  return tickles_;
}

void StandGateway::set_tickle_listener(std::function<void(const TickleEvent&)> listener) {
  std::lock_guard lock(mu_);
  tickle_listener_ = std::move(listener);
}

std::map<ParticipantId, std::shared_ptr<StandLink>> SimulatedFleet::as_links() const {
  std::map<ParticipantId, std::shared_ptr<StandLink>> out;
  for (const auto& [id, link] : links) out[id] = link;
  return out;
}

SimulatedFleet make_simulated_fleet(const GatewayConfig& config) {
  SimulatedFleet fleet;
  for (auto id : all_participants()) {
    auto stand = std::make_shared<SimulatedStand>(id, config.table, config.kinematics);
    fleet.stands[id] = stand;
    fleet.links[id] = std::make_shared<SimulatedLink>(stand);
  }
  return fleet;
}

}  // namespace facil
