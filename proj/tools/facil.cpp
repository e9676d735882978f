// facil: command-line front end for the facilitation engine.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "facil/analytics.hpp"
#include "facil/engine.hpp"
#include "facil/error.hpp"
#include "facil/gateway.hpp"
#include "facil/net.hpp"
#include "facil/panel.hpp"
#include "facil/planner.hpp"
#include "facil/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace facil;

namespace {

std::atomic<bool> g_stop{false};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path);
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ParseError, path + ": invalid JSON");
  return j;
}

GatewayConfig gateway_config(const std::string& path) {
  return path.empty() ? GatewayConfig{} : GatewayConfig::load(path);
}

EngineConfig engine_config(const std::string& path, const GatewayConfig& gw) {
  EngineConfig c = path.empty() ? EngineConfig{} : EngineConfig::from_json(load_json(path));
  c.movement.table = gw.table;
  c.movement.kinematics = gw.kinematics;
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  out << text;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

void write_run(const ScenarioRun& run, const std::string& out_dir) {
  if (out_dir.empty()) {
    std::cout << join_lines(run.warning_log);
    return;
  }
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "warnings.ndjson", join_lines(run.warning_log));
  write_file(fs::path(out_dir) / "programs.ndjson", join_lines(run.program_log));
  write_file(fs::path(out_dir) / "journal.ndjson", join_lines(run.journal));
  write_file(fs::path(out_dir) / "features.ndjson", join_lines(run.feature_log));
}

void summarize(const ScenarioRun& run) {
  std::cerr << run.warnings.size() << " warnings, " << run.programs << " programs dispatched\n";
}

int check(const std::string& expect_path, const ScenarioRun& run) {
  if (expect_path.empty()) return 0;
  const auto mismatches = check_expectation(load_expectation(expect_path), run);
  for (const auto& m : mismatches) std::cerr << "mismatch: " << m << "\n";
  std::cerr << (mismatches.empty() ? "expectation met\n" : "expectation NOT met\n");
  return mismatches.empty() ? 0 : 1;
}

struct Runner {
  GatewayConfig gw;
  SimulatedFleet fleet;
  std::unique_ptr<StandGateway> gateway;

  Runner(const std::string& gateway_path, bool stands) : gw(gateway_config(gateway_path)) {
    if (!stands) return;
    fleet = make_simulated_fleet(gw);
    gateway = std::make_unique<StandGateway>(gw, fleet.as_links());
  }
};

std::vector<StreamItem> read_stream_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path);
  return read_stream(in);
}

int cmd_analyze(const std::string& log_path, const std::string& ratings_path, const std::string& out_dir,
                const std::string& config_path) {
  const auto log = load_session_log(log_path);
  const auto config = engine_config(config_path, {});
  const auto dump = feature_dump(log.matrix, config.features);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  std::string features;
  for (const auto& f : dump) features += to_json(f).dump() + "\n";
  write_file(out / "features.ndjson", features);

  int status = 0;
  auto attempt = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      std::cerr << what << ": " << e.what() << "\n";
      status = 2;
    }
  };
  attempt("stage report", [&] { write_file(out / "stage_report.csv", stage_report_csv(stage_report(log))); });
  attempt("substages", [&] {
    write_file(out / "substages.csv", segment_metrics_csv(segment_metrics(dump, segment_substages(log))));
  });
  if (!ratings_path.empty()) {
    const auto ratings = load_ratings(ratings_path);
    if (ratings.oneness) attempt("oneness", [&] { write_file(out / "oneness.csv", oneness_csv(oneness(*ratings.oneness))); });
    if (!ratings.peer_allocations.empty()) {
      attempt("peer sd", [&] { write_file(out / "peer_sd.csv", peer_sd_csv(peer_eval_sd(ratings.peer_allocations))); });
    }
  }
  return status;
}

int cmd_compile(const std::string& facilitation, const std::vector<std::string>& targets,
                const std::vector<std::string>& busy, const std::string& gateway_path, bool check_program) {
  const auto gw = gateway_config(gateway_path);
  auto params = engine_config("", gw).movement;
  std::vector<ParticipantId> ids;
  for (const auto& t : targets) ids.push_back(ParticipantId::parse(t));
  std::set<ParticipantId> busy_ids;
  for (const auto& b : busy) busy_ids.insert(ParticipantId::parse(b));
  const auto program = compile(parse_facilitation(facilitation), ids, params, busy_ids);
  json out = to_json(program);
  out["duration_ms"] = program.duration_ms();
  if (check_program) {
    json poses = json::object();
    for (const auto& [id, p] : simulate_program(program, params)) poses[id.label()] = {p.x_mm, p.y_mm, p.heading_deg};
    out["final_poses"] = poses;
    out["violations"] = program_violations(program, params);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_stand_sim(const std::string& stand, int port, const std::string& bind, const std::string& gateway_path) {
  const auto gw = gateway_config(gateway_path);
  const auto id = ParticipantId::parse(stand);
  if (port < 0 && gw.endpoints.count(id)) port = gw.endpoints.at(id).port;
  StandServer server(std::make_shared<SimulatedStand>(id, gw.table, gw.kinematics),
                     static_cast<std::uint16_t>(std::max(port, 0)), bind);
  std::cout << "stand " << id.label() << " listening on " << bind << ":" << server.port() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  return 0;
}

struct ServeOptions {
  std::string gateway_path;
  std::string config_path;
  std::string token;
  std::string host = "127.0.0.1";
  int panel_port = 8765;
  int tickle_port = 8080;
  int ingest_port = 7000;
  bool simulated = false;
  std::string replay;
  double speed = 1.0;
  std::string labels = "P1,P2,P3,P4";
  std::string out_dir;
};

int cmd_serve(const ServeOptions& o) {
  const auto gw = gateway_config(o.gateway_path);
  auto config = engine_config(o.config_path, gw);
  config.async_dispatch = true;
  const bool read_only = !o.replay.empty();

  SimulatedFleet fleet;
  std::unique_ptr<StandGateway> gateway;
  if (!read_only) {
    std::map<ParticipantId, std::shared_ptr<StandLink>> links;
    if (o.simulated) {
      fleet = make_simulated_fleet(gw);
      links = fleet.as_links();
    } else {
      links = make_tcp_links(gw);
    }
    gateway = std::make_unique<StandGateway>(gw, links, std::make_shared<RealtimeClock>());
  }

  std::vector<StreamItem> replay_items;
  std::vector<std::string> labels;
  if (read_only) {
    replay_items = read_stream_file(o.replay);
    if (!replay_items.empty()) {
      if (const auto* h = std::get_if<ParticipantsHeader>(&replay_items.front())) labels = h->labels;
    }
  }
  if (labels.empty()) {
    std::stringstream ss(o.labels);
    for (std::string l; std::getline(ss, l, ',');) labels.push_back(l);
  }

  FacilitationEngine engine(labels, config, gateway.get());
  PanelBridge bridge(engine, o.token, read_only);
  PanelServer panel(bridge, o.host, o.panel_port);
  std::cout << "panel ws://" << o.host << ":" << panel.port() << (read_only ? " (read-only replay)" : "") << std::endl;

  std::unique_ptr<TickleServer> tickle;
  std::unique_ptr<LineServer> ingest;
  std::thread feeder;
  if (gateway) {
    gateway->set_tickle_listener([&engine](const TickleEvent& e) { engine.note_tickle(e); });
    tickle = std::make_unique<TickleServer>(*gateway, o.host, o.tickle_port);
    std::cout << "tickle http://" << o.host << ":" << tickle->port() << "/tickle" << std::endl;
    ingest = std::make_unique<LineServer>(
        [&engine](const std::string& line) {
          try {
            const auto item = parse_stream_line(line);
            if (std::holds_alternative<OperatorAction>(item)) {
              throw Error(Errc::Unauthorized, "operator actions arrive through the panel");
            }
            engine.ingest(item);
            return json{{"ok", true}, {"t", engine.clock()}}.dump();
          } catch (const Error& e) {
            return json{{"ok", false}, {"error", to_string(e.code())}, {"message", e.what()}}.dump();
          }
        },
        static_cast<std::uint16_t>(o.ingest_port), o.host);
    std::cout << "ingest tcp://" << o.host << ":" << ingest->port() << std::endl;
  } else {
    feeder = std::thread([&] {
      int last_t = -1;
      for (const auto& item : replay_items) {
        if (g_stop) return;
        if (const auto* f = std::get_if<DiarizationFrame>(&item); f && o.speed > 0 && last_t >= 0) {
          std::this_thread::sleep_for(std::chrono::duration<double>((f->t - last_t) / o.speed));
        }
        if (const auto* f = std::get_if<DiarizationFrame>(&item)) last_t = f->t;
        try {
          engine.ingest(item);
        } catch (const Error& e) {
          std::cerr << "replay: " << e.what() << "\n";
          return;
        }
      }
      std::cerr << "replay finished at t=" << engine.clock() << "\n";
    });
  }

  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  if (feeder.joinable()) feeder.join();
  if (ingest) ingest->stop();
  if (tickle) tickle->stop();
  panel.stop();
  engine.drain();
  if (!o.out_dir.empty()) {
    fs::create_directories(o.out_dir);
    write_file(fs::path(o.out_dir) / "warnings.ndjson", join_lines(engine.warning_log()));
    write_file(fs::path(o.out_dir) / "programs.ndjson", join_lines(engine.program_log()));
    write_file(fs::path(o.out_dir) / "journal.ndjson", join_lines(engine.journal()));
    write_file(fs::path(o.out_dir) / "features.ndjson", join_lines(engine.feature_log()));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group facilitation engine"};
  app.require_subcommand(1);

  std::string scenario_path, expect_path, out_dir, config_path, gateway_path, stream_path, output;
  bool stands = false;

  auto* simulate = app.add_subcommand("simulate", "Run a scenario file through the engine");
  simulate->add_option("scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--expect", expect_path, "Expectation JSON to check against")->check(CLI::ExistingFile);
  simulate->add_option("--out", out_dir, "Directory for warning/program/journal/feature logs");
  simulate->add_option("--config", config_path, "Engine config JSON")->check(CLI::ExistingFile);
  simulate->add_option("--gateway", gateway_path, "Gateway config JSON")->check(CLI::ExistingFile);
  simulate->add_flag("--stands", stands, "Execute confirmed programs on simulated stands");

  auto* generate_cmd = app.add_subcommand("generate", "Expand a scenario into a replay stream");
  generate_cmd->add_option("scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  generate_cmd->add_option("-o,--output", output, "Output file (default stdout)");

  auto* replay = app.add_subcommand("replay", "Replay a session stream through a fresh engine");
  replay->add_option("stream", stream_path, "NDJSON session stream")->required()->check(CLI::ExistingFile);
  replay->add_option("--expect", expect_path, "Expectation JSON to check against")->check(CLI::ExistingFile);
  replay->add_option("--out", out_dir, "Directory for logs");
  replay->add_option("--config", config_path, "Engine config JSON")->check(CLI::ExistingFile);
  replay->add_option("--gateway", gateway_path, "Gateway config JSON")->check(CLI::ExistingFile);
  replay->add_flag("--stands", stands, "Execute confirmed programs on simulated stands");

  std::string ratings_path, analyze_out = ".";
  auto* analyze = app.add_subcommand("analyze", "Post-session report tables");
  analyze->add_option("session-log", stream_path, "NDJSON session log")->required()->check(CLI::ExistingFile);
  analyze->add_option("--ratings", ratings_path, "Ratings JSON (ios, we_scale, peer_allocations)")
      ->check(CLI::ExistingFile);
  analyze->add_option("--out", analyze_out, "Output directory");
  analyze->add_option("--config", config_path, "Engine config JSON (feature window)")->check(CLI::ExistingFile);

  std::string facilitation;
  std::vector<std::string> targets, busy;
  bool check_program = false;
  auto* compile_cmd = app.add_subcommand("compile", "Print the choreography program for a facilitation");
  compile_cmd->add_option("facilitation", facilitation, "e.g. silence_breaking")->required();
  compile_cmd->add_option("targets", targets, "Target participants, e.g. P1 P3");
  compile_cmd->add_option("--busy", busy, "Stands currently busy");
  compile_cmd->add_option("--gateway", gateway_path, "Gateway config JSON")->check(CLI::ExistingFile);
  compile_cmd->add_flag("--check", check_program, "Simulate and list invariant violations");

  std::string stand = "P1", bind = "127.0.0.1";
  int stand_port = -1;
  auto* stand_sim = app.add_subcommand("stand-sim", "Serve one simulated stand over TCP");
  stand_sim->add_option("--stand", stand, "Stand id");
  stand_sim->add_option("--port", stand_port, "Port (default from --gateway, else any)");
  stand_sim->add_option("--bind", bind, "Bind address");
  stand_sim->add_option("--gateway", gateway_path, "Gateway config JSON")->check(CLI::ExistingFile);

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Live session: ingest socket, panel WebSocket, tickle endpoint");
  serve->add_option("--token", serve_opts.token, "Shared operator token")->required();
  serve->add_option("--gateway", serve_opts.gateway_path, "Gateway config JSON")->check(CLI::ExistingFile);
  serve->add_option("--config", serve_opts.config_path, "Engine config JSON")->check(CLI::ExistingFile);
  serve->add_option("--host", serve_opts.host, "Listen address");
  serve->add_option("--panel-port", serve_opts.panel_port, "WebSocket port");
  serve->add_option("--tickle-port", serve_opts.tickle_port, "HTTP tickle port");
  serve->add_option("--ingest-port", serve_opts.ingest_port, "NDJSON ingest port");
  serve->add_flag("--simulated", serve_opts.simulated, "Use in-process simulated stands");
  serve->add_option("--replay", serve_opts.replay, "Read-only replay of a session log")->check(CLI::ExistingFile);
  serve->add_option("--speed", serve_opts.speed, "Replay speed factor (0 = no pacing)");
  serve->add_option("--labels", serve_opts.labels, "Comma-separated participant labels");
  serve->add_option("--out", serve_opts.out_dir, "Write logs here on shutdown");

  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });

  try {
    if (*simulate) {
      Runner r(gateway_path, stands);
      const auto run = run_scenario(load_scenario(scenario_path), engine_config(config_path, r.gw), r.gateway.get());
      write_run(run, out_dir);
      summarize(run);
      return check(expect_path, run);
    }
    if (*generate_cmd) {
      std::string text;
      for (const auto& item : generate(load_scenario(scenario_path))) text += to_json(item).dump() + "\n";
      if (output.empty()) std::cout << text;
      else write_file(output, text);
      return 0;
    }
    if (*replay) {
      Runner r(gateway_path, stands);
      const auto run = run_stream(read_stream_file(stream_path), engine_config(config_path, r.gw), r.gateway.get());
      write_run(run, out_dir);
      summarize(run);
      return check(expect_path, run);
    }
    if (*analyze) return cmd_analyze(stream_path, ratings_path, analyze_out, config_path);
    if (*compile_cmd) return cmd_compile(facilitation, targets, busy, gateway_path, check_program);
    if (*stand_sim) return cmd_stand_sim(stand, stand_port, bind, gateway_path);
    if (*serve) return cmd_serve(serve_opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
