#pragma once

// Operator-panel side of the engine. PanelBridge speaks the JSON message
// protocol and is independent of transport; PanelServer carries it over
// WebSocket.
//
// Upstream (panel -> engine), one JSON object per message:
//   {"type":"hello","token":..,"operator":..,"role":"operator"|"observer"}
//   {"type":"confirm","warning":id,"targets"?:[..]}
//   {"type":"dismiss","warning":id}
//   {"type":"manual","facilitation":..,"targets":[..]}
//   {"type":"direct","stand":..,"verb":..,"args"?:{..},"force"?:bool}
//   {"type":"tickle","from":..,"to":..}
//   {"type":"snapshot"}
// Any upstream message may carry "id", echoed in the reply.
//
// Downstream: the engine's tick / warning / event / program / report / state /
// error messages, plus {"type":"snapshot"} after hello and {"type":"ack"} per
// request.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "facil/engine.hpp"

namespace facil {

class PanelBridge {
 public:
  using Send = std::function<void(const std::string&)>;

  /// Installs itself as the engine listener. A read-only bridge serves
  /// replays: snapshots and pushes flow, every action is refused.
  PanelBridge(FacilitationEngine& engine, std::string token, bool read_only = false);
  ~PanelBridge();

  PanelBridge(const PanelBridge&) = delete;
  PanelBridge& operator=(const PanelBridge&) = delete;

  int connect(Send send);
  void disconnect(int connection);
  /// Handles one upstream text message.
  void receive(int connection, const std::string& text);

  /// Pushes a message to every authenticated connection in order.
  void publish(const nlohmann::json& message);

  std::optional<int> operator_connection() const;

 private:
  enum class Role { None, Operator, Observer };
  struct Conn {
    Send send;
    Role role = Role::None;
    std::string operator_id;
  };

  void reply(int connection, const nlohmann::json& message);
  nlohmann::json hello(int connection, const nlohmann::json& msg);
  OperatorAction to_action(const nlohmann::json& msg, const std::string& operator_id) const;

  FacilitationEngine& engine_;
  std::string token_;
  bool read_only_;
  mutable std::mutex mu_;
  std::map<int, Conn> conns_;
  std::optional<int> operator_;
  int next_id_ = 1;
};

/// WebSocket transport for a PanelBridge on host:port (0 picks a free port).
class PanelServer {
 public:
  PanelServer(PanelBridge& bridge, const std::string& host = "127.0.0.1", int port = 0);
  ~PanelServer();

  int port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace facil
