#pragma once

// Network transports: TCP link to a stand, a TCP server wrapping a simulated
// stand, and the HTTP tickle endpoint.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "facil/gateway.hpp"

namespace facil {

/// Newline-delimited JSON over TCP. Reconnects lazily; a timed-out exchange
/// drops the connection so a late ack cannot be mistaken for the next one.
class TcpLink : public StandLink {
 public:
  TcpLink(std::string host, std::uint16_t port);
  ~TcpLink() override;

  std::optional<std::string> exchange(const std::string& line, std::chrono::milliseconds timeout) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Serves one SimulatedStand on a TCP port (0 picks a free port).
class StandServer {
 public:
  StandServer(std::shared_ptr<SimulatedStand> stand, std::uint16_t port = 0, const std::string& bind = "127.0.0.1");
  ~StandServer();

  std::uint16_t port() const;
  void stop();
  /// Swallow the replies to the next n frames (the stand still executes them).
  void drop_acks(int n);
  SimulatedStand& stand();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Newline-delimited request/reply server: each line is answered with
/// handler(line) plus a newline. Used for live session ingestion.
class LineServer {
 public:
  using Handler = std::function<std::string(const std::string&)>;
  LineServer(Handler handler, std::uint16_t port = 0, const std::string& bind = "127.0.0.1");
  ~LineServer();

  std::uint16_t port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Links for every endpoint in the config; missing endpoints get no link.
std::map<ParticipantId, std::shared_ptr<StandLink>> make_tcp_links(const GatewayConfig& config);

/// POST /tickle {"from":"P1","to":"P3"}.
class TickleServer {
 public:
  TickleServer(StandGateway& gateway, const std::string& host = "127.0.0.1", int port = 0);
  ~TickleServer();

  int port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Request handling shared by the HTTP server and tests: returns (status, body).
std::pair<int, std::string> handle_tickle_request(StandGateway& gateway, const std::string& body);

}  // namespace facil
