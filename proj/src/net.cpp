#include "facil/net.hpp"

#include <atomic>
#include <thread>

#include <boost/asio.hpp>
#include <httplib.h>

#include "facil/error.hpp"

namespace facil {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using boost::system::error_code;

struct TcpLink::Impl {
  std::string host;
  std::uint16_t port;
  asio::io_context io;
  tcp::socket socket{io};
  asio::streambuf buffer;

  // Runs queued handlers until `done` or the deadline; false on timeout.
  bool run(std::chrono::steady_clock::time_point deadline, const bool& done) {
    io.restart();
    while (!done) {
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline || io.stopped()) break;
      io.run_one_for(deadline - now);
    }
    return done;
  }

  void reset() {
    error_code ignored;
    socket.close(ignored);
    io.restart();
    io.poll();
    buffer.consume(buffer.size());
  }
};

TcpLink::TcpLink(std::string host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  impl_->host = std::move(host);
  impl_->port = port;
}

TcpLink::~TcpLink() = default;

std::optional<std::string> TcpLink::exchange(const std::string& line, std::chrono::milliseconds timeout) {
  auto& s = *impl_;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  error_code ec;

  if (!s.socket.is_open()) {
    tcp::endpoint ep(asio::ip::make_address(s.host, ec), s.port);
    if (ec) return std::nullopt;
    bool done = false;
    s.socket.async_connect(ep, [&](const error_code& e) {
      ec = e;
      done = true;
    });
    if (!s.run(deadline, done) || ec) {
      s.reset();
      return std::nullopt;
    }
  }

  const std::string out = line + "\n";
  bool written = false;
  asio::async_write(s.socket, asio::buffer(out), [&](const error_code& e, std::size_t) {
    ec = e;
    written = true;
  });
  if (!s.run(deadline, written) || ec) {
    s.reset();
    return std::nullopt;
  }

  bool read = false;
  asio::async_read_until(s.socket, s.buffer, '\n', [&](const error_code& e, std::size_t) {
    ec = e;
    read = true;
  });
  if (!s.run(deadline, read) || ec) {
    s.reset();
    return std::nullopt;
  }
  std::istream in(&s.buffer);
  std::string reply;
  std::getline(in, reply);
  return reply;
}

struct StandServer::Impl {
  std::shared_ptr<SimulatedStand> stand;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::thread thread;
  std::atomic<int> drop{0};

  struct Session : std::enable_shared_from_this<Session> {
    Impl& owner;
    tcp::socket socket;
    asio::streambuf buffer;
    std::string reply;

    Session(Impl& o, tcp::socket s) : owner(o), socket(std::move(s)) {}

    void read() {
      asio::async_read_until(socket, buffer, '\n', [self = shared_from_this()](const error_code& e, std::size_t) {
        if (e) return;
        std::istream in(&self->buffer);
        std::string line;
        std::getline(in, line);
        self->reply = self->owner.stand->handle_line(line) + "\n";
        int pending = self->owner.drop.load();
        while (pending > 0 && !self->owner.drop.compare_exchange_weak(pending, pending - 1)) {
        }
        if (pending > 0) {
          self->read();
          return;
        }
        asio::async_write(self->socket, asio::buffer(self->reply), [self](const error_code& we, std::size_t) {
          if (!we) self->read();
        });
      });
    }
  };

  void accept() {
    acceptor.async_accept([this](const error_code& e, tcp::socket socket) {
      if (e) return;
      std::make_shared<Session>(*this, std::move(socket))->read();
      accept();
    });
  }
};

StandServer::StandServer(std::shared_ptr<SimulatedStand> stand, std::uint16_t port, const std::string& bind)
    : impl_(std::make_unique<Impl>()) {
  impl_->stand = std::move(stand);
  tcp::endpoint ep(asio::ip::make_address(bind), port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  impl_->accept();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

StandServer::~StandServer() { stop(); }

std::uint16_t StandServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void StandServer::stop() {
  if (!impl_->thread.joinable()) return;
  impl_->io.stop();
  impl_->thread.join();
}

void StandServer::drop_acks(int n) { impl_->drop = n; }

SimulatedStand& StandServer::stand() { return *impl_->stand; }

struct LineServer::Impl {
  Handler handler;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::thread thread;

  struct Session : std::enable_shared_from_this<Session> {
    Impl& owner;
    tcp::socket socket;
    asio::streambuf buffer;
    std::string reply;

    Session(Impl& o, tcp::socket s) : owner(o), socket(std::move(s)) {}

    void read() {
      asio::async_read_until(socket, buffer, '\n', [self = shared_from_this()](const error_code& e, std::size_t) {
        if (e) return;
        std::istream in(&self->buffer);
        std::string line;
        std::getline(in, line);
        if (line.find_first_not_of(" \t\r") == std::string::npos) return self->read();
        self->reply = self->owner.handler(line) + "\n";
        asio::async_write(self->socket, asio::buffer(self->reply), [self](const error_code& we, std::size_t) {
          if (!we) self->read();
        });
      });
    }
  };

  void accept() {
    acceptor.async_accept([this](const error_code& e, tcp::socket socket) {
      if (e) return;
      std::make_shared<Session>(*this, std::move(socket))->read();
      accept();
    });
  }
};

LineServer::LineServer(Handler handler, std::uint16_t port, const std::string& bind)
    : impl_(std::make_unique<Impl>()) {
  impl_->handler = std::move(handler);
  tcp::endpoint ep(asio::ip::make_address(bind), port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  impl_->accept();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

LineServer::~LineServer() { stop(); }

std::uint16_t LineServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void LineServer::stop() {
  if (!impl_->thread.joinable()) return;
  impl_->io.stop();
  impl_->thread.join();
}

std::map<ParticipantId, std::shared_ptr<StandLink>> make_tcp_links(const GatewayConfig& config) {
  std::map<ParticipantId, std::shared_ptr<StandLink>> links;
  for (const auto& [id, ep] : config.endpoints) links[id] = std::make_shared<TcpLink>(ep.host, ep.port);
  return links;
}

namespace {

std::string error_body(const std::string& code, const std::string& message) {
  return nlohmann::json{{"status", "error"}, {"error", code}, {"message", message}}.dump();
}

}  // namespace

std::pair<int, std::string> handle_tickle_request(StandGateway& gateway, const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("from") || !j.contains("to") || !j["from"].is_string() ||
      !j["to"].is_string()) {
    return {400, error_body("ParseError", "expected {\"from\":\"P1\",\"to\":\"P3\"}")};
  }
  try {
    const auto from = ParticipantId::parse(j["from"].get<std::string>());
    const auto to = ParticipantId::parse(j["to"].get<std::string>());
    const auto result = gateway.tickle(from, to);
    return {200, nlohmann::json{{"status", "ok"}, {"queued", result.queued}}.dump()};
  } catch (const Error& e) {
    const int status = e.code() == Errc::LinkLost ? 409 : 400;
    return {status, error_body(to_string(e.code()), e.what())};
  }
}

struct TickleServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

TickleServer::TickleServer(StandGateway& gateway, const std::string& host, int port)
    : impl_(std::make_unique<Impl>()) {
  impl_->server.Post("/tickle", [&gateway](const httplib::Request& req, httplib::Response& res) {
    const auto [status, body] = handle_tickle_request(gateway, req.body);
    res.status = status;
    res.set_content(body, "application/json");
  });
  impl_->port = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (impl_->port <= 0) throw Error(Errc::InvalidArgument, "cannot bind tickle endpoint on " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

TickleServer::~TickleServer() { stop(); }

int TickleServer::port() const { return impl_->port; }

void TickleServer::stop() {
  if (!impl_->thread.joinable()) return;
  impl_->server.stop();
  impl_->thread.join();
}

}  // namespace facil
