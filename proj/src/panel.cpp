#include "facil/panel.hpp"

#include <deque>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "facil/error.hpp"

namespace facil {

using nlohmann::json;

PanelBridge::PanelBridge(FacilitationEngine& engine, std::string token, bool read_only)
    : engine_(engine), token_(std::move(token)), read_only_(read_only) {
  engine_.set_listener([this](const json& m) { publish(m); });
}

PanelBridge::~PanelBridge() { engine_.set_listener(nullptr); }

int PanelBridge::connect(Send send) {
  std::lock_guard lock(mu_);
  const int id = next_id_++;
  conns_[id].send = std::move(send);
  return id;
}

void PanelBridge::disconnect(int connection) {
  std::lock_guard lock(mu_);
  conns_.erase(connection);
  if (operator_ == connection) operator_.reset();
}

std::optional<int> PanelBridge::operator_connection() const {
  std::lock_guard lock(mu_);
  return operator_;
}

void PanelBridge::publish(const json& message) {
  const auto text = message.dump();
  std::lock_guard lock(mu_);
  for (auto& [id, conn] : conns_) {
    if (conn.role != Role::None) conn.send(text);
  }
}

void PanelBridge::reply(int connection, const json& message) {
  const auto text = message.dump();
  std::lock_guard lock(mu_);
  if (auto it = conns_.find(connection); it != conns_.end()) it->second.send(text);
}

namespace {

json error_message(Errc code, const std::string& message) {
  return {{"type", "error"}, {"error", to_string(code)}, {"message", message}};
}

}  // namespace

json PanelBridge::hello(int connection, const json& msg) {
  const auto role = msg.value("role", std::string("operator"));
  if (role != "operator" && role != "observer") throw Error(Errc::ParseError, "role must be operator or observer");
  std::lock_guard lock(mu_);
  auto it = conns_.find(connection);
  if (it == conns_.end()) throw Error(Errc::InvalidArgument, "unknown connection");
  if (msg.value("token", std::string()) != token_) throw Error(Errc::Unauthorized, "bad operator token");
  if (role == "operator") {
    if (operator_ && *operator_ != connection) {
      throw Error(Errc::OperatorSessionActive, "another operator holds this session");
    }
    operator_ = connection;
    it->second.role = Role::Operator;
    it->second.operator_id = msg.value("operator", std::string("operator"));
  } else {
    if (operator_ == connection) operator_.reset();
    it->second.role = Role::Observer;
  }
  return {{"type", "ack"}, {"result", {{"ok", true}, {"role", role}, {"read_only", read_only_}}}};
}

OperatorAction PanelBridge::to_action(const json& msg, const std::string& operator_id) const {
  const auto type = msg.at("type").get<std::string>();
  OperatorAction a;
  a.t = std::max(0, engine_.clock());
  a.operator_id = operator_id;
  if (type == "confirm" || type == "dismiss") {
    a.verb = type == "confirm" ? OperatorVerb::Confirm : OperatorVerb::Dismiss;
    a.warning_id = msg.at("warning").get<std::string>();
    if (type == "confirm" && msg.contains("targets")) a.targets = parse_targets(msg["targets"]);
  } else if (type == "manual") {
    a.verb = OperatorVerb::Manual;
    a.facilitation = parse_facilitation(msg.at("facilitation").get<std::string>());
    a.targets = parse_targets(msg.at("targets"));
  } else if (type == "direct") {
    a.verb = OperatorVerb::Direct;
    a.stand = ParticipantId::parse(msg.at("stand").get<std::string>());
    a.command = {{"verb", msg.at("verb")}, {"args", msg.value("args", json::object())}};
    a.force = msg.value("force", false);
  } else if (type == "tickle") {
    a.verb = OperatorVerb::Tickle;
    a.from = ParticipantId::parse(msg.at("from").get<std::string>());
    a.to = ParticipantId::parse(msg.at("to").get<std::string>());
  } else {
    throw Error(Errc::ParseError, "unknown message type: " + type);
  }
  return a;
}

void PanelBridge::receive(int connection, const std::string& text) {
  json msg = json::parse(text, nullptr, false);
  json id;
  try {
    if (msg.is_discarded() || !msg.is_object()) throw Error(Errc::ParseError, "message is not a JSON object");
    id = msg.value("id", json());
    const auto type = msg.value("type", std::string());

    json out;
    if (type == "hello") {
      out = hello(connection, msg);
    } else {
      std::string operator_id;
      Role role = Role::None;
      {
        std::lock_guard lock(mu_);
        if (auto it = conns_.find(connection); it != conns_.end()) {
          role = it->second.role;
          operator_id = it->second.operator_id;
        }
      }
      if (role == Role::None) throw Error(Errc::Unauthorized, "hello first");
      if (type == "snapshot") {
        out = engine_.snapshot();
      } else {
        if (role != Role::Operator) throw Error(Errc::Unauthorized, "observers cannot act");
        if (read_only_) throw Error(Errc::Unauthorized, "read-only replay");
        OperatorAction action;
        try {
          action = to_action(msg, operator_id);
        } catch (const json::exception& e) {
          throw Error(Errc::ParseError, e.what());
        }
        out = {{"type", "ack"}, {"request", type}, {"result", to_json(engine_.apply(action))}};
      }
    }
    if (!id.is_null()) out["id"] = id;
    reply(connection, out);
    if (type == "hello") reply(connection, engine_.snapshot());
  } catch (const Error& e) {
    auto out = error_message(e.code(), e.what());
    if (!id.is_null()) out["id"] = id;
    reply(connection, out);
  }
}

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, PanelBridge& bridge, std::function<void(int, bool)> track)
      : ws_(std::move(socket)), bridge_(bridge), track_(std::move(track)) {}

  void start() {
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    std::weak_ptr<WsSession> weak = shared_from_this();
    id_ = bridge_.connect([weak](const std::string& text) {
      if (auto self = weak.lock()) {
        net::post(self->ws_.get_executor(), [self, text] { self->queue(text); });
      }
    });
    track_(id_, true);
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const auto text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->bridge_.receive(self->id_, text);
      self->read();
    });
  }

  void queue(const std::string& text) {
    if (closed_) return;
    outbox_.push_back(text);
    if (outbox_.size() == 1) write();
  }

  void write() {
    ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->write();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    bridge_.disconnect(id_);
    track_(id_, false);
  }

  websocket::stream<beast::tcp_stream> ws_;
  PanelBridge& bridge_;
  std::function<void(int, bool)> track_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  int id_ = 0;
  bool closed_ = false;
};

}  // namespace

struct PanelServer::Impl {
  PanelBridge& bridge;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::vector<std::thread> threads;
  std::mutex mu;
  std::set<int> live;
  bool stopped = false;

  explicit Impl(PanelBridge& b) : bridge(b) {}

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<WsSession>(std::move(socket), bridge, [this](int id, bool up) {
        std::lock_guard lock(mu);
        if (up) live.insert(id);
        else live.erase(id);
      })->start();
      accept();
    });
  }
};

PanelServer::PanelServer(PanelBridge& bridge, const std::string& host, int port)
    : impl_(std::make_unique<Impl>(bridge)) {
  const tcp::endpoint ep(net::ip::make_address(host), static_cast<unsigned short>(port));
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  impl_->accept();
  // Two threads so a blocking operator request does not stall pushes to other sessions.
  for (int i = 0; i < 2; ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
}

PanelServer::~PanelServer() { stop(); }

int PanelServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void PanelServer::stop() {
  if (impl_->stopped) return;
  impl_->stopped = true;
  impl_->ioc.stop();
  for (auto& t : impl_->threads) t.join();
  std::set<int> live;
  {
    std::lock_guard lock(impl_->mu);
    live.swap(impl_->live);
  }
  for (int id : live) impl_->bridge.disconnect(id);
}

}  // namespace facil
