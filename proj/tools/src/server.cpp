#include "server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <variant>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

namespace segway::cli {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class WsClient;

struct Connect {
  std::uint64_t id;
  std::shared_ptr<WsClient> client;
};
struct Disconnect {
  std::uint64_t id;
};
struct Message {
  std::uint64_t id;
  std::string text;
};
struct Query {
  std::function<void(const teleop::TeleopSession&)> fn;
};
using InboxItem = std::variant<Connect, Disconnect, Message, Query>;

class Inbox {
 public:
  void push(InboxItem item) {
    std::lock_guard lock(mu_);
    items_.push_back(std::move(item));
  }
  std::deque<InboxItem> drain() {
    std::lock_guard lock(mu_);
    return std::exchange(items_, {});
  }

 private:
  std::mutex mu_;
  std::deque<InboxItem> items_;
};

// One websocket peer. All members are touched only on the connection's strand.
class WsClient : public std::enable_shared_from_this<WsClient> {
 public:
  WsClient(tcp::socket&& socket, std::uint64_t id, Inbox& inbox, std::size_t limit)
      : ws_(std::move(socket)), id_(id), inbox_(inbox), limit_(limit) {}

  void run(http::request<http::string_body> req) {
    beast::get_lowest_layer(ws_).expires_never();
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->inbox_.push(Connect{self->id_, self});
      self->read();
    });
  }

  // Called from the tick thread; never blocks it.
  void send(std::string msg, bool droppable) {
    net::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg), droppable]() mutable {
      self->enqueue(std::move(msg), droppable);
    });
  }

  void close() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      self->ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {});
    });
  }

 private:
  struct Frame {
    std::string text;
    bool droppable;
  };

  void enqueue(std::string msg, bool droppable) {
    if (queue_.size() >= limit_) {
      if (droppable) return;
      // Make room by discarding a queued telemetry frame that is not being written.
      for (auto it = queue_.begin() + (writing_ ? 1 : 0); it != queue_.end(); ++it) {
        if (it->droppable) {
          queue_.erase(it);
          break;
        }
      }
    }
    queue_.push_back({std::move(msg), droppable});
    if (!writing_) write();
  }

  void write() {
    writing_ = true;
    ws_.async_write(net::buffer(queue_.front().text),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->queue_.pop_front();
                      self->writing_ = false;
                      if (ec) return;
                      if (!self->queue_.empty()) self->write();
                    });
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->inbox_.push(Disconnect{self->id_});
        return;
      }
      self->inbox_.push(Message{self->id_, beast::buffers_to_string(self->buffer_.data())});
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::uint64_t id_;
  Inbox& inbox_;
  std::size_t limit_;
  beast::flat_buffer buffer_;
  std::deque<Frame> queue_;
  bool writing_ = false;
};

struct Shared {
  Inbox inbox;
  std::atomic<long long> ticks{0};
  std::atomic<std::uint64_t> next_client{1};
  std::size_t queue_limit = 64;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, Shared& shared) : stream_(std::move(socket)), shared_(shared) {}

  void run() {
    net::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->read(); });
  }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->handle();
    });
  }

  void handle() {
    if (websocket::is_upgrade(req_)) {
      if (req_.target() != "/ws") return respond(http::status::not_found, "text/plain", "no such endpoint\n");
      const auto id = shared_.next_client++;
      std::make_shared<WsClient>(stream_.release_socket(), id, shared_.inbox, shared_.queue_limit)
          ->run(std::move(req_));
      return;
    }
    if (req_.method() != http::verb::get) {
      return respond(http::status::method_not_allowed, "text/plain", "GET only\n");
    }
    if (req_.target() == "/health") {
      return respond(http::status::ok, "application/json",
                     "{\"status\":\"ok\",\"tick\":" + std::to_string(shared_.ticks.load()) + "}");
    }
    if (req_.target() == "/trace.csv") {
      // The trace belongs to the tick thread; ask it for a copy between ticks.
      shared_.inbox.push(Query{[self = shared_from_this()](const teleop::TeleopSession& s) {
        net::post(self->stream_.get_executor(), [self, csv = s.trace().to_csv()]() mutable {
          self->respond(http::status::ok, "text/csv", std::move(csv));
        });
      }});
      return;
    }
    respond(http::status::not_found, "text/plain", "no such endpoint\n");
  }

  void respond(http::status status, const char* type, std::string body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::server, "segway_lab");
    res->set(http::field::content_type, type);
    res->keep_alive(req_.keep_alive());
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (res->keep_alive()) return self->read();
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  Shared& shared_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace

struct TeleopServer::Impl {
  Impl(sim::Scenario defaults, ServerOptions o) : opts(std::move(o)), session(defaults, opts.session) {
    shared.queue_limit = opts.client_queue_limit;
  }

  void accept() {
    acceptor->async_accept(net::make_strand(*ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpConnection>(std::move(socket), shared)->run();
      accept();
    });
  }

  void tick_loop();

  ServerOptions opts;
  teleop::TeleopSession session;
  Shared shared;
  // Owned by pointer so stop() can destroy pending handlers, which drops the
  // last references to open connections.
  std::unique_ptr<net::io_context> ioc = std::make_unique<net::io_context>(1);
  std::optional<tcp::acceptor> acceptor{std::in_place, *ioc};
  std::thread io_thread;
  std::thread tick_thread;
  std::atomic<bool> running{false};
  std::mutex stop_mu;
  std::condition_variable stop_cv;
  unsigned short bound_port = 0;
  bool started = false;
  bool stopped = false;
};

void TeleopServer::Impl::tick_loop() {
  std::map<std::uint64_t, std::shared_ptr<WsClient>> clients;  // ordered by connection id
  std::optional<std::uint64_t> holder;

  auto deliver = [&](const teleop::Outbound& o) {
    const bool droppable = o.json.find("\"type\":\"telemetry\"") != std::string::npos;
    if (o.recipient) {
      if (auto it = clients.find(*o.recipient); it != clients.end()) it->second->send(o.json, droppable);
      return;
    }
    for (auto& [id, c] : clients) c->send(o.json, droppable);
  };

  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(session.tick_dt() / opts.speedup));
  auto next = std::chrono::steady_clock::now();
  while (running.load()) {
    for (auto& item : shared.inbox.drain()) {
      if (auto* c = std::get_if<Connect>(&item)) {
        clients[c->id] = c->client;
        if (!holder) holder = c->id;
        c->client->send(session.hello(holder == c->id), false);
      } else if (auto* d = std::get_if<Disconnect>(&item)) {
        clients.erase(d->id);
        if (holder == d->id) {
          holder.reset();
          if (!clients.empty()) {
            holder = clients.begin()->first;
            deliver(session.event("token", "steering token granted", *holder));
          }
        }
      } else if (auto* m = std::get_if<Message>(&item)) {
        if (holder != m->id) {
          deliver(session.event("error", "read-only viewer: another client holds the steering token", m->id));
          continue;
        }
        for (const auto& o : session.handle_message(m->text, m->id)) deliver(o);
      } else {
        std::get<Query>(item).fn(session);
      }
    }

    for (const auto& o : session.tick()) deliver(o);
    shared.ticks.store(session.tick_count());

    next += period;
    const auto now = std::chrono::steady_clock::now();
    // Running late only delays ticks; the simulated dt never stretches.
    if (now - next > std::chrono::milliseconds(250)) next = now;
    std::unique_lock lock(stop_mu);
    stop_cv.wait_until(lock, next, [this] { return !running.load(); });
  }
  for (auto& [id, c] : clients) c->close();
}

TeleopServer::TeleopServer(sim::Scenario defaults, ServerOptions opts)
    : impl_(std::make_unique<Impl>(std::move(defaults), std::move(opts))) {
  if (!(impl_->opts.speedup > 0.0)) throw std::invalid_argument("speedup must be positive");
}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start() {
  auto& m = *impl_;
  if (m.started) throw std::logic_error("server already started");
  const tcp::endpoint ep(net::ip::make_address(m.opts.bind), m.opts.port);
  m.acceptor->open(ep.protocol());
  m.acceptor->set_option(net::socket_base::reuse_address(true));
  m.acceptor->bind(ep);
  m.acceptor->listen(net::socket_base::max_listen_connections);
  m.bound_port = m.acceptor->local_endpoint().port();
  m.started = true;
  m.running = true;
  m.accept();
  m.io_thread = std::thread([&m] { m.ioc->run(); });
  m.tick_thread = std::thread([&m] { m.tick_loop(); });
}

void TeleopServer::stop() {
  auto& m = *impl_;
  if (!m.started || m.stopped) return;
  {
    std::lock_guard lock(m.stop_mu);
    m.running = false;
  }
  m.stop_cv.notify_all();
  m.tick_thread.join();
  // Let the close frames go out before tearing the loop down.
  net::post(*m.ioc, [&m] {
    beast::error_code ignored;
    m.acceptor->close(ignored);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  m.ioc->stop();
  m.io_thread.join();
  m.shared.inbox.drain();  // queued connects still hold sockets
  m.acceptor.reset();
  m.ioc.reset();
  m.stopped = true;
}

unsigned short TeleopServer::port() const { return impl_->bound_port; }

long long TeleopServer::tick_count() const { return impl_->shared.ticks.load(); }

const teleop::TeleopSession& TeleopServer::session() const {
  if (!impl_->stopped) throw std::logic_error("session() is only available after stop()");
  return impl_->session;
}

}  // namespace segway::cli
