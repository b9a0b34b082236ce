#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "segway/scenario.hpp"
#include "segway/teleop_session.hpp"

namespace segway::cli {

struct ServerOptions {
  std::string bind = "127.0.0.1";
  unsigned short port = 0;  // 0 picks a free port
  double speedup = 1.0;     // wall-clock pacing only; the sim dt is fixed
  std::size_t client_queue_limit = 64;
  teleop::SessionOptions session;
};

/// HTTP + websocket front end for one TeleopSession.
///   /ws          websocket, JSON messages of teleop_session.hpp
///   /health      {"status":"ok","tick":n}
///   /trace.csv   session trace in the simulator CSV format
/// The first connected client holds the steering token; later clients are
/// read-only viewers until the holder leaves.
class TeleopServer {
 public:
  TeleopServer(sim::Scenario defaults, ServerOptions opts);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts the network and tick threads. Throws on bind failure.
  void start();
  /// Stops both threads; idempotent.
  void stop();

  unsigned short port() const;
  long long tick_count() const;
  /// Valid once stop() has returned.
  const teleop::TeleopSession& session() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace segway::cli
