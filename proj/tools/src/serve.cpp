#include <csignal>
#include <filesystem>
#include <ostream>

#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>

#include "commands.hpp"
#include "segway/report.hpp"
#include "server.hpp"

namespace segway::cli {

namespace fs = std::filesystem;

int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err) {
  sim::Scenario scenario;
  try {
    scenario = args.scenario ? sim::Scenario::load(*args.scenario) : sim::default_scenario();
    fs::create_directories(args.out_dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  ServerOptions opts;
  opts.bind = args.bind;
  opts.port = args.port;
  opts.speedup = args.speedup;
  opts.session.tick_hz = args.tick_hz;
  opts.session.broadcast_hz = args.broadcast_hz;

  std::unique_ptr<TeleopServer> server;
  try {
    server = std::make_unique<TeleopServer>(scenario, opts);
    server->start();
  } catch (const std::exception& e) {
    err << "error: cannot serve on " << args.bind << ':' << args.port << ": " << e.what() << '\n';
    return kInputError;
  }
  out << "listening on http://" << args.bind << ':' << server->port() << "  (/ws, /health, /trace.csv)"
      << std::endl;

  boost::asio::io_context signals_ctx;
  boost::asio::signal_set signals(signals_ctx, SIGINT, SIGTERM);
  signals.async_wait([](const boost::system::error_code&, int) {});
  signals_ctx.run();

  server->stop();
  const auto& session = server->session();
  const auto trace_path = (fs::path(args.out_dir) / "session_trace.csv").string();
  const auto replay_path = (fs::path(args.out_dir) / "session_replay.scn").string();
  try {
    session.trace().save_csv(trace_path);
    RunManifest m;
    m.command = "serve";
    if (args.scenario) m.config_paths = {*args.scenario};
    m.seed = scenario.config.rng_seed;
    m.outputs = {trace_path};
    m.extra = {{"ticks", std::to_string(session.tick_count())},
               {"origin_time", format_exact(session.origin_time())}};
    try {
      session.replay_scenario().to_document().save(replay_path);
      m.outputs.push_back(replay_path);
    } catch (const std::logic_error& e) {
      m.extra.push_back({"replay", e.what()});
    }
    m.save((fs::path(args.out_dir) / "session_manifest.txt").string());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  out << "session trace: " << trace_path << " (" << session.trace().size() << " samples)\n";
  return kOk;
}

}  // namespace segway::cli
