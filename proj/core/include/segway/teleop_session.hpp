#pragma once

// Live steering session. One owner thread calls tick() at a fixed rate and
// feeds it inbound messages between ticks; everything else talks to it via
// queues. All wire messages are JSON objects tagged by "type".
//
// inbound:  {"type":"set_tilt","phi":0.15}
//           {"type":"reset"}
//           {"type":"set_controller","gains":[g1,g2,g3], "scale":..,"filter_pole":..,"filter_gain":..}
// outbound: {"type":"hello","plant_id":..,"gains":[..],"tick_dt":..,"steering":bool}
//           {"type":"telemetry","t":..,"theta1":..,"theta2":..,"u":..,"phi":..}
//           {"type":"event","event":"diverged"|"reset"|"warning"|"error"|"token","message":..}
// Every outbound message also carries "session" and a strictly increasing "seq".

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "segway/controller.hpp"
#include "segway/scenario.hpp"
#include "segway/simulation.hpp"

namespace segway::teleop {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SetTilt {
  double phi = 0.0;
};
struct Reset {};
struct SetController {
  Vector3 gains = Vector3::Zero();
  std::optional<double> scale;
  std::optional<double> filter_pole;
  std::optional<double> filter_gain;
};
using Inbound = std::variant<SetTilt, Reset, SetController>;

/// Throws ProtocolError on malformed JSON, unknown tags or bad payloads.
Inbound parse_inbound(std::string_view text);
std::string encode_inbound(const Inbound& msg);

struct SessionOptions {
  double tick_hz = 200.0;
  double broadcast_hz = 30.0;
  std::string session_id = "segway-1";
};

/// One message leaving the session. `recipient` empty means broadcast.
struct Outbound {
  std::string json;
  std::optional<std::uint64_t> recipient;
};

struct CommandRecord {
  long long tick = 0;  // first tick that sees the command
  Inbound command;
};

class TeleopSession {
 public:
  /// The scenario supplies plant, controller, coupling gain, sim dt and
  /// quantization; its tilt schedule and duration are ignored.
  explicit TeleopSession(const sim::Scenario& defaults, SessionOptions opts = {});

  /// Records the current sample, then advances one tick. Returns the telemetry
  /// and events produced by this tick.
  std::vector<Outbound> tick();

  /// Applies one inbound message from `client`. Malformed payloads produce an
  /// error event addressed to that client only.
  std::vector<Outbound> handle_message(std::string_view text, std::uint64_t client);
  std::vector<Outbound> apply(const Inbound& msg, std::uint64_t client);

  /// `steering` tells the recipient whether it holds the steering token.
  std::string hello(bool steering = false);
  /// A session-stamped event, e.g. for transport-level notices such as token changes.
  Outbound event(std::string_view kind, std::string_view message,
                 std::optional<std::uint64_t> recipient = std::nullopt);

  long long tick_count() const { return ticks_; }
  double tick_dt() const { return tick_dt_; }
  int substeps() const { return substeps_; }
  double time() const { return static_cast<double>(ticks_) * tick_dt_; }
  double phi() const { return phi_; }
  bool diverged() const { return diverged_; }
  const sim::SimTrace& trace() const { return trace_; }
  const std::vector<CommandRecord>& command_log() const { return log_; }
  const ControllerConfig& controller() const { return controller_; }
  const std::string& session_id() const { return opts_.session_id; }

  /// Batch scenario that reproduces the trace since the last reset. Its
  /// sample 5*i (substeps*i) matches trace sample i, with times shifted by
  /// the reset origin. Throws std::logic_error if the controller changed after
  /// the first recorded tick, which a single scenario cannot express.
  sim::Scenario replay_scenario() const;
  double origin_time() const { return static_cast<double>(origin_tick_) * tick_dt_; }

 private:
  std::string envelope(std::string_view type, std::string body_json);

  sim::Scenario defaults_;
  SessionOptions opts_;
  double tick_dt_;
  int substeps_;
  ControllerConfig controller_;
  sim::ClosedLoopStepper stepper_;
  double phi_ = 0.0;
  long long ticks_ = 0;
  long long origin_tick_ = 0;
  long long controller_changed_tick_ = -1;
  bool diverged_ = false;
  std::uint64_t seq_ = 0;
  sim::SimTrace trace_;
  std::vector<CommandRecord> log_;
};

}  // namespace segway::teleop
