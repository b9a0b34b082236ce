#include "segway/teleop_session.hpp"

#include <cmath>
#include <numbers>

#include "json.hpp"

namespace segway::teleop {

using nlohmann::json;

namespace {

double finite_number(const json& j, const char* field) {
  if (!j.contains(field)) throw ProtocolError(std::string("missing field '") + field + "'");
  const auto& v = j.at(field);
  if (!v.is_number()) throw ProtocolError(std::string("field '") + field + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ProtocolError(std::string("field '") + field + "' must be finite");
  return d;
}

std::optional<double> optional_number(const json& j, const char* field) {
  if (!j.contains(field)) return std::nullopt;
  return finite_number(j, field);
}

json gains_json(const Vector3& g) { return json::array({g(0), g(1), g(2)}); }

int substep_count(double tick_dt, double sim_dt) {
  const double r = tick_dt / sim_dt;
  const double n = std::round(r);
  if (n < 1.0 || std::abs(r - n) > 1e-6 * n) {
    throw std::invalid_argument("teleop: tick period must be an integer multiple of the sim dt");
  }
  return static_cast<int>(n);
}

}  // namespace

Inbound parse_inbound(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message must be a JSON object");
  if (!j.contains("type") || !j.at("type").is_string()) throw ProtocolError("missing string field 'type'");
  const auto type = j.at("type").get<std::string>();
  if (type == "set_tilt") return SetTilt{finite_number(j, "phi")};
  if (type == "reset") return Reset{};
  if (type == "set_controller") {
    if (!j.contains("gains") || !j.at("gains").is_array() || j.at("gains").size() != 3) {
      throw ProtocolError("set_controller needs 'gains' as an array of 3 numbers");
    }
    SetController c;
    for (int i = 0; i < 3; ++i) {
      const auto& g = j.at("gains").at(static_cast<std::size_t>(i));
      if (!g.is_number() || !std::isfinite(g.get<double>())) {
        throw ProtocolError("set_controller gains must be finite numbers");
      }
      c.gains(i) = g.get<double>();
    }
    c.scale = optional_number(j, "scale");
    c.filter_pole = optional_number(j, "filter_pole");
    c.filter_gain = optional_number(j, "filter_gain");
    return c;
  }
  throw ProtocolError("unknown message type '" + type + "'");
}

std::string encode_inbound(const Inbound& msg) {
  json j;
  if (const auto* s = std::get_if<SetTilt>(&msg)) {
    j = {{"type", "set_tilt"}, {"phi", s->phi}};
  } else if (std::holds_alternative<Reset>(msg)) {
    j = {{"type", "reset"}};
  } else {
    const auto& c = std::get<SetController>(msg);
    j = {{"type", "set_controller"}, {"gains", gains_json(c.gains)}};
    if (c.scale) j["scale"] = *c.scale;
    if (c.filter_pole) j["filter_pole"] = *c.filter_pole;
    if (c.filter_gain) j["filter_gain"] = *c.filter_gain;
  }
  return j.dump();
}

TeleopSession::TeleopSession(const sim::Scenario& defaults, SessionOptions opts)
    : defaults_(defaults),
      opts_(std::move(opts)),
      tick_dt_(1.0 / opts_.tick_hz),
      substeps_(substep_count(tick_dt_, defaults.config.dt)),
      controller_(defaults.controller),
      stepper_(defaults.plant, defaults.controller, defaults.config.dt, defaults.config.quantize,
               defaults.config.counts_per_rev, defaults.x0.vector()) {
  if (!(opts_.tick_hz > 0.0) || !(opts_.broadcast_hz > 0.0) || opts_.broadcast_hz > opts_.tick_hz) {
    throw std::invalid_argument("teleop: need 0 < broadcast_hz <= tick_hz");
  }
  // Commands land on tick boundaries, so every tick must start on a controller sample.
  substep_count(tick_dt_, controller_.sample_dt);
}

std::string TeleopSession::envelope(std::string_view type, std::string body_json) {
  json j = json::parse(body_json);
  j["type"] = type;
  j["session"] = opts_.session_id;
  j["seq"] = ++seq_;
  return j.dump();
}

Outbound TeleopSession::event(std::string_view kind, std::string_view message,
                              std::optional<std::uint64_t> recipient) {
  json body = {{"event", kind}, {"message", message}};
  return {envelope("event", body.dump()), recipient};
}

std::string TeleopSession::hello(bool steering) {
  json body = {{"plant_id", defaults_.plant_id},
               {"gains", gains_json(controller_.gains)},
               {"scale", controller_.scale},
               {"tick_dt", tick_dt_},
               {"tick", ticks_},
               {"steering", steering}};
  return envelope("hello", body.dump());
}

std::vector<Outbound> TeleopSession::tick() {
  std::vector<Outbound> out;
  const long long n = ticks_++;
  if (diverged_) return out;

  const double w = defaults_.disturbance.coupling_gain * phi_;
  stepper_.refresh_holds(w);
  const double t = static_cast<double>(n) * tick_dt_;
  trace_.append(t, stepper_.x(), stepper_.u(), stepper_.w(), stepper_.z());

  for (int s = 0; s < substeps_; ++s) {
    stepper_.refresh_holds(w);
    stepper_.integrate();
    if (stepper_.diverged()) {
      diverged_ = true;
      trace_.diverged = true;
      out.push_back(event("diverged", "state left the numeric envelope; send reset"));
      return out;
    }
  }

  // Broadcast when floor(ticks * broadcast/tick) advances.
  const double ratio = opts_.broadcast_hz / opts_.tick_hz;
  const auto before = static_cast<long long>(std::floor(static_cast<double>(n) * ratio + 1e-9));
  const auto after = static_cast<long long>(std::floor(static_cast<double>(n + 1) * ratio + 1e-9));
  if (after > before || n == 0) {
    const std::size_t i = trace_.size() - 1;
    json body = {{"t", t},
                 {"theta1", trace_.theta1[i]},
                 {"theta2", trace_.theta2[i]},
                 {"u", trace_.u[i]},
                 {"phi", phi_}};
    out.push_back({envelope("telemetry", body.dump()), std::nullopt});
  }
  return out;
}

std::vector<Outbound> TeleopSession::handle_message(std::string_view text, std::uint64_t client) {
  Inbound msg;
  try {
    msg = parse_inbound(text);
  } catch (const ProtocolError& e) {
    return {event("error", e.what(), client)};
  }
  return apply(msg, client);
}

std::vector<Outbound> TeleopSession::apply(const Inbound& msg, std::uint64_t client) {
  std::vector<Outbound> out;
  if (const auto* s = std::get_if<SetTilt>(&msg)) {
    if (!std::isfinite(s->phi)) return {event("error", "phi must be finite", client)};
    double phi = s->phi;
    if (std::abs(phi) > sim::kMaxTilt) {
      phi = std::copysign(sim::kMaxTilt, phi);
      json body = {{"event", "warning"}, {"message", "phi clamped to [-pi/2, pi/2]"}, {"phi", phi}};
      out.push_back({envelope("event", body.dump()), client});
    }
    phi_ = phi;
    log_.push_back({ticks_, SetTilt{phi}});
  } else if (std::holds_alternative<Reset>(msg)) {
    stepper_.reset(defaults_.x0.vector());
    phi_ = 0.0;
    diverged_ = false;
    trace_.clear();
    log_.clear();
    origin_tick_ = ticks_;
    controller_changed_tick_ = -1;
    out.push_back(event("reset", "state, trace and command log cleared"));
  } else {
    const auto& c = std::get<SetController>(msg);
    ControllerConfig cfg = controller_;
    cfg.gains = c.gains;
    if (c.scale) cfg.scale = *c.scale;
    if (c.filter_pole) cfg.filter_pole = *c.filter_pole;
    if (c.filter_gain) cfg.filter_gain = *c.filter_gain;
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      return {event("error", e.what(), client)};
    }
    stepper_.controller().reconfigure(cfg);
    controller_ = cfg;
    controller_changed_tick_ = ticks_;
    log_.push_back({ticks_, c});
  }
  return out;
}

sim::Scenario TeleopSession::replay_scenario() const {
  if (controller_changed_tick_ > origin_tick_) {
    throw std::logic_error("controller changed mid-session; the log is not a single scenario");
  }
  sim::Scenario s = defaults_;
  s.controller_source = "inline";
  s.controller = controller_;
  s.k_bar.reset();
  s.empirical_gain = false;
  s.disturbance.mode = sim::TiltInterpolation::kStep;
  s.disturbance.schedule = {{0.0, 0.0}};
  for (const auto& rec : log_) {
    if (const auto* st = std::get_if<SetTilt>(&rec.command)) {
      const double t = static_cast<double>(rec.tick - origin_tick_) * tick_dt_;
      if (s.disturbance.schedule.back().t == t) {
        s.disturbance.schedule.back().phi = st->phi;
      } else {
        s.disturbance.schedule.push_back({t, st->phi});
      }
    }
  }
  const auto samples = static_cast<long long>(trace_.size());
  s.config.duration = static_cast<double>(std::max<long long>(samples - 1, 1)) * tick_dt_;
  s.referenced_files.clear();
  return s;
}

}  // namespace segway::teleop
