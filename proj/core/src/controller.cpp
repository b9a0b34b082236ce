#include "segway/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "segway/text_format.hpp"

namespace segway {

namespace {

struct Discretization {
  double decay;
  double input;
};

// Exact ZOH solution of dx = a x + b theta over one sample.
Discretization discretize(const ControllerConfig& cfg) {
  const double e = std::exp(cfg.filter_pole * cfg.sample_dt);
  return {e, std::expm1(cfg.filter_pole * cfg.sample_dt) / cfg.filter_pole * cfg.filter_gain};
}

double apply_law(const ControllerConfig& cfg, double v1, double theta2, double v2) {
  double u = cfg.scale * (cfg.gains(0) * v1 + cfg.gains(1) * theta2 + cfg.gains(2) * v2);
  if (cfg.saturation) u = std::clamp(u, -*cfg.saturation, *cfg.saturation);
  return u;
}

}  // namespace

void ControllerConfig::validate() const {
  if (!gains.allFinite()) throw std::invalid_argument("controller gains must be finite");
  if (!(filter_pole < 0.0) || !std::isfinite(filter_pole)) {
    throw std::invalid_argument("controller filter_pole must be negative");
  }
  if (!std::isfinite(filter_gain)) throw std::invalid_argument("controller filter_gain must be finite");
  if (!(sample_dt > 0.0) || !std::isfinite(sample_dt)) {
    throw std::invalid_argument("controller sample_dt must be positive");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("controller scale must be positive");
  }
  if (saturation && !(*saturation > 0.0)) {
    throw std::invalid_argument("controller saturation limit must be positive");
  }
}

void ControllerConfig::write(KeyValueDocument& doc) const {
  doc.add("controller.gains", std::span<const double>(gains.data(), 3));
  doc.add("controller.scale", scale);
  doc.add("controller.filter_pole", filter_pole);
  doc.add("controller.filter_gain", filter_gain);
  doc.add("controller.sample_dt", sample_dt);
  if (saturation) doc.add("controller.saturation", *saturation);
}

ControllerConfig ControllerConfig::read(const KeyValueDocument& doc) {
  ControllerConfig cfg;
  const auto g = doc.get_doubles("controller.gains", 3);
  cfg.gains << g[0], g[1], g[2];
  cfg.scale = doc.get_double("controller.scale", cfg.scale);
  cfg.filter_pole = doc.get_double("controller.filter_pole", cfg.filter_pole);
  cfg.filter_gain = doc.get_double("controller.filter_gain", cfg.filter_gain);
  cfg.sample_dt = doc.get_double("controller.sample_dt", cfg.sample_dt);
  if (doc.contains("controller.saturation")) cfg.saturation = doc.get_double("controller.saturation");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(doc.source(), doc.find("controller.gains")->line, e.what());
  }
  return cfg;
}

ControllerOutput controller_step(const ControllerConfig& cfg, const ObserverState& s, double theta1,
                                 double theta2) {
  const auto d = discretize(cfg);
  ControllerOutput out;
  out.v1 = cfg.filter_pole * s.x1 + cfg.filter_gain * theta1;
  out.v2 = cfg.filter_pole * s.x2 + cfg.filter_gain * theta2;
  out.u = apply_law(cfg, out.v1, theta2, out.v2);
  out.next.x1 = d.decay * s.x1 + d.input * theta1;
  out.next.x2 = d.decay * s.x2 + d.input * theta2;
  return out;
}

ControllerConfig paper_controller() {
  ControllerConfig cfg;
  cfg.gains << 0.43, 6.38, 1.09;
  cfg.scale = 0.3;
  cfg.filter_pole = -10.0;
  cfg.filter_gain = 5.0;
  cfg.sample_dt = 0.001;
  return cfg;
}

ControllerConfig from_gain_set(const lmi::GainSet& gs, double scale, double pole, double fgain,
                               double dt) {
  ControllerConfig cfg;
  cfg.gains = gs.k_out.transpose();
  cfg.scale = scale;
  cfg.filter_pole = pole;
  cfg.filter_gain = fgain;
  cfg.sample_dt = dt;
  cfg.validate();
  return cfg;
}

Controller::Controller(ControllerConfig cfg) { reconfigure(std::move(cfg)); }

void Controller::reconfigure(ControllerConfig cfg) {
  cfg.validate();
  cfg_ = std::move(cfg);
  const auto d = discretize(cfg_);
  decay_ = d.decay;
  input_ = d.input;
}

double Controller::step(double theta1, double theta2) {
  const double v1 = cfg_.filter_pole * state_.x1 + cfg_.filter_gain * theta1;
  const double v2 = cfg_.filter_pole * state_.x2 + cfg_.filter_gain * theta2;
  state_.x1 = decay_ * state_.x1 + input_ * theta1;
  state_.x2 = decay_ * state_.x2 + input_ * theta2;
  return apply_law(cfg_, v1, theta2, v2);
}

}  // namespace segway
