#pragma once

// Sampled realization of the output-feedback law with first-order velocity
// estimators ("dirty derivatives") in place of measured rates:
//
//   v1 = a x1 + b theta1,   v2 = a x2 + b theta2
//   u  = scale * (g1 v1 + g2 theta2 + g3 v2)
//   dx_i/dt = a x_i + b theta_i
//
// The estimator states are advanced with the exact zero-order-hold solution.

#include <optional>
#include <string>

#include "segway/lmi_synthesis.hpp"
#include "segway/plant_model.hpp"

namespace segway {

class KeyValueDocument;

struct ControllerConfig {
  Vector3 gains = Vector3::Zero();  // on [v1, theta2, v2]
  double scale = 1.0;
  double filter_pole = -10.0;       // a, 1/s
  double filter_gain = 5.0;         // b, 1/s
  double sample_dt = 0.001;         // s
  std::optional<double> saturation; // symmetric |u| limit, off by default

  void validate() const;

  void write(KeyValueDocument& doc) const;
  static ControllerConfig read(const KeyValueDocument& doc);
};

struct ObserverState {
  double x1 = 0.0;
  double x2 = 0.0;

  void reset() { *this = {}; }
};

struct ControllerOutput {
  double u = 0.0;
  double v1 = 0.0;  // theta1_dot estimate
  double v2 = 0.0;  // theta2_dot estimate
  ObserverState next;
};

ControllerOutput controller_step(const ControllerConfig& cfg, const ObserverState& s, double theta1,
                                 double theta2);

/// Gains 0.43, 6.38, 1.09 scaled by 0.3; filter -10 x + 5 theta; 1 ms sampling.
ControllerConfig paper_controller();

ControllerConfig from_gain_set(const lmi::GainSet& gs, double scale, double pole, double fgain,
                               double dt);

/// Stateful wrapper owned by one execution context (sim loop or teleop tick).
class Controller {
 public:
  explicit Controller(ControllerConfig cfg);

  const ControllerConfig& config() const { return cfg_; }
  const ObserverState& state() const { return state_; }

  /// Replaces gains/filter settings; estimator states are kept.
  void reconfigure(ControllerConfig cfg);
  void reset() { state_.reset(); }
  double step(double theta1, double theta2);

 private:
  ControllerConfig cfg_;
  ObserverState state_;
  double decay_ = 0.0;   // exp(a dt)
  double input_ = 0.0;   // (exp(a dt) - 1) / a * b
};

}  // namespace segway
