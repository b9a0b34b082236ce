#pragma once

// Closed-loop time-domain simulation of the pendulum with the rider-tilt
// disturbance w = k_d * phi(t) entering through B1.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "segway/controller.hpp"
#include "segway/plant_model.hpp"

namespace segway::sim {

inline constexpr double kMaxTilt = 1.5707963267948966;  // pi/2
inline constexpr double kDivergenceNorm = 1e6;

enum class TiltInterpolation { kStep, kLinear };

struct Breakpoint {
  double t = 0.0;
  double phi = 0.0;
};

/// Tilt schedule phi(t) through breakpoints. Step mode holds each value until the
/// next breakpoint; linear mode interpolates (a repeated time makes a jump).
/// Before the first / after the last breakpoint the end values are held.
struct DisturbanceProfile {
  std::vector<Breakpoint> schedule;
  TiltInterpolation mode = TiltInterpolation::kStep;
  double coupling_gain = 0.2;

  void validate() const;
  double tilt(double t) const;
  double w(double t) const { return coupling_gain * tilt(t); }
  bool identically_zero() const;

  static DisturbanceProfile none();
  /// phi = amplitude on [t_on, t_off), 0 elsewhere.
  static DisturbanceProfile pulse(double t_on, double t_off, double amplitude,
                                  double coupling_gain = 0.2);
  /// The default hand maneuver: 0.15 rad on [2, 8) s.
  static DisturbanceProfile maneuver(double amplitude = 0.15);
};

struct SimConfig {
  double dt = 0.001;
  double duration = 15.0;
  bool quantize = true;
  int counts_per_rev = 16000;
  std::uint64_t rng_seed = 1;

  void validate() const;
  long long steps() const;  // round(duration / dt)
};

struct SimTrace {
  std::vector<double> t;
  std::vector<double> theta1;
  std::vector<double> theta1_dot;
  std::vector<double> theta2;
  std::vector<double> theta2_dot;
  std::vector<double> u;
  std::vector<double> w;
  std::vector<Vector3> z;
  bool diverged = false;

  std::size_t size() const { return t.size(); }
  void clear();
  void append(double time, const Vector4& x, double u_value, double w_value, const Vector3& z_value);
  Vector4 state(std::size_t i) const { return {theta1[i], theta1_dot[i], theta2[i], theta2_dot[i]}; }

  static const char* csv_header();
  void write_csv(std::ostream& out) const;
  std::string to_csv() const;
  void save_csv(const std::string& path) const;
};

/// Rounds toward zero to a multiple of 2 pi / counts_per_rev.
double quantize_angle(double theta, int counts_per_rev);

/// Fixed-step RK4 plant integration with the controller (and the disturbance
/// sample) held between controller sample instants. Shared by the batch runner
/// and the live teleop session so both produce identical trajectories.
class ClosedLoopStepper {
 public:
  ClosedLoopStepper(const StateSpace& ss, const ControllerConfig& controller, double dt,
                    bool quantize, int counts_per_rev, const Vector4& x0 = Vector4::Zero());

  /// At a controller sample instant: steps the controller once (idempotent per
  /// instant) and latches w. Between instants this is a no-op.
  void refresh_holds(double w);
  void integrate();

  bool at_sample_instant() const { return step_index_ % ratio_ == 0; }
  long long step_index() const { return step_index_; }
  double time() const { return static_cast<double>(step_index_) * dt_; }
  double dt() const { return dt_; }
  const Vector4& x() const { return x_; }
  double u() const { return u_hold_; }
  double w() const { return w_hold_; }
  Vector3 z() const;
  bool diverged() const { return !x_.allFinite() || x_.norm() > kDivergenceNorm; }

  Controller& controller() { return controller_; }
  const StateSpace& plant() const { return ss_; }
  void reset(const Vector4& x0 = Vector4::Zero());

 private:
  StateSpace ss_;
  Controller controller_;
  double dt_;
  bool quantize_;
  int counts_per_rev_;
  long long ratio_;
  long long step_index_ = 0;
  long long controlled_index_ = -1;
  Vector4 x_;
  double u_hold_ = 0.0;
  double w_hold_ = 0.0;
};

SimTrace run_closed_loop(const StateSpace& ss, const ControllerConfig& controller,
                         const DisturbanceProfile& dist, const SimConfig& cfg,
                         const PlantState& x0 = {});

/// sqrt(int |z|^2 / int w^2) for the full-information loop u = k_bar x from x0 = 0.
/// The run is extended past cfg.duration until the state energy falls below
/// 1e-6 of its peak. Throws std::invalid_argument when w is identically zero.
double empirical_l2_gain(const StateSpace& ss, const RowVector4& k_bar,
                         const DisturbanceProfile& dist, const SimConfig& cfg);

/// Same measurement for an arbitrary continuous disturbance signal w(t).
double empirical_l2_gain(const StateSpace& ss, const RowVector4& k_bar,
                         const std::function<double(double)>& w_of_t, const SimConfig& cfg);

}  // namespace segway::sim
