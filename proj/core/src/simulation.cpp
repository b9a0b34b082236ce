#include "segway/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "segway/text_format.hpp"

namespace segway::sim {

namespace {

// Breakpoint times are matched against k*dt grid times with this slack (s).
constexpr double kTimeEps = 1e-9;

struct Rk4 {
  static Vector4 step(const Matrix4& a, const Vector4& forcing, const Vector4& x, double dt) {
    const Vector4 k1 = a * x + forcing;
    const Vector4 k2 = a * (x + 0.5 * dt * k1) + forcing;
    const Vector4 k3 = a * (x + 0.5 * dt * k2) + forcing;
    const Vector4 k4 = a * (x + dt * k3) + forcing;
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
};

long long integer_ratio(double num, double den, const char* what) {
  if (!(den > 0.0) || !(num > 0.0) || !std::isfinite(num / den)) {
    throw std::invalid_argument(std::string(what) + " and dt must be positive");
  }
  const double r = num / den;
  const double n = std::round(r);
  if (n < 1.0 || std::abs(r - n) > 1e-6 * n) {
    throw std::invalid_argument(std::string(what) + " must be an integer multiple of dt");
  }
  return static_cast<long long>(n);
}

// Full-information loop integration shared by both empirical_l2_gain overloads.
// `w_stage(t_stage, t_step)` returns the disturbance at an RK4 stage time.
template <typename WStage>
double l2_gain_run(const StateSpace& ss, const RowVector4& k_bar, WStage&& w_stage,
                   const SimConfig& cfg) {
  cfg.validate();
  const Matrix4 a_cl = ss.A + ss.B2 * k_bar;
  const Matrix34 c_cl = ss.C1 + ss.D12 * k_bar;
  const double dt = cfg.dt;
  const long long min_steps = cfg.steps();
  const long long max_steps = 100 * min_steps;

  auto deriv = [&](const Vector4& x, double w) -> Vector4 { return a_cl * x + ss.B1 * w; };

  Vector4 x = Vector4::Zero();
  double w_prev = w_stage(0.0, 0.0);
  double z_prev = 0.0;  // |z(0)|^2, zero since x0 = 0
  double energy_z = 0.0;
  double energy_w = 0.0;
  double peak_state = 0.0;
  for (long long k = 0; k < max_steps; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    const double w1 = w_stage(t0, t0);
    const double w2 = w_stage(t0 + 0.5 * dt, t0);
    const double w4 = w_stage(t0 + dt, t0);
    const Vector4 k1 = deriv(x, w1);
    const Vector4 k2 = deriv(x + 0.5 * dt * k1, w2);
    const Vector4 k3 = deriv(x + 0.5 * dt * k2, w2);
    const Vector4 k4 = deriv(x + dt * k3, w4);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite() || x.norm() > kDivergenceNorm) {
      throw std::runtime_error("empirical_l2_gain: closed loop diverged");
    }

    const double t1 = static_cast<double>(k + 1) * dt;
    const double w_next = w_stage(t1, t1);
    const double z_next = (c_cl * x).squaredNorm();
    energy_z += 0.5 * dt * (z_prev + z_next);
    energy_w += 0.5 * dt * (w_prev * w_prev + w_next * w_next);
    z_prev = z_next;
    w_prev = w_next;

    const double state_energy = x.squaredNorm();
    peak_state = std::max(peak_state, state_energy);
    if (k + 1 >= min_steps && state_energy < 1e-6 * peak_state) break;
  }
  if (!(energy_w > 0.0)) throw std::invalid_argument("empirical_l2_gain: disturbance has zero energy");
  return std::sqrt(energy_z / energy_w);
}

}  // namespace

void DisturbanceProfile::validate() const {
  if (!std::isfinite(coupling_gain)) throw std::invalid_argument("coupling_gain must be finite");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& b = schedule[i];
    if (!std::isfinite(b.t) || !std::isfinite(b.phi)) {
      throw std::invalid_argument("tilt schedule entries must be finite");
    }
    if (std::abs(b.phi) > kMaxTilt) {
      throw std::invalid_argument("tilt schedule exceeds |phi| <= pi/2");
    }
    if (i > 0 && b.t < schedule[i - 1].t) {
      throw std::invalid_argument("tilt schedule must be time-sorted");
    }
  }
}

double DisturbanceProfile::tilt(double t) const {
  if (schedule.empty()) return 0.0;
  // Last breakpoint at or before t (right-continuous at jumps).
  auto it = std::upper_bound(schedule.begin(), schedule.end(), t + kTimeEps,
                             [](double time, const Breakpoint& b) { return time < b.t; });
  if (it == schedule.begin()) return schedule.front().phi;
  const auto& left = *std::prev(it);
  if (mode == TiltInterpolation::kStep || it == schedule.end()) return left.phi;
  const auto& right = *it;
  const double span = right.t - left.t;
  if (span <= 0.0) return left.phi;
  const double s = std::clamp((t - left.t) / span, 0.0, 1.0);
  return left.phi + s * (right.phi - left.phi);
}

bool DisturbanceProfile::identically_zero() const {
  return coupling_gain == 0.0 ||
         std::all_of(schedule.begin(), schedule.end(), [](const Breakpoint& b) { return b.phi == 0.0; });
}

DisturbanceProfile DisturbanceProfile::none() { return {}; }

DisturbanceProfile DisturbanceProfile::pulse(double t_on, double t_off, double amplitude,
                                             double coupling_gain) {
  DisturbanceProfile d;
  d.schedule = {{0.0, 0.0}, {t_on, amplitude}, {t_off, 0.0}};
  d.coupling_gain = coupling_gain;
  d.validate();
  return d;
}

DisturbanceProfile DisturbanceProfile::maneuver(double amplitude) {
  return pulse(2.0, 8.0, amplitude);
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("SimConfig: dt must be positive");
  if (!(duration >= dt) || !std::isfinite(duration)) {
    throw std::invalid_argument("SimConfig: duration must be at least dt");
  }
  if (counts_per_rev <= 0) throw std::invalid_argument("SimConfig: counts_per_rev must be positive");
}

long long SimConfig::steps() const { return std::llround(duration / dt); }

void SimTrace::clear() { *this = SimTrace{}; }

void SimTrace::append(double time, const Vector4& x, double u_value, double w_value,
                      const Vector3& z_value) {
  t.push_back(time);
  theta1.push_back(x(0));
  theta1_dot.push_back(x(1));
  theta2.push_back(x(2));
  theta2_dot.push_back(x(3));
  u.push_back(u_value);
  w.push_back(w_value);
  z.push_back(z_value);
}

const char* SimTrace::csv_header() { return "t,theta1,theta1_dot,theta2,theta2_dot,u,w,z1,z2,z3"; }

void SimTrace::write_csv(std::ostream& out) const {
  out << csv_header() << '\n';
  for (std::size_t i = 0; i < size(); ++i) {
    out << format_sig9(t[i]) << ',' << format_sig9(theta1[i]) << ',' << format_sig9(theta1_dot[i])
        << ',' << format_sig9(theta2[i]) << ',' << format_sig9(theta2_dot[i]) << ','
        << format_sig9(u[i]) << ',' << format_sig9(w[i]) << ',' << format_sig9(z[i](0)) << ','
        << format_sig9(z[i](1)) << ',' << format_sig9(z[i](2)) << '\n';
  }
}

std::string SimTrace::to_csv() const {
  std::ostringstream out;
  write_csv(out);
  return out.str();
}

void SimTrace::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out);
}

double quantize_angle(double theta, int counts_per_rev) {
  if (counts_per_rev <= 0) throw std::invalid_argument("quantize_angle: counts_per_rev must be positive");
  const double resolution = 2.0 * std::numbers::pi / counts_per_rev;
  return std::trunc(theta / resolution) * resolution;
}

ClosedLoopStepper::ClosedLoopStepper(const StateSpace& ss, const ControllerConfig& controller,
                                     double dt, bool quantize, int counts_per_rev, const Vector4& x0)
    : ss_(ss),
      controller_(controller),
      dt_(dt),
      quantize_(quantize),
      counts_per_rev_(counts_per_rev),
      ratio_(integer_ratio(controller.sample_dt, dt, "controller sample_dt")),
      x_(x0) {
  if (quantize && counts_per_rev <= 0) {
    throw std::invalid_argument("ClosedLoopStepper: counts_per_rev must be positive");
  }
}

void ClosedLoopStepper::refresh_holds(double w) {
  if (!at_sample_instant()) return;
  if (controlled_index_ != step_index_) {
    double theta1 = x_(0);
    double theta2 = x_(2);
    if (quantize_) {
      theta1 = quantize_angle(theta1, counts_per_rev_);
      theta2 = quantize_angle(theta2, counts_per_rev_);
    }
    u_hold_ = controller_.step(theta1, theta2);
    controlled_index_ = step_index_;
  }
  w_hold_ = w;
}

void ClosedLoopStepper::integrate() {
  const Vector4 forcing = ss_.B2 * u_hold_ + ss_.B1 * w_hold_;
  x_ = Rk4::step(ss_.A, forcing, x_, dt_);
  ++step_index_;
}

Vector3 ClosedLoopStepper::z() const { return ss_.C1 * x_ + ss_.D12 * u_hold_; }

void ClosedLoopStepper::reset(const Vector4& x0) {
  controller_.reset();
  x_ = x0;
  u_hold_ = 0.0;
  w_hold_ = 0.0;
  controlled_index_ = -1;
}

SimTrace run_closed_loop(const StateSpace& ss, const ControllerConfig& controller,
                         const DisturbanceProfile& dist, const SimConfig& cfg, const PlantState& x0) {
  cfg.validate();
  dist.validate();
  controller.validate();
  if (!x0.finite()) throw std::invalid_argument("run_closed_loop: initial state must be finite");

  ClosedLoopStepper stepper(ss, controller, cfg.dt, cfg.quantize, cfg.counts_per_rev, x0.vector());
  const long long n = cfg.steps();
  SimTrace trace;
  trace.t.reserve(n + 1);
  for (long long k = 0;; ++k) {
    stepper.refresh_holds(dist.w(stepper.time()));
    trace.append(stepper.time(), stepper.x(), stepper.u(), stepper.w(), stepper.z());
    if (k == n) break;
    stepper.integrate();
    if (stepper.diverged()) {
      trace.diverged = true;
      break;
    }
  }
  return trace;
}

double empirical_l2_gain(const StateSpace& ss, const RowVector4& k_bar, const DisturbanceProfile& dist,
                         const SimConfig& cfg) {
  dist.validate();
  if (dist.identically_zero()) throw std::invalid_argument("empirical_l2_gain: w is identically zero");
  const double dt = cfg.dt;
  // Keep each RK4 step on one side of any jump that falls on the step grid.
  auto w_stage = [&](double t, double t_step) {
    if (dist.mode == TiltInterpolation::kStep) return dist.w(t_step);
    return dist.w(std::min(t, t_step + dt - std::max(1e-6 * dt, 1e-8)));
  };
  return l2_gain_run(ss, k_bar, w_stage, cfg);
}

double empirical_l2_gain(const StateSpace& ss, const RowVector4& k_bar,
                         const std::function<double(double)>& w_of_t, const SimConfig& cfg) {
  return l2_gain_run(ss, k_bar, [&](double t, double) { return w_of_t(t); }, cfg);
}

}  // namespace segway::sim
