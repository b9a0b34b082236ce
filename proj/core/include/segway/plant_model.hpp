#pragma once

// Linearized rotary (Furuta) pendulum about the upright equilibrium.
//
// State ordering is fixed: x = [theta1, theta1_dot, theta2, theta2_dot]
// (load-disk angle, its rate, main-pendulum angle, its rate).

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace segway {

using Matrix4 = Eigen::Matrix4d;
using Vector4 = Eigen::Vector4d;
using Vector3 = Eigen::Vector3d;
using RowVector4 = Eigen::RowVector4d;
using RowVector3 = Eigen::RowVector3d;
using Matrix34 = Eigen::Matrix<double, 3, 4>;
using Matrix43 = Eigen::Matrix<double, 4, 3>;

class InvalidParameters : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PendulumParams {
  double J1 = 0.0;    // equivalent disk inertia, kg m^2
  double Jy = 0.0;    // pendulum inertia about its center of mass, kg m^2
  double Jz = 0.0;
  double m_r = 0.0;   // rod mass, kg
  double m_w = 0.0;   // end mass, kg
  double l_cg = 0.0;  // center-of-gravity distance, m
  double R_h = 0.0;   // horizontal offset radius, m
  double g = 9.81;
  // Geometry metadata; not used by any equation.
  double y_r = 0.42;
  double y_m = 0.32;

  double total_mass() const { return m_r + m_w; }
  double J1_bar() const { return J1 + total_mass() * R_h * R_h; }
  // As printed: Jz + m l_cg (units do not match a pure inertia; see README).
  double Jz_bar() const { return Jz + total_mass() * l_cg; }
  /// Normalizer p = Jz_bar (J1_bar + Jy) - (m R_h l_cg)^2.
  double normalizer() const;

  /// Throws InvalidParameters naming the offending field (or p).
  void validate() const;

  static PendulumParams load(const std::string& path);
  static PendulumParams parse(const std::string& text, const std::string& source = "<text>");
};

struct PlantState {
  double theta1 = 0.0;
  double theta1_dot = 0.0;
  double theta2 = 0.0;
  double theta2_dot = 0.0;

  Vector4 vector() const { return {theta1, theta1_dot, theta2, theta2_dot}; }
  static PlantState from_vector(const Vector4& x) { return {x(0), x(1), x(2), x(3)}; }
  bool finite() const { return vector().allFinite(); }
};

/// dx = A x + B2 u + B1 w,  z = C1 x + D12 u,  y = C2 x.
struct StateSpace {
  Matrix4 A = Matrix4::Zero();
  Vector4 B1 = Vector4::Zero();
  Vector4 B2 = Vector4::Zero();
  Matrix34 C1 = Matrix34::Zero();
  Matrix34 C2 = Matrix34::Zero();
  Vector3 D12 = Vector3::Zero();

  /// Throws std::invalid_argument describing the first violated structural invariant.
  void check_invariants() const;
};

/// z = [theta1, theta2, u]
Matrix34 performance_matrix();
Vector3 performance_feedthrough();
/// y = [theta1_dot, theta2, theta2_dot]
Matrix34 measurement_matrix();
/// The 4x3 right inverse of the measurement matrix: zero first row, identity below.
Matrix43 measurement_right_inverse();

StateSpace assemble_linear_model(const PendulumParams& params);

/// Numeric model of the ECP Model 220 rig with the rider pendulum mounted.
StateSpace preset_ecp220();

/// Looks up a named preset ("ecp220"); throws std::invalid_argument otherwise.
StateSpace preset_by_name(const std::string& name);

Vector3 output_map(const PlantState& x);
Vector3 performance_output(const PlantState& x, double u);

}  // namespace segway
