#include "segway/plant_model.hpp"

#include <array>
#include <cmath>
#include <string_view>

#include "segway/text_format.hpp"

namespace segway {

namespace {

// |p| below this fraction of Jz_bar (J1_bar + Jy) is treated as singular.
constexpr double kNormalizerRelTol = 1e-12;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidParameters(std::string("pendulum parameter ") + name +
                            " must be finite and strictly positive");
  }
}

PendulumParams from_document(const KeyValueDocument& doc) {
  static constexpr std::array<std::string_view, 10> kKeys = {
      "J1", "Jy", "Jz", "m_r", "m_w", "l_cg", "R_h", "g", "y_r", "y_m"};
  doc.require_known_keys(kKeys);
  PendulumParams p;
  p.J1 = doc.get_double("J1");
  p.Jy = doc.get_double("Jy");
  p.Jz = doc.get_double("Jz");
  p.m_r = doc.get_double("m_r");
  p.m_w = doc.get_double("m_w");
  p.l_cg = doc.get_double("l_cg");
  p.R_h = doc.get_double("R_h");
  p.g = doc.get_double("g");
  p.y_r = doc.get_double("y_r", p.y_r);
  p.y_m = doc.get_double("y_m", p.y_m);
  return p;
}

}  // namespace

double PendulumParams::normalizer() const {
  const double coupling = total_mass() * R_h * l_cg;
  return Jz_bar() * (J1_bar() + Jy) - coupling * coupling;
}

void PendulumParams::validate() const {
  require_positive(J1, "J1");
  require_positive(Jy, "Jy");
  require_positive(Jz, "Jz");
  if (!(m_r > 0.0 && m_w > 0.0) || !std::isfinite(m_r) || !std::isfinite(m_w)) {
    throw InvalidParameters(
        "pendulum masses m_r and m_w must be strictly positive (m = m_r + m_w)");
  }
  require_positive(l_cg, "l_cg");
  require_positive(R_h, "R_h");
  require_positive(g, "g");

  const double p = normalizer();
  const double scale = Jz_bar() * (J1_bar() + Jy);
  if (!std::isfinite(p) || std::abs(p) < kNormalizerRelTol * scale) {
    throw InvalidParameters("degenerate normalizer p = " + format_exact(p) +
                            " (|p| < 1e-12 * Jz_bar*(J1_bar+Jy) = " +
                            format_exact(kNormalizerRelTol * scale) + ")");
  }
}

PendulumParams PendulumParams::load(const std::string& path) {
  return from_document(KeyValueDocument::load(path));
}

PendulumParams PendulumParams::parse(const std::string& text, const std::string& source) {
  return from_document(KeyValueDocument::parse(text, source));
}

void StateSpace::check_invariants() const {
  if (!(A.allFinite() && B1.allFinite() && B2.allFinite() && C1.allFinite() && C2.allFinite() &&
        D12.allFinite())) {
    throw std::invalid_argument("state-space matrices contain non-finite entries");
  }
  if (A.row(0) != RowVector4(0, 1, 0, 0) || A.row(2) != RowVector4(0, 0, 0, 1)) {
    throw std::invalid_argument("A rows 1 and 3 must be pure integrators");
  }
  if (!A.col(0).isZero(0.0)) {
    throw std::invalid_argument("first column of A must be zero (theta1 is a free coordinate)");
  }
  if (B1 != B2) throw std::invalid_argument("B1 and B2 must coincide");
  if ((C2 * measurement_right_inverse() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() != 0.0) {
    throw std::invalid_argument("C2 must be right-invertible by the canonical selection inverse");
  }
  if (C1 != performance_matrix() || D12 != performance_feedthrough()) {
    throw std::invalid_argument("C1/D12 must select z = [theta1, theta2, u]");
  }
}

Matrix34 performance_matrix() {
  Matrix34 c = Matrix34::Zero();
  c(0, 0) = 1.0;
  c(1, 2) = 1.0;
  return c;
}

Vector3 performance_feedthrough() { return {0.0, 0.0, 1.0}; }

Matrix34 measurement_matrix() {
  Matrix34 c = Matrix34::Zero();
  c(0, 1) = 1.0;
  c(1, 2) = 1.0;
  c(2, 3) = 1.0;
  return c;
}

Matrix43 measurement_right_inverse() {
  Matrix43 r = Matrix43::Zero();
  r.bottomRows<3>().setIdentity();
  return r;
}

StateSpace assemble_linear_model(const PendulumParams& params) {
  params.validate();
  const double m = params.total_mass();
  const double p = params.normalizer();
  const double Jz_bar = params.Jz_bar();
  const double J1_bar = params.J1_bar();
  const double coupling = m * params.R_h * params.l_cg;

  StateSpace ss;
  ss.A(0, 1) = 1.0;
  ss.A(1, 1) = -Jz_bar / p;
  ss.A(1, 2) = -m * m * params.l_cg * params.l_cg * params.R_h * params.g / p;
  ss.A(2, 3) = 1.0;
  ss.A(3, 1) = coupling / p;
  ss.A(3, 2) = m * params.l_cg * params.g * (J1_bar + params.Jy) / p;

  ss.B2 << 0.0, Jz_bar / p, 0.0, -coupling / p;
  ss.B1 = ss.B2;
  ss.C1 = performance_matrix();
  ss.C2 = measurement_matrix();
  ss.D12 = performance_feedthrough();
  return ss;
}

StateSpace preset_ecp220() {
  StateSpace ss;
  // clang-format off
  ss.A << 0.0,  1.0,      0.0,    0.0,
          0.0, -1.1379, -28.769,  0.0,
          0.0,  0.0,      0.0,    1.0,
          0.0,  0.7219,  50.229,  0.0;
  // clang-format on
  ss.B2 << 0.0, 318.7, 0.0, -202.2;
  ss.B1 = ss.B2;
  ss.C1 = performance_matrix();
  ss.C2 = measurement_matrix();
  ss.D12 = performance_feedthrough();
  return ss;
}

StateSpace preset_by_name(const std::string& name) {
  if (name == "ecp220") return preset_ecp220();
  throw std::invalid_argument("unknown plant preset '" + name + "' (available: ecp220)");
}

Vector3 output_map(const PlantState& x) { return measurement_matrix() * x.vector(); }

Vector3 performance_output(const PlantState& x, double u) {
  return performance_matrix() * x.vector() + performance_feedthrough() * u;
}

}  // namespace segway
