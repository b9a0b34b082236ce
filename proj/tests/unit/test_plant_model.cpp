#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "segway/hinf_analysis.hpp"
#include "segway/plant_model.hpp"
#include "segway/text_format.hpp"

using namespace segway;

namespace {

PendulumParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PendulumParams p;
  p.J1 = 1e-3 + 0.1 * u(rng);
  p.Jy = 1e-4 + 1e-2 * u(rng);
  p.Jz = 1e-4 + 1e-2 * u(rng);
  p.m_r = 0.01 + 0.5 * u(rng);
  p.m_w = 0.01 + 0.5 * u(rng);
  p.l_cg = 0.02 + 0.5 * u(rng);
  p.R_h = 0.02 + 0.3 * u(rng);
  p.g = 9.81;
  return p;
}

// det(s I - M) for the 3x3 block acting on [theta1_dot, theta2, theta2_dot], by cofactors.
double char_poly_3(const Matrix4& a, double s) {
  const double m00 = s - a(1, 1), m01 = -a(1, 2), m02 = -a(1, 3);
  const double m10 = -a(2, 1), m11 = s - a(2, 2), m12 = -a(2, 3);
  const double m20 = -a(3, 1), m21 = -a(3, 2), m22 = s - a(3, 3);
  return m00 * (m11 * m22 - m12 * m21) - m01 * (m10 * m22 - m12 * m20) + m02 * (m10 * m21 - m11 * m20);
}

}  // namespace

TEST(Preset, MatchesPublishedMatrices) {
  const auto ss = preset_ecp220();
  EXPECT_EQ(ss.A(1, 1), -1.1379);
  EXPECT_EQ(ss.A(3, 2), 50.229);
  EXPECT_EQ(ss.A.row(1), RowVector4(0, -1.1379, -28.769, 0));
  EXPECT_EQ(ss.A.row(3), RowVector4(0, 0.7219, 50.229, 0));
  EXPECT_EQ(ss.B1, Vector4(0, 318.7, 0, -202.2));
  EXPECT_EQ(ss.B1, ss.B2);
  EXPECT_NO_THROW(ss.check_invariants());
  EXPECT_EQ(preset_by_name("ecp220").A, ss.A);
  EXPECT_THROW(preset_by_name("ecp999"), std::invalid_argument);
}

TEST(Preset, OpenLoopIsUnstableNearSevenPerSecond) {
  const auto ss = preset_ecp220();
  const double abscissa = hinf::spectral_abscissa(ss.A);
  // Oracle: the dominant root of the cofactor-expanded characteristic polynomial.
  double lo = 1.0, hi = 20.0;
  ASSERT_LT(char_poly_3(ss.A, lo) * char_poly_3(ss.A, hi), 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (char_poly_3(ss.A, lo) * char_poly_3(ss.A, mid) <= 0.0 ? hi : lo) = mid;
  }
  EXPECT_NEAR(abscissa, 0.5 * (lo + hi), 1e-9);
  EXPECT_NEAR(abscissa, 7.0, 0.2);
  EXPECT_FALSE(hinf::is_hurwitz(ss.A));
}

TEST(AssembleLinearModel, RandomPhysicalParamsSatisfyInvariantsAndSignPattern) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = random_params(rng);
    const auto ss = assemble_linear_model(p);
    ASSERT_NO_THROW(ss.check_invariants());
    EXPECT_EQ(ss.A.row(0), RowVector4(0, 1, 0, 0));
    EXPECT_EQ(ss.A.row(2), RowVector4(0, 0, 0, 1));

    // Symbolic sign oracle: with m = m_r + m_w,
    //   p = Jz(J1 + m R^2 + Jy) + m l (J1 + Jy) + m^2 l R^2 (1 - l),
    // every term positive for l < 1 m, so p > 0 and each entry's sign is the
    // sign printed in front of its all-positive product.
    const double m = p.m_r + p.m_w;
    const double l = p.l_cg, r = p.R_h;
    const double expanded = p.Jz * (p.J1 + m * r * r + p.Jy) + m * l * (p.J1 + p.Jy) + m * m * l * r * r * (1 - l);
    EXPECT_NEAR(p.normalizer(), expanded, 1e-12 * std::abs(expanded));
    ASSERT_GT(expanded, 0.0);
    EXPECT_LT(ss.A(1, 2), 0.0);
    EXPECT_GT(ss.A(3, 2), 0.0);
    EXPECT_GT(ss.B2(1), 0.0);
    EXPECT_LT(ss.B2(3), 0.0);
    EXPECT_LT(ss.A(1, 1), 0.0);
    EXPECT_GT(ss.A(3, 1), 0.0);
  }
}

TEST(AssembleLinearModel, RejectsZeroMass) {
  PendulumParams p;
  p.J1 = 0.01, p.Jy = 0.001, p.Jz = 0.001, p.l_cg = 0.1, p.R_h = 0.1;
  p.m_r = 0.0, p.m_w = 0.0;
  EXPECT_THROW(assemble_linear_model(p), InvalidParameters);
}

TEST(AssembleLinearModel, RejectsDegenerateNormalizerNamingP) {
  // l_cg > 1 lets the last term of p go negative; pick R_h so p vanishes.
  PendulumParams p;
  p.J1 = 0.05, p.Jy = 0.05, p.Jz = 0.1, p.m_r = 0.5, p.m_w = 0.5, p.l_cg = 2.0;
  const double m = 1.0, l = 2.0;
  const double coeff = p.Jz * m + m * m * l * (1 - l);
  const double rhs = -(p.Jz * (p.J1 + p.Jy) + m * l * (p.J1 + p.Jy));
  p.R_h = std::sqrt(rhs / coeff);
  try {
    (void)assemble_linear_model(p);
    FAIL() << "expected rejection, p = " << p.normalizer();
  } catch (const InvalidParameters& e) {
    EXPECT_NE(std::string(e.what()).find("p"), std::string::npos);
  }
}

TEST(PendulumParams, ParsesFileFormatWithDiagnostics) {
  const auto p = PendulumParams::parse(
      "J1 = 0.02\nJy = 0.001\nJz = 0.002\nm_r = 0.1\nm_w = 0.2\nl_cg = 0.15\nR_h = 0.1\ng = 9.81\n");
  EXPECT_DOUBLE_EQ(p.total_mass(), 0.30000000000000004);
  EXPECT_DOUBLE_EQ(p.g, 9.81);
  try {
    (void)PendulumParams::parse("J1 = 0.02\nJy = x\n", "plant.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW((void)PendulumParams::parse("J1 = 0.02\nmass = 1\n"), ParseError);
  EXPECT_THROW((void)PendulumParams::parse("J1 = 0.02\n"), std::exception);
  EXPECT_THROW((void)PendulumParams::parse("J1 = 0.02\nJy = 0.001\nJz = 0.002\nm_r = 0.1\nm_w = 0.2\nl_cg = 0.15\nR_h = 0.1\n"),
               ParseError);  // g is required
  EXPECT_THROW((void)PendulumParams::load("/nonexistent/plant.params"), ParseError);
}

TEST(OutputMaps, SelectMeasurementsAndPerformance) {
  EXPECT_EQ(output_map({1, 0, 0, 0}), Vector3(0, 0, 0));
  EXPECT_EQ(output_map({0.5, -1, 0.2, 3}), Vector3(-1, 0.2, 3));
  EXPECT_EQ(output_map({}), Vector3::Zero());
  EXPECT_EQ(performance_output({1, 2, 3, 4}, 5), Vector3(1, 3, 5));
  EXPECT_EQ(performance_output({}, 0), Vector3::Zero());
  EXPECT_EQ(performance_output({0, 0, 0.1, 0}, -0.2), Vector3(0, 0.1, -0.2));
  EXPECT_EQ(measurement_matrix() * measurement_right_inverse(), Eigen::Matrix3d::Identity());
  EXPECT_EQ(measurement_right_inverse().row(0), RowVector3::Zero());
}

TEST(StateSpace, InvariantViolationsAreReported) {
  auto ss = preset_ecp220();
  ss.A(0, 0) = 1.0;
  EXPECT_THROW(ss.check_invariants(), std::invalid_argument);
  ss = preset_ecp220();
  ss.B1(1) += 1.0;
  EXPECT_THROW(ss.check_invariants(), std::invalid_argument);
  ss = preset_ecp220();
  ss.A(1, 0) = 0.5;
  EXPECT_THROW(ss.check_invariants(), std::invalid_argument);
  ss = preset_ecp220();
  ss.D12(2) = 2.0;
  EXPECT_THROW(ss.check_invariants(), std::invalid_argument);
}
