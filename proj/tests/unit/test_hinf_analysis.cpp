#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "segway/hinf_analysis.hpp"
#include "segway/lmi_synthesis.hpp"

using namespace segway;
using Eigen::MatrixXd;

TEST(SpectralAbscissa, Examples) {
  EXPECT_DOUBLE_EQ(hinf::spectral_abscissa(-MatrixXd::Identity(3, 3)), -1.0);
  MatrixXd rot(2, 2);
  rot << 0, 1, -1, 0;
  EXPECT_NEAR(hinf::spectral_abscissa(rot), 0.0, 1e-15);
  EXPECT_FALSE(hinf::is_hurwitz(rot));
  EXPECT_THROW(hinf::spectral_abscissa(MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST(SpectralAbscissa, SimilarityInvariant) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto sys = oracle::random_hurwitz(rng, 5, 1, 1);
    MatrixXd t(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) t(i, j) = (i == j) + 0.3 * n(rng);
    const MatrixXd similar = t * sys.A * t.inverse();
    EXPECT_NEAR(hinf::spectral_abscissa(similar), hinf::spectral_abscissa(sys.A), 1e-8);
  }
}

TEST(HinfNorm, FirstOrderLag) {
  const hinf::LtiSystem sys(MatrixXd::Constant(1, 1, -1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1));
  EXPECT_NEAR(hinf::hinf_norm(sys), 1.0, 1e-6);
  EXPECT_GE(hinf::frequency_grid_norm(sys, 1e-3, 1e3, 200), 0.999);
}

TEST(HinfNorm, ResonancePeakMatchesClosedForm) {
  for (double zeta : {0.05, 0.1, 0.3, 0.6}) {
    MatrixXd a(2, 2), b(2, 1), c(1, 2);
    a << 0, 1, -1, -2 * zeta;
    b << 0, 1;
    c << 1, 0;
    const double expected = oracle::resonance_peak(zeta);
    EXPECT_NEAR(hinf::hinf_norm({a, b, c}) / expected, 1.0, 1e-4) << "zeta " << zeta;
  }
}

TEST(HinfNorm, RejectsUnstableSystems) {
  const hinf::LtiSystem sys(MatrixXd::Constant(1, 1, 0.5), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1));
  EXPECT_THROW(hinf::hinf_norm(sys), hinf::NotHurwitz);
  EXPECT_THROW(hinf::frequency_grid_norm(sys, 1e-3, 1e3, 100), hinf::NotHurwitz);
}

TEST(HinfNorm, GridIsALowerBoundAndConvergesOnRandomSystems) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 6;
    const auto sys = oracle::random_hurwitz(rng, n, 1 + trial % 2, 1 + trial % 3);
    const double norm = hinf::hinf_norm(sys);
    const double coarse = hinf::frequency_grid_norm(sys, 1e-3, 1e3, 100);
    const double fine = hinf::frequency_grid_norm(sys, 1e-3, 1e3, 2000);
    EXPECT_LE(coarse, norm * (1 + 1e-6)) << "trial " << trial;
    EXPECT_LE(fine, norm * (1 + 1e-6)) << "trial " << trial;
    EXPECT_NEAR(fine / norm, 1.0, 0.01) << "trial " << trial;
  }
}

TEST(HinfNorm, HamiltonianTestBracketsTheNorm) {
  MatrixXd a(2, 2), b(2, 1), c(1, 2);
  a << 0, 1, -1, -0.2;
  b << 0, 1;
  c << 1, 0;
  const hinf::LtiSystem sys(a, b, c);
  const double peak = oracle::resonance_peak(0.1);
  EXPECT_TRUE(hinf::hamiltonian_has_imaginary_eigenvalue(sys, 0.99 * peak));
  EXPECT_FALSE(hinf::hamiltonian_has_imaginary_eigenvalue(sys, 1.01 * peak));
}

TEST(ClosedLoop, PaperGainStabilizesWithPositiveFeedbackSign) {
  const auto ss = preset_ecp220();
  const auto k = lmi::paper_gain_set().k_bar;
  EXPECT_TRUE(hinf::is_hurwitz(ss.A + ss.B2 * k));
  EXPECT_FALSE(hinf::is_hurwitz(ss.A - ss.B2 * k));
  // Reference spectrum computed offline with numpy.
  auto ev = hinf::eigenvalues(ss.A + ss.B2 * k);
  std::sort(ev.begin(), ev.end(), [](auto x, auto y) { return x.real() < y.real(); });
  const double expected[] = {-69.2, -9.18, -4.83, -1.26};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(ev[i].real(), expected[i], 0.01 * std::abs(expected[i]));
    EXPECT_NEAR(ev[i].imag(), 0.0, 1e-9);
  }
}

TEST(ClosedLoop, OutputFeedbackHasNavigationSpectrum) {
  const auto ss = preset_ecp220();
  const auto nav = hinf::classify_navigation_spectrum(
      hinf::output_feedback_matrix(ss, lmi::paper_gain_set().k_out), 1e-9, 0.1);
  EXPECT_EQ(nav.zero_eigenvalues, 1);
  EXPECT_EQ(nav.stable_eigenvalues, 3);
  EXPECT_EQ(nav.other_eigenvalues, 0);
  // Column 1 of A + B2 K C2 is structurally zero.
  EXPECT_TRUE(hinf::output_feedback_matrix(ss, lmi::paper_gain_set().k_out).col(0).isZero(0.0));
}

TEST(ClosedLoop, PaperGainNormIsWithinPublishedLevel) {
  const auto ss = preset_ecp220();
  const auto loop = hinf::full_information_loop(ss, lmi::paper_gain_set().k_bar);
  const double norm = hinf::hinf_norm(loop);
  EXPECT_LE(norm, 8.2);
  const double grid = hinf::frequency_grid_norm(loop, 1e-3, 1e3, 2000);
  EXPECT_NEAR(grid / norm, 1.0, 0.01);
}

TEST(VerifyDissipation, ScalarAnalogueByHand) {
  // Embed a = -1, b = 1, c = 1, k = 0 in the first state; other states are
  // decoupled with A = -I and contribute eigenvalues -2.
  StateSpace ss;
  ss.A = -Matrix4::Identity();
  ss.B1 = Vector4(1, 0, 0, 0);
  ss.B2 = Vector4::Zero();
  ss.C1 = Matrix34::Zero();
  ss.C1(0, 0) = 1.0;
  ss.D12 = Vector3::Zero();
  const double gamma = 3.0;
  const double r = hinf::verify_dissipation(Matrix4::Identity(), RowVector4::Zero(), ss, gamma);
  // max eigenvalue of [[-2 + 1/3, 1], [1, -3]]
  const double a = -2 + 1.0 / gamma, d = -gamma, b = 1.0;
  const double expected = 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + b * b);
  EXPECT_NEAR(r, expected, 1e-12);
  EXPECT_LT(r, 0.0);
}

TEST(VerifyDissipation, LyapunovSolutionCertifiesForLargeGamma) {
  const auto ss = preset_ecp220();
  const auto k = lmi::paper_gain_set().k_bar;
  const MatrixXd a_cl = ss.A + ss.B2 * k;
  const Matrix4 p = oracle::lyapunov(a_cl, MatrixXd::Identity(4, 4));
  ASSERT_NEAR((a_cl.transpose() * p + p * a_cl + Matrix4::Identity()).norm(), 0.0, 1e-8);
  EXPECT_LT(hinf::verify_dissipation(p, k, ss, 1e6), 0.0);
}

TEST(VerifyDissipation, RejectsIndefiniteOrAsymmetricP) {
  const auto ss = preset_ecp220();
  Matrix4 p = Matrix4::Identity();
  p(0, 0) = -1;
  EXPECT_THROW(hinf::verify_dissipation(p, RowVector4::Zero(), ss, 1.0), std::invalid_argument);
  p = Matrix4::Identity();
  p(0, 1) = 0.1;
  EXPECT_THROW(hinf::verify_dissipation(p, RowVector4::Zero(), ss, 1.0), std::invalid_argument);
}
