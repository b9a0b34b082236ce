#pragma once

// Stability and H-infinity verification tools. Everything here is
// independent of the LMI solver so it can check the solver's output.

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "segway/plant_model.hpp"

namespace segway::hinf {

/// Generic continuous-time LTI system (A, B, C, D).
struct LtiSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;

  LtiSystem() = default;
  LtiSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c);
  LtiSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d);

  Eigen::Index states() const { return A.rows(); }
  /// Throws std::invalid_argument on inconsistent dimensions.
  void check_dimensions() const;
};

class NotHurwitz : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& m);

/// Largest real part over the spectrum of a square matrix.
double spectral_abscissa(const Eigen::MatrixXd& m);

bool is_hurwitz(const Eigen::MatrixXd& m);

/// Largest singular value of C (jw I - A)^-1 B + D over a log-spaced grid on
/// [w_lo, w_hi]. A lower bound on the H-infinity norm.
double frequency_grid_norm(const LtiSystem& sys, double w_lo, double w_hi, int n_points);

struct NormResult {
  double value = 0.0;
  double lower = 0.0;  // final bisection bracket
  double upper = 0.0;
  int iterations = 0;
};

/// H-infinity norm by bisection on the Hamiltonian imaginary-axis test.
/// `rel_tol` bounds (upper - lower) / upper at termination. D must be zero.
NormResult hinf_norm_detailed(const LtiSystem& sys, double rel_tol = 1e-7);
double hinf_norm(const LtiSystem& sys, double rel_tol = 1e-7);

/// True iff the Hamiltonian for level gamma has an eigenvalue on the imaginary axis
/// (i.e. gamma does not exceed the norm).
bool hamiltonian_has_imaginary_eigenvalue(const LtiSystem& sys, double gamma);

/// Closed loop of u = k_bar x applied to the plant: (A + B2 K, B1, C1 + D12 K, 0).
LtiSystem full_information_loop(const StateSpace& ss, const RowVector4& k_bar);
/// A + B2 K C2 for output feedback u = k_out y.
Matrix4 output_feedback_matrix(const StateSpace& ss, const RowVector3& k_out);

/// Max eigenvalue of the bounded-real certificate
///   [ Acl'P + P Acl + Ccl'Ccl / gamma   P B1  ]
///   [ B1'P                             -gamma ]
/// Negative means dV/dt + z'z/gamma - gamma w'w < 0 along closed-loop trajectories.
double verify_dissipation(const Matrix4& P, const RowVector4& k_bar, const StateSpace& ss,
                          double gamma);

/// Spectrum facts for the "navigation" output-feedback loop.
struct NavigationSpectrum {
  int zero_eigenvalues = 0;     // |lambda| < zero_tol
  int stable_eigenvalues = 0;   // Re lambda < -stable_margin
  int other_eigenvalues = 0;
  std::vector<std::complex<double>> spectrum;
};

NavigationSpectrum classify_navigation_spectrum(const Matrix4& closed_loop, double zero_tol = 1e-9,
                                                double stable_margin = 0.0);

}  // namespace segway::hinf
