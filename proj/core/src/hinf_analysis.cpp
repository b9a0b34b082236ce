#include "segway/hinf_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace segway::hinf {

namespace {

// |Re lambda| below this multiple of ||H||_F counts as "on the imaginary axis".
constexpr double kImagAxisRelTol = 1e-8;
constexpr int kBracketGridPoints = 200;

double sigma_max_at(const LtiSystem& sys, double w) {
  const Eigen::Index n = sys.states();
  Eigen::MatrixXcd resolvent = std::complex<double>(0.0, w) * Eigen::MatrixXcd::Identity(n, n) -
                               sys.A.cast<std::complex<double>>();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(resolvent);
  Eigen::MatrixXcd g = sys.C.cast<std::complex<double>>() * lu.solve(sys.B.cast<std::complex<double>>());
  if (sys.D.size() > 0) g += sys.D.cast<std::complex<double>>();
  if (!g.allFinite()) return std::numeric_limits<double>::quiet_NaN();
  if (g.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(g);
  return svd.singularValues()(0);
}

// Grid bracket around the modal frequencies of A, plus the DC point.
double bracket_lower_bound(const LtiSystem& sys) {
  double w_min = std::numeric_limits<double>::infinity();
  double w_max = 0.0;
  for (const auto& l : eigenvalues(sys.A)) {
    const double mag = std::abs(l);
    if (mag > 0.0) {
      w_min = std::min(w_min, mag);
      w_max = std::max(w_max, mag);
    }
  }
  if (!std::isfinite(w_min)) {
    w_min = 1.0;
    w_max = 1.0;
  }
  const double grid = frequency_grid_norm(sys, 1e-3 * w_min, 1e3 * w_max, kBracketGridPoints);
  const double dc = sigma_max_at(sys, 0.0);
  return std::max(grid, std::isfinite(dc) ? dc : 0.0);
}

}  // namespace

LtiSystem::LtiSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)) {
  D = Eigen::MatrixXd::Zero(C.rows(), B.cols());
  check_dimensions();
}

LtiSystem::LtiSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
  check_dimensions();
}

void LtiSystem::check_dimensions() const {
  if (A.rows() != A.cols()) throw std::invalid_argument("LtiSystem: A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("LtiSystem: B rows must match A");
  if (C.cols() != A.rows()) throw std::invalid_argument("LtiSystem: C columns must match A");
  if (D.rows() != C.rows() || D.cols() != B.cols()) {
    throw std::invalid_argument("LtiSystem: D must be (outputs x inputs)");
  }
}

std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("eigenvalues: matrix must be square");
  if (m.size() == 0) return {};
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigenvalue iteration did not converge");
  }
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

double spectral_abscissa(const Eigen::MatrixXd& m) {
  const auto ev = eigenvalues(m);
  if (ev.empty()) throw std::invalid_argument("spectral_abscissa: empty matrix");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& l : ev) best = std::max(best, l.real());
  return best;
}

bool is_hurwitz(const Eigen::MatrixXd& m) { return spectral_abscissa(m) < 0.0; }

double frequency_grid_norm(const LtiSystem& sys, double w_lo, double w_hi, int n_points) {
  sys.check_dimensions();
  if (!(w_lo > 0.0 && w_hi > w_lo) || n_points < 2) {
    throw std::invalid_argument("frequency_grid_norm: need 0 < w_lo < w_hi and n_points >= 2");
  }
  if (!is_hurwitz(sys.A)) throw NotHurwitz("frequency_grid_norm: A is not Hurwitz");
  const double log_lo = std::log10(w_lo);
  const double step = (std::log10(w_hi) - log_lo) / (n_points - 1);
  double peak = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double s = sigma_max_at(sys, std::pow(10.0, log_lo + step * i));
    // A singular resolvent only happens on an imaginary-axis pole; skip it.
    if (std::isfinite(s)) peak = std::max(peak, s);
  }
  return peak;
}

bool hamiltonian_has_imaginary_eigenvalue(const LtiSystem& sys, double gamma) {
  const Eigen::Index n = sys.states();
  Eigen::MatrixXd h(2 * n, 2 * n);
  h.topLeftCorner(n, n) = sys.A;
  h.topRightCorner(n, n) = sys.B * sys.B.transpose() / gamma;
  h.bottomLeftCorner(n, n) = -sys.C.transpose() * sys.C / gamma;
  h.bottomRightCorner(n, n) = -sys.A.transpose();
  const double tol = kImagAxisRelTol * h.norm();
  for (const auto& l : eigenvalues(h)) {
    if (std::abs(l.real()) < tol) return true;
  }
  return false;
}

NormResult hinf_norm_detailed(const LtiSystem& sys, double rel_tol) {
  sys.check_dimensions();
  if (sys.D.size() > 0 && !sys.D.isZero(0.0)) {
    throw std::invalid_argument("hinf_norm: only strictly proper systems (D = 0) are supported");
  }
  if (!(rel_tol > 0.0)) throw std::invalid_argument("hinf_norm: rel_tol must be positive");
  if (!is_hurwitz(sys.A)) {
    throw NotHurwitz("hinf_norm: A is not Hurwitz, the norm is undefined/infinite");
  }

  NormResult r;
  r.lower = bracket_lower_bound(sys);
  if (r.lower == 0.0 && (sys.B.isZero(0.0) || sys.C.isZero(0.0))) return r;
  r.upper = 10.0 * r.lower + 1.0;
  while (hamiltonian_has_imaginary_eigenvalue(sys, r.upper)) {
    r.lower = r.upper;
    r.upper *= 10.0;
    if (!std::isfinite(r.upper)) throw std::runtime_error("hinf_norm: bracket expansion failed");
  }
  while (r.upper - r.lower > rel_tol * r.upper && r.iterations < 200) {
    const double mid = 0.5 * (r.lower + r.upper);
    if (hamiltonian_has_imaginary_eigenvalue(sys, mid)) {
      r.lower = mid;
    } else {
      r.upper = mid;
    }
    ++r.iterations;
  }
  r.value = 0.5 * (r.lower + r.upper);
  return r;
}

double hinf_norm(const LtiSystem& sys, double rel_tol) { return hinf_norm_detailed(sys, rel_tol).value; }

LtiSystem full_information_loop(const StateSpace& ss, const RowVector4& k_bar) {
  const Matrix4 a = ss.A + ss.B2 * k_bar;
  const Matrix34 c = ss.C1 + ss.D12 * k_bar;
  return LtiSystem(a, ss.B1, c);
}

Matrix4 output_feedback_matrix(const StateSpace& ss, const RowVector3& k_out) {
  return ss.A + ss.B2 * k_out * ss.C2;
}

double verify_dissipation(const Matrix4& P, const RowVector4& k_bar, const StateSpace& ss,
                          double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("verify_dissipation: gamma must be positive");
  if (!P.allFinite() || !P.isApprox(P.transpose(), 1e-9)) {
    throw std::invalid_argument("verify_dissipation: P must be symmetric");
  }
  Eigen::LLT<Matrix4> llt(P);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("verify_dissipation: P must be positive definite");
  }
  const Matrix4 a_cl = ss.A + ss.B2 * k_bar;
  const Matrix34 c_cl = ss.C1 + ss.D12 * k_bar;
  Eigen::Matrix<double, 5, 5> w;
  w.topLeftCorner<4, 4>() = a_cl.transpose() * P + P * a_cl + c_cl.transpose() * c_cl / gamma;
  w.topRightCorner<4, 1>() = P * ss.B1;
  w.bottomLeftCorner<1, 4>() = (P * ss.B1).transpose();
  w(4, 4) = -gamma;
  const Eigen::Matrix<double, 5, 5> sym = 0.5 * (w + w.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

NavigationSpectrum classify_navigation_spectrum(const Matrix4& closed_loop, double zero_tol,
                                                double stable_margin) {
  NavigationSpectrum out;
  out.spectrum = eigenvalues(closed_loop);
  for (const auto& l : out.spectrum) {
    if (std::abs(l) < zero_tol) {
      ++out.zero_eigenvalues;
    } else if (l.real() < -stable_margin) {
      ++out.stable_eigenvalues;
    } else {
      ++out.other_eigenvalues;
    }
  }
  return out;
}

}  // namespace segway::hinf
