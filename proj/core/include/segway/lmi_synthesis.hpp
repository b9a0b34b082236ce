#pragma once

// H-infinity gain synthesis through the output-to-full-information LMI.
//
// Decision variables: Y = Y' > 0 (4x4), V invertible (4x4), N (1x4), at a fixed
// attenuation level gamma. Feasibility certifies the storage function x'Px with
// P = Y^-1 and the full-information gain K_bar = N V^-1. The output-feedback gain
// is K_bar with its disk-angle entry dropped.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "segway/plant_model.hpp"

namespace segway::lmi {

inline constexpr int kLmiSize = 17;
inline constexpr int kDecisionSize = 30;  // 10 (Y) + 16 (V) + 4 (N)

using LmiMatrix = Eigen::Matrix<double, kLmiSize, kLmiSize>;
using DecisionVector = Eigen::Matrix<double, kDecisionSize, 1>;

struct LmiDecision {
  Matrix4 Y = Matrix4::Identity();
  Matrix4 V = Matrix4::Identity();
  RowVector4 N = RowVector4::Zero();
  double gamma = 1.0;
  Matrix4 P = Matrix4::Identity();  // Y^-1

  /// Builds a decision and fills P = Y^-1.
  static LmiDecision make(const Matrix4& Y, const Matrix4& V, const RowVector4& N, double gamma);

  /// Throws std::invalid_argument if Y is not SPD, V is ill-conditioned, or P Y != I.
  void check_invariants(double max_condition_v = 1e8) const;
};

struct GainSet {
  RowVector4 k_bar = RowVector4::Zero();  // u = k_bar x
  RowVector3 k_out = RowVector3::Zero();  // u = k_out y, y = [theta1_dot, theta2, theta2_dot]
  double gamma_achieved = 0.0;
};

/// Published full-information gain set, gamma = 8.2.
GainSet paper_gain_set();

/// Assembles the symmetric 17x17 LMI with block sizes (4, 4, 1, 3, 1, 4).
/// Only Y, V, N and gamma are read; P is ignored.
LmiMatrix evaluate_lmi(const LmiDecision& d, const StateSpace& ss);

DecisionVector pack_decision(const Matrix4& Y, const Matrix4& V, const RowVector4& N);
void unpack_decision(const DecisionVector& x, Matrix4& Y, Matrix4& V, RowVector4& N);

struct SolverOptions {
  int max_newton_iterations = 4000;
  int max_outer_iterations = 80;
  int restarts = 10;                // only used after numerical breakdown
  std::uint64_t seed = 0x5e6a7ULL;
  double margin_rel = 1e-6;         // strict feasibility: lambda_max < -margin_rel * ||M||_F
  double max_condition_v = 1e8;
  double ball_radius = 1e8;         // ||x||_2 bound on the stacked decision scalars
  double init_alpha = 0.01;         // N0 = -alpha B2'
};

struct FeasibilityResult {
  std::optional<LmiDecision> decision;
  double lambda_max = 0.0;   // at the last iterate
  double margin = 0.0;       // margin_rel * ||M||_F at the last iterate
  double lower_bound = 0.0;  // certified lower bound on min lambda_max (within the ball)
  int iterations = 0;        // Newton iterations, all attempts
  int attempts = 0;
  std::string status;
};

/// Searches for a strictly feasible decision at fixed gamma. Absence of a
/// decision means "not found", not a proof of infeasibility.
FeasibilityResult solve_feasibility(const StateSpace& ss, double gamma,
                                    const SolverOptions& options = {});

class InfeasibleBracket : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthesisResult {
  GainSet gains;
  LmiDecision decision;
  double lambda_max = 0.0;
  struct Probe {
    double gamma;
    bool feasible;
  };
  std::vector<Probe> probes;
};

/// Bisection on gamma over [lo, hi] down to width `tol`. Throws InfeasibleBracket
/// when no decision is found at `hi`.
SynthesisResult minimize_gamma(const StateSpace& ss, double lo, double hi, double tol,
                               const SolverOptions& options = {});

/// K_bar = N V^-1; K_out drops the theta1 entry. Throws std::invalid_argument when
/// V is numerically singular.
GainSet extract_gain(const LmiDecision& d, double max_condition_v = 1e8);

double condition_number(const Matrix4& m);

}  // namespace segway::lmi
