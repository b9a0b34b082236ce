#include "segway/lmi_synthesis.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace segway::lmi {

namespace {

// Block row offsets of the 17x17 LMI.
constexpr int kRowV = 0;   // 4
constexpr int kRowY = 4;   // 4
constexpr int kRowW = 8;   // 1
constexpr int kRowZ = 9;   // 3
constexpr int kRowU = 12;  // 1
constexpr int kRowV2 = 13; // 4

constexpr int kVars = kDecisionSize + 1;  // decision scalars + epigraph level t
using VarVector = Eigen::Matrix<double, kVars, 1>;
using VarMatrix = Eigen::Matrix<double, kVars, kVars>;

// M(x) = F0 + sum_i x_i F_i; built by evaluating the block assembly on unit
// decisions so there is a single source of truth for the LMI layout.
struct AffineLmi {
  LmiMatrix F0;
  std::array<LmiMatrix, kDecisionSize> F;

  LmiMatrix at(const DecisionVector& x) const {
    LmiMatrix m = F0;
    for (int i = 0; i < kDecisionSize; ++i) {
      if (x(i) != 0.0) m += x(i) * F[i];
    }
    return m;
  }
};

LmiMatrix evaluate_packed(const DecisionVector& x, const StateSpace& ss, double gamma) {
  LmiDecision d;
  unpack_decision(x, d.Y, d.V, d.N);
  d.gamma = gamma;
  return evaluate_lmi(d, ss);
}

AffineLmi build_affine(const StateSpace& ss, double gamma) {
  AffineLmi lmi;
  lmi.F0 = evaluate_packed(DecisionVector::Zero(), ss, gamma);
  for (int i = 0; i < kDecisionSize; ++i) {
    lmi.F[i] = evaluate_packed(DecisionVector::Unit(i), ss, gamma) - lmi.F0;
  }
  return lmi;
}

double max_eigenvalue(const LmiMatrix& m) {
  Eigen::SelfAdjointEigenSolver<LmiMatrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

// Barrier objective f = mu t - log det(tI - M(x)) - log(R^2 - |x|^2).
struct BarrierState {
  VarVector z;
  double value = 0.0;
  bool interior = false;
};

class BarrierProblem {
 public:
  BarrierProblem(const AffineLmi& lmi, double ball_radius)
      : lmi_(lmi), radius_sq_(ball_radius * ball_radius) {}

  static constexpr double barrier_parameter() { return kLmiSize + 1.0; }

  BarrierState evaluate(const VarVector& z, double mu) const {
    BarrierState s;
    s.z = z;
    const DecisionVector x = z.head<kDecisionSize>();
    const double t = z(kDecisionSize);
    const double ball = radius_sq_ - x.squaredNorm();
    if (!(ball > 0.0) || !z.allFinite()) return s;
    const LmiMatrix g = t * LmiMatrix::Identity() - lmi_.at(x);
    Eigen::LLT<LmiMatrix> llt(g);
    if (llt.info() != Eigen::Success) return s;
    const auto& l = llt.matrixLLT();
    double logdet = 0.0;
    for (int i = 0; i < kLmiSize; ++i) {
      if (!(l(i, i) > 0.0)) return s;
      logdet += 2.0 * std::log(l(i, i));
    }
    s.value = mu * t - logdet - std::log(ball);
    s.interior = std::isfinite(s.value);
    return s;
  }

  // Gradient and Hessian at an interior point.
  void derivatives(const VarVector& z, double mu, VarVector& grad, VarMatrix& hess) const {
    const DecisionVector x = z.head<kDecisionSize>();
    const double t = z(kDecisionSize);
    const LmiMatrix g = t * LmiMatrix::Identity() - lmi_.at(x);
    const LmiMatrix g_inv = g.llt().solve(LmiMatrix::Identity());

    // dG/dx_i = -F_i, dG/dt = I.
    std::array<LmiMatrix, kVars> w;
    for (int i = 0; i < kDecisionSize; ++i) w[i] = -g_inv * lmi_.F[i];
    w[kDecisionSize] = g_inv;

    for (int i = 0; i < kVars; ++i) {
      grad(i) = -w[i].trace();
      for (int j = 0; j <= i; ++j) {
        const double h = w[i].cwiseProduct(w[j].transpose()).sum();
        hess(i, j) = h;
        hess(j, i) = h;
      }
    }
    grad(kDecisionSize) += mu;

    const double ball = radius_sq_ - x.squaredNorm();
    grad.head<kDecisionSize>() += 2.0 * x / ball;
    hess.topLeftCorner<kDecisionSize, kDecisionSize>() +=
        2.0 / ball * Eigen::Matrix<double, kDecisionSize, kDecisionSize>::Identity() +
        4.0 / (ball * ball) * x * x.transpose();
  }

 private:
  const AffineLmi& lmi_;
  double radius_sq_;
};

struct Candidate {
  bool accepted = false;
  double lambda_max = 0.0;
  double margin = 0.0;
  LmiDecision decision;
};

Candidate check_candidate(const AffineLmi& lmi, const DecisionVector& x, double gamma,
                          const SolverOptions& options) {
  Candidate c;
  const LmiMatrix m = lmi.at(x);
  c.lambda_max = max_eigenvalue(m);
  c.margin = options.margin_rel * m.norm();
  if (!(c.lambda_max < -c.margin)) return c;
  Matrix4 y;
  Matrix4 v;
  RowVector4 n;
  unpack_decision(x, y, v, n);
  if (condition_number(v) > options.max_condition_v) return c;
  Eigen::LLT<Matrix4> llt(y);
  if (llt.info() != Eigen::Success) return c;
  c.decision = LmiDecision::make(y, v, n, gamma);
  c.accepted = true;
  return c;
}

enum class AttemptOutcome { kFound, kNotFound, kBreakdown };

struct AttemptResult {
  AttemptOutcome outcome = AttemptOutcome::kNotFound;
  Candidate best;
  double lower_bound = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::string status;
};

AttemptResult run_attempt(const AffineLmi& lmi, const DecisionVector& x0, double gamma,
                          const SolverOptions& options, int iteration_budget) {
  AttemptResult r;
  const BarrierProblem problem(lmi, options.ball_radius);
  const double m_barrier = BarrierProblem::barrier_parameter();

  const double lam0 = max_eigenvalue(lmi.at(x0));
  VarVector z;
  z.head<kDecisionSize>() = x0;
  z(kDecisionSize) = lam0 + std::max(1.0, 0.1 * std::abs(lam0));

  double mu = 1.0;
  BarrierState state = problem.evaluate(z, mu);
  if (!state.interior) {
    r.outcome = AttemptOutcome::kBreakdown;
    r.status = "initial point outside the ball";
    return r;
  }
  r.best.lambda_max = std::numeric_limits<double>::infinity();

  VarVector grad;
  VarMatrix hess;
  for (int outer = 0; outer < options.max_outer_iterations; ++outer) {
    state = problem.evaluate(z, mu);
    for (int inner = 0; inner < 200; ++inner) {
      if (r.iterations >= iteration_budget) {
        r.status = "iteration budget exhausted";
        return r;
      }
      ++r.iterations;

      const Candidate c = check_candidate(lmi, z.head<kDecisionSize>(), gamma, options);
      if (c.lambda_max < r.best.lambda_max || c.accepted) r.best = c;
      if (c.accepted) {
        r.outcome = AttemptOutcome::kFound;
        r.status = "feasible";
        return r;
      }

      problem.derivatives(z, mu, grad, hess);
      if (!grad.allFinite() || !hess.allFinite()) {
        r.outcome = AttemptOutcome::kBreakdown;
        r.status = "non-finite barrier derivatives";
        return r;
      }
      const Eigen::LDLT<VarMatrix> ldlt(hess);
      const VarVector step = ldlt.solve(-grad);
      const double decrement_sq = -grad.dot(step);
      if (!step.allFinite() || !(decrement_sq >= 0.0)) {
        r.outcome = AttemptOutcome::kBreakdown;
        r.status = "Newton system failure";
        return r;
      }
      if (decrement_sq < 1e-10) break;

      // Backtracking with the interior kept.
      double s = 1.0;
      BarrierState trial;
      for (int ls = 0; ls < 60; ++ls) {
        trial = problem.evaluate(z + s * step, mu);
        if (trial.interior && trial.value <= state.value - 0.25 * s * decrement_sq) break;
        s *= 0.5;
      }
      if (!trial.interior || !(trial.value < state.value)) break;  // stalled: treat as centered
      z = trial.z;
      state = trial;
    }

    // Near-central point: min lambda_max >= t - m/mu (within the ball).
    const double t = z(kDecisionSize);
    r.lower_bound = std::max(r.lower_bound, t - m_barrier / mu);
    if (r.lower_bound >= 0.0) {
      r.status = "certified lambda_max >= 0 inside the search ball";
      return r;
    }
    if (m_barrier / mu < 1e-11 * std::max(1.0, std::abs(t))) {
      r.status = "converged without strict feasibility margin";
      return r;
    }
    mu *= 8.0;
  }
  r.status = "outer iteration limit reached";
  return r;
}

}  // namespace

LmiDecision LmiDecision::make(const Matrix4& Y, const Matrix4& V, const RowVector4& N,
                              double gamma) {
  LmiDecision d;
  d.Y = 0.5 * (Y + Y.transpose());
  d.V = V;
  d.N = N;
  d.gamma = gamma;
  d.P = d.Y.llt().solve(Matrix4::Identity());
  d.P = 0.5 * (d.P + d.P.transpose());
  return d;
}

void LmiDecision::check_invariants(double max_condition_v) const {
  if (!(gamma > 0.0)) throw std::invalid_argument("LmiDecision: gamma must be positive");
  if (!Y.isApprox(Y.transpose(), 1e-12)) throw std::invalid_argument("LmiDecision: Y not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix4> eig(Y, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw std::invalid_argument("LmiDecision: Y not positive definite");
  }
  if (condition_number(V) > max_condition_v) {
    throw std::invalid_argument("LmiDecision: V is ill-conditioned");
  }
  const double residual = (P * Y - Matrix4::Identity()).cwiseAbs().maxCoeff();
  if (!(residual < 1e-8 * std::max(1.0, condition_number(Y)))) {
    throw std::invalid_argument("LmiDecision: P is not the inverse of Y");
  }
}

GainSet paper_gain_set() {
  GainSet g;
  g.k_bar << 0.38, 0.43, 6.38, 1.09;
  g.k_out = g.k_bar.tail<3>();
  g.gamma_achieved = 8.2;
  return g;
}

LmiMatrix evaluate_lmi(const LmiDecision& d, const StateSpace& ss) {
  LmiMatrix m = LmiMatrix::Zero();
  const Matrix4& y = d.Y;
  const Matrix4& v = d.V;

  m.block<4, 4>(kRowV, kRowV) = -(v.transpose() + v);
  m.block<4, 4>(kRowY, kRowV) = ss.A * v + y + ss.B2 * d.N;
  m.block<4, 4>(kRowY, kRowY) = -y;
  m.block<1, 4>(kRowW, kRowY) = ss.B1.transpose();
  m(kRowW, kRowW) = -d.gamma;
  m.block<3, 4>(kRowZ, kRowV) = ss.C1 * v;
  m.block<3, 3>(kRowZ, kRowZ) = -d.gamma * Eigen::Matrix3d::Identity();
  m.block<1, 4>(kRowU, kRowV) = d.N;
  m(kRowU, kRowU) = -d.gamma;
  m.block<4, 4>(kRowV2, kRowV) = v;
  m.block<4, 4>(kRowV2, kRowV2) = -y;

  // Fill the starred upper blocks by symmetry; the diagonal blocks -(V'+V), -Y
  // are symmetric whenever Y is.
  for (int i = 0; i < kLmiSize; ++i) {
    for (int j = i + 1; j < kLmiSize; ++j) m(i, j) = m(j, i);
  }
  return m;
}

DecisionVector pack_decision(const Matrix4& Y, const Matrix4& V, const RowVector4& N) {
  DecisionVector x;
  int k = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) x(k++) = Y(i, j);
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) x(k++) = V(i, j);
  }
  for (int j = 0; j < 4; ++j) x(k++) = N(j);
  return x;
}

void unpack_decision(const DecisionVector& x, Matrix4& Y, Matrix4& V, RowVector4& N) {
  int k = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      Y(i, j) = x(k);
      Y(j, i) = x(k);
      ++k;
    }
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) V(i, j) = x(k++);
  }
  for (int j = 0; j < 4; ++j) N(j) = x(k++);
}

double condition_number(const Matrix4& m) {
  Eigen::JacobiSVD<Matrix4> svd(m);
  const auto& s = svd.singularValues();
  if (!(s(3) > 0.0)) return std::numeric_limits<double>::infinity();
  return s(0) / s(3);
}

FeasibilityResult solve_feasibility(const StateSpace& ss, double gamma,
                                    const SolverOptions& options) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("solve_feasibility: gamma must be positive and finite");
  }
  const AffineLmi lmi = build_affine(ss, gamma);

  const DecisionVector x_init = pack_decision(Matrix4::Identity(), Matrix4::Identity(),
                                              -options.init_alpha * ss.B2.transpose());
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  FeasibilityResult result;
  result.lower_bound = -std::numeric_limits<double>::infinity();
  double best_lambda = std::numeric_limits<double>::infinity();

  // Returns true once a decision is accepted.
  auto search = [&](const SolverOptions& opts, bool record_bound) {
    DecisionVector x0 = x_init;
    for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
      if (attempt > 0) {
        for (int i = 0; i < kDecisionSize; ++i) x0(i) = x_init(i) + 0.1 * noise(rng);
      }
      ++result.attempts;
      const int budget = opts.max_newton_iterations - result.iterations;
      if (budget <= 0) return false;
      const AttemptResult r = run_attempt(lmi, x0, gamma, opts, budget);
      result.iterations += r.iterations;
      if (record_bound) result.lower_bound = std::max(result.lower_bound, r.lower_bound);
      if (r.best.lambda_max < best_lambda || r.best.accepted) {
        best_lambda = r.best.lambda_max;
        result.lambda_max = r.best.lambda_max;
        result.margin = r.best.margin;
      }
      result.status = r.status;
      if (r.outcome == AttemptOutcome::kFound) {
        result.decision = r.best.decision;
        return true;
      }
      if (r.outcome == AttemptOutcome::kNotFound) return false;
    }
    return false;
  };

  if (search(options, true)) return result;
  // lambda_max < 0 was reached but only at a scale where the relative margin
  // fails (the analytic center drifts outward when the LMI is unbounded in
  // some direction). Re-center inside smaller balls to find a moderate-scale
  // point. The lower bound stays the one certified on the full ball.
  SolverOptions shrunk = options;
  while (best_lambda < 0.0 && shrunk.ball_radius > 100.0 * x_init.norm()) {
    shrunk.ball_radius /= 100.0;
    if (search(shrunk, false)) return result;
  }
  return result;
}

SynthesisResult minimize_gamma(const StateSpace& ss, double lo, double hi, double tol,
                               const SolverOptions& options) {
  if (!(lo > 0.0 && hi > lo && tol > 0.0)) {
    throw std::invalid_argument("minimize_gamma: need 0 < lo < hi and tol > 0");
  }
  SynthesisResult out;
  auto probe = [&](double gamma) {
    auto r = solve_feasibility(ss, gamma, options);
    out.probes.push_back({gamma, r.decision.has_value()});
    return r;
  };

  auto at_hi = probe(hi);
  if (!at_hi.decision) {
    throw InfeasibleBracket("no feasible decision found at gamma_hi = " + std::to_string(hi) +
                            " (lambda_max " + std::to_string(at_hi.lambda_max) +
                            "); enlarge the bracket");
  }
  LmiDecision best = *at_hi.decision;
  double best_lambda = at_hi.lambda_max;

  auto at_lo = probe(lo);
  if (at_lo.decision) {
    best = *at_lo.decision;
    best_lambda = at_lo.lambda_max;
    hi = lo;
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    auto r = probe(mid);
    if (r.decision) {
      hi = mid;
      best = *r.decision;
      best_lambda = r.lambda_max;
    } else {
      lo = mid;
    }
  }
  out.decision = best;
  out.lambda_max = best_lambda;
  out.gains = extract_gain(best, options.max_condition_v);
  return out;
}

GainSet extract_gain(const LmiDecision& d, double max_condition_v) {
  if (condition_number(d.V) > max_condition_v) {
    throw std::invalid_argument("extract_gain: V is numerically singular (condition number " +
                                std::to_string(condition_number(d.V)) + ")");
  }
  GainSet g;
  // K_bar V = N  <=>  V' K_bar' = N'
  g.k_bar = d.V.transpose().partialPivLu().solve(d.N.transpose()).transpose();
  g.k_out = g.k_bar.tail<3>();
  g.gamma_achieved = d.gamma;
  return g;
}

}  // namespace segway::lmi
