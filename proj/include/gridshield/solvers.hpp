#pragma once

#include <iosfwd>
#include <string>

#include "gridshield/types.hpp"

namespace gridshield {

/// minimize x^T Q x + q^T x
/// subject to A_eq x = b_eq and A_ineq x <= b_ineq.
///
/// The objective carries no 1/2 factor. `q` may be left empty (zero).
struct QPProblem {
  Matrix Q;
  Vector q;
  Matrix A_eq;
  Vector b_eq;
  Matrix A_ineq;
  Vector b_ineq;

  int n() const { return static_cast<int>(Q.rows()); }
};

enum class QPStatus { optimal, infeasible, unbounded, max_iter };
std::string to_string(QPStatus status);

struct QPSolution {
  Vector x;
  double objective = 0.0;
  QPStatus status = QPStatus::max_iter;
  /// Max constraint violation.
  double primal_residual = 0.0;
  /// ||2Qx + q + A_eq^T y_eq + A_ineq^T y_ineq||_inf.
  double dual_residual = 0.0;
  Vector y_eq;
  /// Inequality multipliers, nonnegative at an optimum.
  Vector y_ineq;
  int iterations = 0;
  bool polished = false;
};

struct QPSettings {
  double tol = 1e-8;
  int max_iter = 50000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  /// Iterations between residual checks and rho updates.
  int check_interval = 25;
  /// Infeasibility certificates must persist this many iterations.
  int infeasibility_patience = 1000;
  /// ADMM tolerance at which polishing is first attempted.
  double polish_trigger = 1e-4;
  bool polish = true;
  int scaling_iterations = 10;
  /// Optional `iter,primal_res,dual_res,obj` trace.
  std::ostream* trace = nullptr;
};

/// Operator-splitting QP solver with adaptive rho, Ruiz equilibration and a
/// KKT polish on the detected active set. Deterministic for fixed input.
/// Throws ConfigError on dimension mismatch and NumericError when Q is not
/// symmetric PSD (eigenvalue below -1e-9 relative).
QPSolution solve_qp(const QPProblem& problem, const QPSettings& settings = {});

/// Exact minimizer of x^T Q x + q^T x subject to A x = b, computed in the
/// null space of A. Redundant consistent rows are tolerated. Throws
/// NumericError when the rows are inconsistent or the reduced Hessian is
/// singular (the minimizer is not unique).
Vector solve_kkt_equality(const Matrix& Q, const Matrix& A_eq, const Vector& b_eq,
                          const Vector& q = Vector());

enum class LPStatus { optimal, infeasible, unbounded };
std::string to_string(LPStatus status);

struct LPResult {
  Vector x;
  double objective = 0.0;
  LPStatus status = LPStatus::infeasible;
  int pivots = 0;
};

/// minimize cost^T x subject to A_eq x = b_eq, A_ineq x <= b_ineq, x >= 0.
/// Dense two-phase simplex with Bland's rule.
LPResult solve_lp(const Vector& cost, const Matrix& A_eq, const Vector& b_eq, const Matrix& A_ineq,
                  const Vector& b_ineq);

}  // namespace gridshield
