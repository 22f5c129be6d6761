#include <cmath>
#include <vector>

#include "gridshield/error.hpp"
#include "gridshield/solvers.hpp"

namespace gridshield {

std::string to_string(LPStatus status) {
  switch (status) {
    case LPStatus::optimal: return "optimal";
    case LPStatus::infeasible: return "infeasible";
    case LPStatus::unbounded: return "unbounded";
  }
  return "unknown";
}

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-10;

// Dense simplex tableau. Row 0..m-1 are constraints, the last row holds the
// reduced costs and its last column the negated objective value.
class Tableau {
 public:
  Tableau(Eigen::Index rows, Eigen::Index cols) : t_(Matrix::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

  Matrix& data() { return t_; }
  std::vector<Eigen::Index>& basis() { return basis_; }
  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index cols() const { return t_.cols() - 1; }
  double rhs(Eigen::Index r) const { return t_(r, cols()); }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i != r && t_(i, c) != 0.0) t_.row(i) -= t_(i, c) * t_.row(r);
    }
    basis_[r] = c;
  }

  // Loads `cost` into the objective row and prices out the basis.
  void set_objective(const Vector& cost) {
    t_.row(rows()).setZero();
    t_.row(rows()).head(cost.size()) = cost.transpose();
    for (Eigen::Index r = 0; r < rows(); ++r) {
      const double cb = t_(rows(), basis_[r]);
      if (cb != 0.0) t_.row(rows()) -= cb * t_.row(r);
    }
  }

  // Bland's rule iterations. Columns >= `allowed` never enter.
  // Returns false when the objective is unbounded below.
  bool optimize(Eigen::Index allowed, int& pivots) {
    while (true) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (t_(rows(), j) < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index r = 0; r < rows(); ++r) {
        const double a = t_(r, enter);
        if (a <= kPivotTol) continue;
        const double ratio = rhs(r) / a;
        if (leave < 0 || ratio < best - 1e-12 ||
            (std::abs(ratio - best) <= 1e-12 && basis_[r] < basis_[leave])) {
          leave = r;
          best = ratio;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      ++pivots;
    }
  }

  void drop_row(Eigen::Index r) {
    const Eigen::Index last = t_.rows() - 1;
    Matrix next(t_.rows() - 1, t_.cols());
    next.topRows(r) = t_.topRows(r);
    next.bottomRows(last - r) = t_.bottomRows(last - r);
    t_ = std::move(next);
    basis_.erase(basis_.begin() + r);
  }

 private:
  Matrix t_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace

LPResult solve_lp(const Vector& cost, const Matrix& A_eq, const Vector& b_eq, const Matrix& A_ineq,
                  const Vector& b_ineq) {
  const Eigen::Index n = cost.size();
  const Eigen::Index m1 = A_eq.rows(), m2 = A_ineq.rows();
  if (b_eq.size() != m1 || (m1 && A_eq.cols() != n) || b_ineq.size() != m2 || (m2 && A_ineq.cols() != n)) {
    throw ConfigError("solve_lp: dimension mismatch");
  }
  const Eigen::Index m = m1 + m2;
  // Columns: x (n) | slacks (m2) | artificials (m).
  const Eigen::Index n_struct = n + m2;
  Tableau tab(m, n_struct + m);
  Matrix& T = tab.data();
  for (Eigen::Index r = 0; r < m1; ++r) {
    T.row(r).head(n) = A_eq.row(r);
    T(r, tab.cols()) = b_eq(r);
  }
  for (Eigen::Index r = 0; r < m2; ++r) {
    T.row(m1 + r).head(n) = A_ineq.row(r);
    T(m1 + r, n + r) = 1.0;
    T(m1 + r, tab.cols()) = b_ineq(r);
  }
  Vector phase1 = Vector::Zero(n_struct + m);
  for (Eigen::Index r = 0; r < m; ++r) {
    if (T(r, tab.cols()) < 0.0) T.row(r) *= -1.0;
    // Slack rows with nonnegative rhs start with the slack in the basis.
    if (r >= m1 && T(r, n + (r - m1)) > 0.0) {
      tab.basis()[r] = n + (r - m1);
    } else {
      T(r, n_struct + r) = 1.0;
      tab.basis()[r] = n_struct + r;
      phase1(n_struct + r) = 1.0;
    }
  }

  LPResult result;
  tab.set_objective(phase1);
  tab.optimize(tab.cols(), result.pivots);
  const double infeas = -T(tab.rows(), tab.cols());
  const double b_scale = 1.0 + std::max(b_eq.size() ? b_eq.cwiseAbs().maxCoeff() : 0.0,
                                        b_ineq.size() ? b_ineq.cwiseAbs().maxCoeff() : 0.0);
  if (infeas > 1e-9 * b_scale) {
    result.status = LPStatus::infeasible;
    return result;
  }
  // Drive zero-level artificials out of the basis; rows with no structural
  // entry are redundant and dropped.
  for (Eigen::Index r = tab.rows() - 1; r >= 0; --r) {
    if (tab.basis()[r] < n_struct) continue;
    Eigen::Index col = -1;
    for (Eigen::Index j = 0; j < n_struct; ++j) {
      if (std::abs(tab.data()(r, j)) > 1e-9) {
        col = j;
        break;
      }
    }
    if (col >= 0) {
      tab.pivot(r, col);
      ++result.pivots;
    } else {
      tab.drop_row(r);
    }
  }

  Vector phase2 = Vector::Zero(n_struct + m);
  phase2.head(n) = cost;
  tab.set_objective(phase2);
  if (!tab.optimize(n_struct, result.pivots)) {
    result.status = LPStatus::unbounded;
    return result;
  }
  result.x = Vector::Zero(n);
  for (Eigen::Index r = 0; r < tab.rows(); ++r) {
    if (tab.basis()[r] < n) result.x(tab.basis()[r]) = std::max(0.0, tab.rhs(r));
  }
  result.objective = cost.dot(result.x);
  result.status = LPStatus::optimal;
  return result;
}

}  // namespace gridshield
