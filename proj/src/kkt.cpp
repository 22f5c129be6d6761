#include <cmath>
#include <sstream>

#include "gridshield/error.hpp"
#include "gridshield/solvers.hpp"

namespace gridshield {

Vector solve_kkt_equality(const Matrix& Q, const Matrix& A_eq, const Vector& b_eq, const Vector& q) {
  const Eigen::Index n = Q.rows();
  if (Q.cols() != n) throw ConfigError("solve_kkt_equality: Q is not square");
  if (q.size() != 0 && q.size() != n) throw ConfigError("solve_kkt_equality: q has wrong length");
  if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n)) {
    throw ConfigError("solve_kkt_equality: constraint dimensions mismatch");
  }
  const Vector lin = q.size() ? q : Vector::Zero(n);

  Vector x_p = Vector::Zero(n);
  Matrix Z = Matrix::Identity(n, n);
  if (A_eq.rows() > 0) {
    const double a_scale = std::max(1.0, A_eq.cwiseAbs().maxCoeff());
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A_eq);
    cod.setThreshold(1e-12);
    x_p = cod.solve(b_eq);
    const double resid = (A_eq * x_p - b_eq).cwiseAbs().maxCoeff();
    if (resid > 1e-9 * (a_scale + b_eq.cwiseAbs().maxCoeff())) {
      std::ostringstream os;
      os << "solve_kkt_equality: singular KKT system, equality rows are inconsistent (rank "
         << cod.rank() << " of " << A_eq.rows() << ", residual " << resid << ")";
      throw NumericError(os.str());
    }
    // Null space of A from a column-pivoted QR of A^T.
    Eigen::ColPivHouseholderQR<Matrix> qr(A_eq.transpose());
    qr.setThreshold(1e-12);
    const Eigen::Index r = qr.rank();
    Matrix Qfull = qr.householderQ();
    Z = Qfull.rightCols(n - r);
  }
  if (Z.cols() == 0) return x_p;

  // Minimize (x_p + Z y)^T Q (x_p + Z y) + lin^T (x_p + Z y) over y.
  const Matrix reduced = Z.transpose() * Q * Z;
  const Vector grad = Z.transpose() * (2.0 * Q * x_p + lin);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (reduced + reduced.transpose()));
  const double top = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  const double bottom = eig.eigenvalues().minCoeff();
  if (!(bottom > 1e-11 * top)) {
    std::ostringstream os;
    os << "solve_kkt_equality: singular KKT system, reduced Hessian is rank deficient (min eigenvalue "
       << bottom << ")";
    throw NumericError(os.str());
  }
  const Vector y = eig.eigenvectors() *
                   (eig.eigenvalues().cwiseInverse().asDiagonal() *
                    (eig.eigenvectors().transpose() * (-0.5 * grad)));
  return x_p + Z * y;
}

}  // namespace gridshield
