#include "gridshield/estimation.hpp"

#include <cmath>

#include "gridshield/error.hpp"

namespace gridshield {

namespace {

Matrix drop_column(const Matrix& m, int col) {
  Matrix out(m.rows(), m.cols() - 1);
  out.leftCols(col) = m.leftCols(col);
  out.rightCols(m.cols() - col - 1) = m.rightCols(m.cols() - col - 1);
  return out;
}

}  // namespace

DcEstimator::DcEstimator(const MeasurementModel& model, int slack) : model_(model), slack_(slack) {
  const int n = model.n_state;
  if (slack < 0 || slack >= n) throw ConfigError("psse_dc: slack bus out of range");
  if (model.noise_var.size() != model.H.rows() || (model.noise_var.array() <= 0.0).any()) {
    throw ConfigError("psse_dc: noise variances must be positive, one per row");
  }
  inv_sigma_ = model.noise_var.array().rsqrt();
  const Matrix Hr = inv_sigma_.asDiagonal() * drop_column(model.H, slack);
  if (matrix_rank(Hr) < n - 1) throw ConfigError("psse_dc: H without the slack column is rank deficient");
  // Normal equations through a QR of the whitened reduced H.
  Eigen::ColPivHouseholderQR<Matrix> qr(Hr);
  gain_ = qr.solve(Matrix::Identity(Hr.rows(), Hr.rows())) * inv_sigma_.asDiagonal();
}

EstimationResult DcEstimator::estimate(const Vector& z) const {
  if (z.size() != model_.H.rows()) throw ConfigError("psse_dc: measurement length mismatch");
  const int n = model_.n_state;
  const Vector reduced = gain_ * z;
  EstimationResult out;
  out.theta = Vector::Zero(n);
  out.theta.head(slack_) = reduced.head(slack_);
  out.theta.tail(n - slack_ - 1) = reduced.tail(n - slack_ - 1);
  out.residual = z - model_.H * out.theta;
  out.residual_norm = inv_sigma_.cwiseProduct(out.residual).norm();
  return out;
}

EstimationResult psse_dc(const MeasurementModel& model, const Vector& z, int slack) {
  return DcEstimator(model, slack).estimate(z);
}

ComplexVector ac_injections(const ComplexMatrix& Y, const ComplexVector& v) {
  return v.cwiseProduct((Y * v).conjugate());
}

namespace {

ComplexVector polar_voltage(const Vector& angle, const Vector& mag) {
  ComplexVector v(angle.size());
  for (Eigen::Index b = 0; b < angle.size(); ++b) v(b) = std::polar(mag(b), angle(b));
  return v;
}

Vector stack_complex(const ComplexVector& r) {
  Vector out(2 * r.size());
  out.head(r.size()) = r.real();
  out.tail(r.size()) = r.imag();
  return out;
}

struct AcIterate {
  Vector angle;
  Vector mag;
  Vector residual;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Damped Gauss-Newton from the iterate in `x` towards measurements z.
void refine(const ComplexMatrix& Y, const ComplexVector& z, int slack, const AcEstimatorOptions& options,
            const Vector& w, AcIterate& x) {
  const Eigen::Index n = Y.rows();
  const std::complex<double> j(0.0, 1.0);
  ComplexVector v = polar_voltage(x.angle, x.mag);
  x.residual = stack_complex(z - ac_injections(Y, v));
  x.cost = w.cwiseProduct(x.residual).squaredNorm();
  x.converged = false;
  double lambda = options.initial_damping;
  for (int it = 0; it < options.max_iter; ++it) {
    ++x.iterations;
    // Derivatives of S = diag(V) conj(Y V) with respect to angles and magnitudes.
    const ComplexVector I = Y * v;
    const ComplexMatrix dVa =
        j * v.asDiagonal() * (ComplexMatrix(I.asDiagonal()) - Y * v.asDiagonal()).conjugate();
    const ComplexVector vnorm = v.cwiseQuotient(x.mag.cast<std::complex<double>>());
    ComplexMatrix dVm = v.asDiagonal() * (Y * vnorm.asDiagonal()).conjugate();
    dVm += ComplexMatrix(I.conjugate().asDiagonal()) * vnorm.asDiagonal();

    Matrix J(2 * n, 2 * n - 1);
    Eigen::Index col = 0;
    for (Eigen::Index b = 0; b < n; ++b) {
      if (b == slack) continue;
      J.col(col).head(n) = dVa.col(b).real();
      J.col(col).tail(n) = dVa.col(b).imag();
      ++col;
    }
    for (Eigen::Index b = 0; b < n; ++b, ++col) {
      J.col(col).head(n) = dVm.col(b).real();
      J.col(col).tail(n) = dVm.col(b).imag();
    }
    J = w.asDiagonal() * J;
    const Matrix JtJ = J.transpose() * J;
    const Vector g = J.transpose() * w.cwiseProduct(x.residual);
    const Vector diag = JtJ.diagonal().cwiseMax(1e-12 * JtJ.diagonal().maxCoeff());

    Vector step, angle, mag, r;
    double cost = x.cost;
    bool accepted = false;
    for (int h = 0; h <= options.max_damping_increases; ++h) {
      Matrix A = JtJ;
      A.diagonal() += lambda * diag;
      step = A.llt().solve(g);
      // Component-wise trust region keeps the path off low-voltage branches.
      const double peak = step.cwiseAbs().maxCoeff();
      if (peak > options.max_step) step *= options.max_step / peak;
      angle = x.angle;
      mag = x.mag;
      col = 0;
      for (Eigen::Index b = 0; b < n; ++b) {
        if (b != slack) angle(b) += step(col++);
      }
      for (Eigen::Index b = 0; b < n; ++b) mag(b) += step(col++);
      r = stack_complex(z - ac_injections(Y, polar_voltage(angle, mag)));
      cost = w.cwiseProduct(r).squaredNorm();
      if (step.allFinite() && cost <= x.cost) {
        accepted = true;
        lambda = std::max(lambda / 3.0, 1e-12);
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) {
      // No descent direction left: the residual is stationary.
      x.converged = true;
      return;
    }
    const bool stationary = x.cost - cost <= 1e-9 * x.cost || cost <= 1e-30;
    x.angle = angle;
    x.mag = mag;
    x.residual = r;
    x.cost = cost;
    v = polar_voltage(x.angle, x.mag);
    if (step.norm() < options.step_tol || stationary) {
      x.converged = true;
      return;
    }
  }
}

}  // namespace

EstimationResult psse_ac(const ComplexMatrix& Y, const ComplexVector& z_ac, int slack,
                         const AcEstimatorOptions& options) {
  const Eigen::Index n = Y.rows();
  if (Y.cols() != n || z_ac.size() != n) throw ConfigError("psse_ac: dimension mismatch");
  if (slack < 0 || slack >= n) throw ConfigError("psse_ac: slack bus out of range");
  if (options.continuation_stages < 1) throw ConfigError("psse_ac: at least one stage is required");

  Vector w = Vector::Ones(2 * n);
  if (options.weight_power != 0.0) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const double d = std::pow(std::abs(Y(b, b)), -options.weight_power);
      w(b) = d;
      w(n + b) = d;
    }
  }
  AcIterate x;
  x.angle = Vector::Zero(n);
  x.mag = Vector::Ones(n);
  // The flat profile injects nothing, so t z with t rising to 1 traces a
  // path of measurement sets from the flat start to z.
  for (int s = 1; s <= options.continuation_stages; ++s) {
    const double t = static_cast<double>(s) / options.continuation_stages;
    refine(Y, t * z_ac, slack, options, w, x);
  }
  if (options.weight_power != 0.0) {
    // Final unweighted pass: the estimate minimizes the plain residual norm.
    refine(Y, z_ac, slack, options, Vector::Ones(2 * n), x);
  }
  EstimationResult out;
  out.v = polar_voltage(x.angle, x.mag);
  out.theta = x.angle;
  out.residual = x.residual;
  out.residual_norm = x.residual.norm();
  out.iterations = x.iterations;
  out.converged = x.converged;
  return out;
}

}  // namespace gridshield
