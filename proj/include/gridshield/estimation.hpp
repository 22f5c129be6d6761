#pragma once

#include "gridshield/grid_model.hpp"
#include "gridshield/types.hpp"

namespace gridshield {

/// Output of a state estimator. DC fills `theta`; AC fills `v` and sets
/// `theta` to the voltage phases.
struct EstimationResult {
  Vector theta;
  ComplexVector v;
  /// Measurement residual z - h(x_hat) (real DC rows, or complex AC rows
  /// stacked as [Re; Im]).
  Vector residual;
  /// ||R^{-1/2} r|| for DC, ||r|| for AC.
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// Weighted least-squares DC estimator with the slack phase fixed to zero.
/// The gain matrix is factored once so repeated estimates are cheap.
class DcEstimator {
 public:
  /// Throws ConfigError when H without the slack column has rank < N-1.
  DcEstimator(const MeasurementModel& model, int slack);

  EstimationResult estimate(const Vector& z) const;

  int slack() const { return slack_; }
  const MeasurementModel& model() const { return model_; }

 private:
  MeasurementModel model_;
  int slack_;
  /// theta_reduced = gain_ z.
  Matrix gain_;
  Vector inv_sigma_;
};

EstimationResult psse_dc(const MeasurementModel& model, const Vector& z, int slack);

struct AcEstimatorOptions {
  /// Iteration cap per continuation stage.
  int max_iter = 50;
  double step_tol = 1e-10;
  double initial_damping = 1e-3;
  int max_damping_increases = 30;
  /// Largest change of any angle or magnitude in one step.
  double max_step = 0.1;
  /// First pass weights bus rows by |Y_ii|^-weight_power (0 disables it);
  /// an unweighted pass always finishes.
  double weight_power = 1.5;
  /// Measurements are approached as t z for t = 1/stages, ..., 1.
  int continuation_stages = 1;
};

/// Complex injections v .* conj(Y v).
ComplexVector ac_injections(const ComplexMatrix& Y, const ComplexVector& v);

/// Damped Gauss-Newton AC estimator from complex bus injections: flat
/// start, slack phase pinned to zero, Levenberg-Marquardt damping raised on
/// residual increase. Non-convergence is reported through `converged` with
/// the last iterate kept.
EstimationResult psse_ac(const ComplexMatrix& Y, const ComplexVector& z_ac, int slack,
                         const AcEstimatorOptions& options = {});

}  // namespace gridshield
