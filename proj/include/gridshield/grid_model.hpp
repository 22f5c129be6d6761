#pragma once

#include <span>
#include <string>
#include <vector>

#include "gridshield/case_io.hpp"
#include "gridshield/types.hpp"

namespace gridshield {

/// Weighted Laplacian with weights equal to branch susceptances. This is the
/// nodal admittance matrix B of the DC model.
Matrix build_laplacian(const GridCase& grid);

/// Laplacian weighted by branch conductances (Re{Y}).
Matrix build_conductance_laplacian(const GridCase& grid);

/// Complex bus admittance Y = G - jB built from series branch admittances,
/// so that Re{Y} and -Im{Y} are both graph Laplacians.
ComplexMatrix build_admittance(const GridCase& grid);

enum class MeasurementKind { flow, injection };

struct MeasurementTag {
  MeasurementKind kind = MeasurementKind::injection;
  /// Bus index for injections, branch index for flows (0-based).
  int location = 0;

  friend bool operator==(const MeasurementTag&, const MeasurementTag&) = default;
};

/// Which meters exist. Flow meters are measured at the branch "from" end.
struct MeterConfig {
  std::vector<int> injection_buses;
  std::vector<int> flow_branches;

  /// All injections plus one flow meter per branch.
  static MeterConfig full(const GridCase& grid);
  static MeterConfig injections_only(const GridCase& grid);
};

/// Linear DC measurement model z = H theta + a + noise.
///
/// Rows are ordered as listed in the MeterConfig: injections first, then
/// flows. Every row of H sums to zero.
struct MeasurementModel {
  Matrix H;
  std::vector<MeasurementTag> rows;
  /// Diagonal of the noise covariance R.
  Vector noise_var;
  int n_state = 0;

  int n_meas() const { return static_cast<int>(rows.size()); }
};

/// Assembles H row by row. Throws ConfigError when rank(H) < N-1.
MeasurementModel build_measurement_model(const GridCase& grid, const MeterConfig& meters,
                                         double noise_var);

/// Numerical rank with a relative threshold.
int matrix_rank(const Matrix& m, double rel_tol = 1e-10);

/// Secured buses D and the measurement rows S they induce.
struct SecuredSets {
  std::vector<int> buses;
  std::vector<int> rows;
};

/// S = injection rows at buses in D plus flow rows on branches with at
/// least one endpoint in D. Rows are returned sorted.
SecuredSets derive_secured_rows(std::span<const int> buses, const MeasurementModel& model,
                                const GridCase& grid);

/// `row,kind,location` with 1-based row and location numbers.
std::string registry_csv(const MeasurementModel& model);

}  // namespace gridshield
