#include "gridshield/grid_model.hpp"

#include <algorithm>
#include <complex>
#include <sstream>

#include "gridshield/error.hpp"

namespace gridshield {
namespace {

Matrix weighted_laplacian(const GridCase& grid, double Branch::*weight) {
  Matrix L = Matrix::Zero(grid.n_bus, grid.n_bus);
  for (const Branch& br : grid.branches) {
    const double w = br.*weight;
    L(br.from, br.from) += w;
    L(br.to, br.to) += w;
    L(br.from, br.to) -= w;
    L(br.to, br.from) -= w;
  }
  return L;
}

}  // namespace

Matrix build_laplacian(const GridCase& grid) { return weighted_laplacian(grid, &Branch::susceptance); }

Matrix build_conductance_laplacian(const GridCase& grid) {
  return weighted_laplacian(grid, &Branch::conductance);
}

ComplexMatrix build_admittance(const GridCase& grid) {
  ComplexMatrix Y(grid.n_bus, grid.n_bus);
  Y.real() = build_conductance_laplacian(grid);
  Y.imag() = -build_laplacian(grid);
  return Y;
}

MeterConfig MeterConfig::full(const GridCase& grid) {
  MeterConfig cfg = injections_only(grid);
  cfg.flow_branches.resize(grid.branches.size());
  for (size_t i = 0; i < grid.branches.size(); ++i) cfg.flow_branches[i] = static_cast<int>(i);
  return cfg;
}

MeterConfig MeterConfig::injections_only(const GridCase& grid) {
  MeterConfig cfg;
  cfg.injection_buses.resize(grid.n_bus);
  for (int b = 0; b < grid.n_bus; ++b) cfg.injection_buses[b] = b;
  return cfg;
}

int matrix_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(rel_tol);
  return static_cast<int>(qr.rank());
}

MeasurementModel build_measurement_model(const GridCase& grid, const MeterConfig& meters,
                                         double noise_var) {
  if (!(noise_var > 0.0)) throw ConfigError("noise variance must be positive");
  const int n = grid.n_bus;
  const int m = static_cast<int>(meters.injection_buses.size() + meters.flow_branches.size());
  MeasurementModel model;
  model.n_state = n;
  model.H = Matrix::Zero(m, n);
  model.rows.reserve(m);
  model.noise_var = Vector::Constant(m, noise_var);

  const Matrix B = build_laplacian(grid);
  int r = 0;
  for (int bus : meters.injection_buses) {
    if (bus < 0 || bus >= n) throw ConfigError("injection meter at invalid bus");
    model.H.row(r++) = B.row(bus);
    model.rows.push_back({MeasurementKind::injection, bus});
  }
  for (int idx : meters.flow_branches) {
    if (idx < 0 || idx >= static_cast<int>(grid.branches.size())) {
      throw ConfigError("flow meter on invalid branch");
    }
    const Branch& br = grid.branches[idx];
    model.H(r, br.from) = br.susceptance;
    model.H(r, br.to) = -br.susceptance;
    ++r;
    model.rows.push_back({MeasurementKind::flow, idx});
  }
  if (matrix_rank(model.H) < n - 1) {
    throw ConfigError("meter configuration is unobservable: rank(H) < N-1");
  }
  return model;
}

SecuredSets derive_secured_rows(std::span<const int> buses, const MeasurementModel& model,
                                const GridCase& grid) {
  SecuredSets out;
  std::vector<char> secured(grid.n_bus, 0);
  for (int b : buses) {
    if (b < 0 || b >= grid.n_bus) throw ConfigError("secured bus out of range");
    if (!secured[b]) out.buses.push_back(b);
    secured[b] = 1;
  }
  for (int r = 0; r < model.n_meas(); ++r) {
    const MeasurementTag& tag = model.rows[r];
    bool hit = false;
    if (tag.kind == MeasurementKind::injection) {
      hit = secured[tag.location];
    } else {
      const Branch& br = grid.branches[tag.location];
      hit = secured[br.from] || secured[br.to];
    }
    if (hit) out.rows.push_back(r);
  }
  return out;
}

std::string registry_csv(const MeasurementModel& model) {
  std::ostringstream os;
  os << "row,kind,location\n";
  for (int r = 0; r < model.n_meas(); ++r) {
    const auto& tag = model.rows[r];
    os << r + 1 << ',' << (tag.kind == MeasurementKind::flow ? "flow" : "injection") << ','
       << tag.location + 1 << '\n';
  }
  return os.str();
}

}  // namespace gridshield
