#include "gridshield/gsp.hpp"

#include <cmath>
#include <sstream>

#include "gridshield/error.hpp"

namespace gridshield {
namespace {

void check_dims(const SpectralBasis& basis, const Vector& s) {
  if (s.size() != basis.size()) {
    throw ConfigError("signal length " + std::to_string(s.size()) + " does not match graph size " +
                      std::to_string(basis.size()));
  }
}

}  // namespace

SpectralBasis eig_sym(const Matrix& laplacian) {
  if (laplacian.rows() != laplacian.cols()) throw ConfigError("eig_sym: matrix is not square");
  const double scale = std::max(1.0, laplacian.cwiseAbs().maxCoeff());
  const double asym = (laplacian - laplacian.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) throw ConfigError("eig_sym: matrix is not symmetric");

  SpectralBasis basis;
  basis.laplacian = 0.5 * (laplacian + laplacian.transpose());
  // Householder tridiagonalization followed by implicit symmetric QR.
  Eigen::SelfAdjointEigenSolver<Matrix> solver(basis.laplacian);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eig_sym: eigensolver did not converge (max |entry| " << scale << ")";
    throw NumericError(os.str());
  }
  basis.eigenvalues = solver.eigenvalues();
  basis.eigenvectors = solver.eigenvectors();
  for (Eigen::Index i = 0; i < basis.eigenvalues.size(); ++i) {
    if (basis.eigenvalues(i) < 0.0 && basis.eigenvalues(i) > -1e-9 * scale) basis.eigenvalues(i) = 0.0;
    auto col = basis.eigenvectors.col(i);
    for (Eigen::Index j = 0; j < col.size(); ++j) {
      if (std::abs(col(j)) > 1e-12) {
        if (col(j) < 0.0) col = -col;
        break;
      }
    }
  }
  return basis;
}

Vector gft(const SpectralBasis& basis, const Vector& s) {
  check_dims(basis, s);
  return basis.eigenvectors.transpose() * s;
}

Vector igft(const SpectralBasis& basis, const Vector& s_hat) {
  check_dims(basis, s_hat);
  return basis.eigenvectors * s_hat;
}

double graph_tv(const Matrix& laplacian, const Vector& s) {
  if (laplacian.rows() != s.size() || laplacian.cols() != s.size()) {
    throw ConfigError("graph_tv: dimension mismatch");
  }
  return std::max(0.0, s.dot(laplacian * s));
}

double graph_tv(const SpectralBasis& basis, const Vector& s) { return graph_tv(basis.laplacian, s); }

FilterSpec FilterSpec::ideal_default(const SpectralBasis& basis) {
  const int n = basis.size();
  if (n == 0) return ideal(0.0);
  const int idx = (n + 1) / 2;  // ceil(N/2), 1-based
  return ideal(basis.eigenvalues(idx - 1));
}

std::string FilterSpec::describe() const {
  if (kind == Kind::tv_sqrt) return "tv_sqrt";
  std::ostringstream os;
  os << "ideal_highpass(cutoff=" << cutoff << ")";
  return os.str();
}

double filter_response(const FilterSpec& spec, double lambda) {
  switch (spec.kind) {
    case FilterSpec::Kind::tv_sqrt: return std::sqrt(std::max(0.0, lambda));
    case FilterSpec::Kind::ideal_highpass: return lambda > spec.cutoff ? 1.0 : 0.0;
  }
  return 0.0;
}

Vector apply_filter(const SpectralBasis& basis, const FilterSpec& spec, const Vector& s) {
  Vector spectrum = gft(basis, s);
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    spectrum(i) *= filter_response(spec, basis.eigenvalues(i));
  }
  return igft(basis, spectrum);
}

double smoothness(const SpectralBasis& basis, const FilterSpec& spec, const Vector& s) {
  // ||U f(Lambda) U^T s||^2 = sum_i f(lambda_i)^2 s_hat_i^2 by orthonormality.
  Vector spectrum = gft(basis, s);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    const double f = filter_response(spec, basis.eigenvalues(i));
    acc += f * f * spectrum(i) * spectrum(i);
  }
  return acc;
}

std::string spectrum_csv(const SpectralBasis& basis) {
  std::ostringstream os;
  os.precision(17);
  os << "index,lambda\n";
  for (int i = 0; i < basis.size(); ++i) os << i + 1 << ',' << basis.eigenvalues(i) << '\n';
  return os.str();
}

std::string signal_csv(const SpectralBasis& basis, const Vector& s) {
  const Vector s_hat = gft(basis, s);
  std::ostringstream os;
  os.precision(17);
  os << "bus,value,gft_value\n";
  for (int i = 0; i < basis.size(); ++i) os << i + 1 << ',' << s(i) << ',' << s_hat(i) << '\n';
  return os.str();
}

double low_frequency_energy(const SpectralBasis& basis, const Vector& s, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("energy fraction must be in (0, 1]");
  const Vector s_hat = gft(basis, s);
  const double total = s_hat.squaredNorm();
  if (total == 0.0) return 0.0;
  const int m = static_cast<int>(std::ceil(fraction * basis.size()));
  return s_hat.head(m).squaredNorm() / total;
}

}  // namespace gridshield
