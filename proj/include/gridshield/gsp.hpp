#pragma once

#include <string>

#include "gridshield/types.hpp"

namespace gridshield {

/// Laplacian eigendecomposition L = U diag(lambda) U^T.
///
/// Eigenvalues are ascending, tiny negative round-off is clamped to zero and
/// each eigenvector is sign-normalized so that its first non-negligible
/// entry is positive.
struct SpectralBasis {
  Matrix laplacian;
  Vector eigenvalues;
  Matrix eigenvectors;

  int size() const { return static_cast<int>(eigenvalues.size()); }
  double lambda_max() const { return eigenvalues.size() ? eigenvalues(eigenvalues.size() - 1) : 0.0; }
};

/// Throws NumericError if the eigensolver fails to converge and ConfigError
/// when the input is not square or asymmetric beyond 1e-12 (relative).
SpectralBasis eig_sym(const Matrix& laplacian);

/// Graph Fourier transform U^T s and its inverse U s.
Vector gft(const SpectralBasis& basis, const Vector& s);
Vector igft(const SpectralBasis& basis, const Vector& s_hat);

/// s^T L s.
double graph_tv(const Matrix& laplacian, const Vector& s);
double graph_tv(const SpectralBasis& basis, const Vector& s);

/// Graph high-pass filter response.
struct FilterSpec {
  enum class Kind { tv_sqrt, ideal_highpass };
  Kind kind = Kind::tv_sqrt;
  /// Ideal filter passes lambda > cutoff.
  double cutoff = 0.0;

  static FilterSpec tv() { return {}; }
  static FilterSpec ideal(double cutoff) { return {Kind::ideal_highpass, cutoff}; }
  /// Ideal filter with cutoff at lambda_{ceil(N/2)} (1-based index).
  static FilterSpec ideal_default(const SpectralBasis& basis);

  std::string describe() const;
};

/// Frequency response f(lambda) for the spec.
double filter_response(const FilterSpec& spec, double lambda);

/// U f(Lambda) U^T s.
Vector apply_filter(const SpectralBasis& basis, const FilterSpec& spec, const Vector& s);

/// ||f(L) s||^2; equals graph_tv for the tv_sqrt filter.
double smoothness(const SpectralBasis& basis, const FilterSpec& spec, const Vector& s);

/// `index,lambda`, 1-based.
std::string spectrum_csv(const SpectralBasis& basis);
/// `bus,value,gft_value`, 1-based. The gft column is indexed by frequency.
std::string signal_csv(const SpectralBasis& basis, const Vector& s);

/// Share of GFT energy in the lowest `fraction` of frequency indices
/// (rounded up). Zero signals give 0.
double low_frequency_energy(const SpectralBasis& basis, const Vector& s, double fraction = 0.25);

}  // namespace gridshield
