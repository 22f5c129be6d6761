#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gridshield/estimation.hpp"
#include "gridshield/gsp.hpp"
#include "gridshield/types.hpp"

namespace gridshield {

/// Alarm threshold gamma, the empirical (1 - pfa) quantile of a null sample.
struct DetectorThreshold {
  std::string detector_id;
  double gamma = 0.0;
  double target_pfa = 0.05;
  int calibration_size = 0;
  std::uint64_t seed = 0;
};

struct Detection {
  double statistic = 0.0;
  bool alarm = false;
};

/// Type-7 sample quantile (linear interpolation between order statistics).
double sample_quantile(std::vector<double> sample, double p);

/// Draws `n_trials` null statistics with per-trial seeds derived from `seed`
/// and returns their (1 - target_pfa) quantile. Throws ConfigError on
/// n_trials < 100, pfa outside (0, 1) or an all-equal sample.
DetectorThreshold calibrate_threshold(const std::string& detector_id,
                                      const std::function<double(std::uint64_t)>& null_sampler,
                                      double target_pfa, int n_trials = 10000, std::uint64_t seed = 0,
                                      int workers = 1);

/// Same as calibrate_threshold on an already drawn null sample.
DetectorThreshold threshold_from_sample(const std::string& detector_id, const std::vector<double>& sample,
                                        double target_pfa, std::uint64_t seed = 0);

/// Squared residual norm of the estimate. The threshold id must name a BDD
/// detector ("bdd..."), otherwise ConfigError.
Detection detect_bdd(const EstimationResult& estimate, const DetectorThreshold& threshold);

/// smoothness(basis, spec, signal) against gamma.
Detection detect_gsp(const Vector& signal, const SpectralBasis& basis, const FilterSpec& spec,
                     const DetectorThreshold& threshold);

/// One (graph, signal, filter) pair of an AC detector ensemble.
struct AcBranch {
  enum class Signal { phase, magnitude_offset, real_part, imag_part };
  std::string name;
  const SpectralBasis* basis = nullptr;
  Signal signal = Signal::phase;
  FilterSpec spec;
};

enum class AcEnsembleKind { gtv, ideal };

/// Bases needed by the AC ensembles.
struct AcBases {
  SpectralBasis susceptance;   // B = -Im{Y}
  SpectralBasis conductance;   // Re{Y}
};

/// GTV: phases and |v| - |v_1| on B with the TV filter. Ideal: Re/Im of v
/// on Re{Y} and -Im{Y} with the default ideal cutoff of each basis.
std::vector<AcBranch> ac_ensemble(AcEnsembleKind kind, const AcBases& bases);

Vector ac_branch_signal(const AcBranch& branch, const ComplexVector& v_hat);

std::vector<double> ac_branch_statistics(const std::vector<AcBranch>& branches, const ComplexVector& v_hat);

struct AcEnsembleDetection {
  bool alarm = false;
  std::vector<double> statistics;
};

/// Alarm when any branch statistic exceeds its own threshold. Throws
/// ConfigError when the number of thresholds differs from the branches.
AcEnsembleDetection detect_ac_ensemble(const std::vector<AcBranch>& branches, const ComplexVector& v_hat,
                                       const std::vector<DetectorThreshold>& thresholds);

/// `detector_id,gamma,pfa,n,seed` rows.
std::string thresholds_csv(const std::vector<DetectorThreshold>& thresholds);

}  // namespace gridshield
