#include "gridshield/detection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gridshield/error.hpp"
#include "gridshield/parallel.hpp"
#include "gridshield/random.hpp"

namespace gridshield {

double sample_quantile(std::vector<double> sample, double p) {
  if (sample.empty()) throw ConfigError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile level must lie in [0, 1]");
  std::sort(sample.begin(), sample.end());
  const double h = p * static_cast<double>(sample.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sample.size() - 1);
  return sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
}

DetectorThreshold threshold_from_sample(const std::string& detector_id, const std::vector<double>& sample,
                                        double target_pfa, std::uint64_t seed) {
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) throw ConfigError("target pfa must lie in (0, 1)");
  if (sample.size() < 100) throw ConfigError("calibration needs at least 100 null trials");
  const auto [lo, hi] = std::minmax_element(sample.begin(), sample.end());
  if (*lo == *hi) throw ConfigError("degenerate null sample for detector '" + detector_id + "'");
  DetectorThreshold t;
  t.detector_id = detector_id;
  t.gamma = sample_quantile(sample, 1.0 - target_pfa);
  t.target_pfa = target_pfa;
  t.calibration_size = static_cast<int>(sample.size());
  t.seed = seed;
  return t;
}

DetectorThreshold calibrate_threshold(const std::string& detector_id,
                                      const std::function<double(std::uint64_t)>& null_sampler,
                                      double target_pfa, int n_trials, std::uint64_t seed, int workers) {
  if (n_trials < 100) throw ConfigError("calibration needs at least 100 null trials");
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) throw ConfigError("target pfa must lie in (0, 1)");
  std::vector<double> sample(n_trials);
  parallel_for(n_trials, workers, [&](int i) { sample[i] = null_sampler(derive_seed(seed, 0xca11b, i)); });
  return threshold_from_sample(detector_id, sample, target_pfa, seed);
}

Detection detect_bdd(const EstimationResult& estimate, const DetectorThreshold& threshold) {
  if (threshold.detector_id.rfind("bdd", 0) != 0) {
    throw ConfigError("threshold '" + threshold.detector_id + "' does not belong to a BDD detector");
  }
  Detection d;
  d.statistic = estimate.residual_norm * estimate.residual_norm;
  d.alarm = d.statistic > threshold.gamma;
  return d;
}

Detection detect_gsp(const Vector& signal, const SpectralBasis& basis, const FilterSpec& spec,
                     const DetectorThreshold& threshold) {
  Detection d;
  d.statistic = smoothness(basis, spec, signal);
  d.alarm = d.statistic > threshold.gamma;
  return d;
}

std::vector<AcBranch> ac_ensemble(AcEnsembleKind kind, const AcBases& bases) {
  using S = AcBranch::Signal;
  if (kind == AcEnsembleKind::gtv) {
    return {{"gtv_phase", &bases.susceptance, S::phase, FilterSpec::tv()},
            {"gtv_magnitude", &bases.susceptance, S::magnitude_offset, FilterSpec::tv()}};
  }
  const FilterSpec g = FilterSpec::ideal_default(bases.conductance);
  const FilterSpec b = FilterSpec::ideal_default(bases.susceptance);
  return {{"ideal_G_re", &bases.conductance, S::real_part, g},
          {"ideal_G_im", &bases.conductance, S::imag_part, g},
          {"ideal_B_re", &bases.susceptance, S::real_part, b},
          {"ideal_B_im", &bases.susceptance, S::imag_part, b}};
}

Vector ac_branch_signal(const AcBranch& branch, const ComplexVector& v_hat) {
  switch (branch.signal) {
    case AcBranch::Signal::phase: {
      Vector p(v_hat.size());
      for (Eigen::Index i = 0; i < v_hat.size(); ++i) p(i) = std::arg(v_hat(i));
      return p;
    }
    case AcBranch::Signal::magnitude_offset: {
      const Vector m = v_hat.cwiseAbs();
      return m.array() - m(0);
    }
    case AcBranch::Signal::real_part: return v_hat.real();
    case AcBranch::Signal::imag_part: return v_hat.imag();
  }
  return {};
}

std::vector<double> ac_branch_statistics(const std::vector<AcBranch>& branches, const ComplexVector& v_hat) {
  std::vector<double> out;
  out.reserve(branches.size());
  for (const AcBranch& b : branches) out.push_back(smoothness(*b.basis, b.spec, ac_branch_signal(b, v_hat)));
  return out;
}

AcEnsembleDetection detect_ac_ensemble(const std::vector<AcBranch>& branches, const ComplexVector& v_hat,
                                       const std::vector<DetectorThreshold>& thresholds) {
  if (thresholds.size() != branches.size()) throw ConfigError("AC ensemble: uncalibrated branch");
  AcEnsembleDetection d;
  d.statistics = ac_branch_statistics(branches, v_hat);
  for (size_t i = 0; i < branches.size(); ++i) {
    if (d.statistics[i] > thresholds[i].gamma) d.alarm = true;
  }
  return d;
}

std::string thresholds_csv(const std::vector<DetectorThreshold>& thresholds) {
  std::ostringstream os;
  os.precision(17);
  os << "detector_id,gamma,pfa,n,seed\n";
  for (const auto& t : thresholds) {
    os << t.detector_id << ',' << t.gamma << ',' << t.target_pfa << ',' << t.calibration_size << ',' << t.seed
       << '\n';
  }
  return os.str();
}

}  // namespace gridshield
