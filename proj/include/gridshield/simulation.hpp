#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridshield/attacks.hpp"
#include "gridshield/detection.hpp"
#include "gridshield/estimation.hpp"
#include "gridshield/grid_model.hpp"
#include "gridshield/gsp.hpp"
#include "gridshield/random.hpp"

namespace gridshield {

enum class PowerModel { dc, ac };
std::string to_string(PowerModel model);
PowerModel parse_power_model(const std::string& text);

/// DC detectors: "bdd", "gtv", "ideal". AC detectors: "bdd_ac", "gtv_ac",
/// "ideal_ac". The AC GSP detectors are OR-ensembles.
const std::vector<std::string>& dc_detectors();
const std::vector<std::string>& ac_detectors();

struct ExperimentConfig {
  std::string case_name = "ieee57";
  PowerModel model = PowerModel::dc;
  double tau = 0.2;
  int k = 5;
  double beta = 0.05;
  double noise_var = 1e-3;
  /// Standard deviation of AC voltage magnitudes around 1.
  double magnitude_std = 0.01;
  double target_pfa = 0.05;
  int trials = 1000;
  std::uint64_t seed = 1;
  std::vector<AttackKind> attacks = all_attack_kinds();
  /// Empty means every detector of the model.
  std::vector<std::string> detectors;
  /// Secured buses D (0-based).
  std::vector<int> secured;
  std::optional<double> lambda_cut;
  std::optional<double> l1_budget;
  /// Null trials used to calibrate thresholds.
  int calibration_trials = 10000;
  /// Also run unattacked trials as an "attack" named none.
  bool include_null = false;
  int workers = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  std::vector<std::string> resolved_detectors() const;
};

/// Everything derived from the network once: Laplacian, spectrum, DC model
/// and estimator, admittance and the AC detector bases.
class Scenario {
 public:
  Scenario(GridCase grid, double noise_var, std::optional<double> lambda_cut = std::nullopt);
  // The AC ensembles point into this object.
  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;

  const GridCase& grid() const { return grid_; }
  const Matrix& laplacian() const { return basis_.laplacian; }
  const SpectralBasis& basis() const { return basis_; }
  const MeasurementModel& model() const { return estimator_.model(); }
  const DcEstimator& estimator() const { return estimator_; }
  const ComplexMatrix& admittance() const { return Y_; }
  const AcBases& ac_bases() const { return ac_bases_; }
  const FilterSpec& ideal_spec() const { return ideal_; }
  double noise_var() const { return noise_var_; }

  /// Detector branches: one for scalar detectors, several for ensembles.
  int branch_count(const std::string& detector) const;
  /// Per-branch statistics of one detector for a DC or AC estimate.
  std::vector<double> statistics(const std::string& detector, const EstimationResult& estimate) const;

 private:
  GridCase grid_;
  SpectralBasis basis_;
  DcEstimator estimator_;
  ComplexMatrix Y_;
  AcBases ac_bases_;
  FilterSpec ideal_;
  std::vector<AcBranch> gtv_branches_;
  std::vector<AcBranch> ideal_branches_;
  double noise_var_;
};

/// x_1 = 0, x_i ~ N(0, beta / lambda_i), theta = U x. Throws ConfigError
/// when lambda_2 is zero (disconnected graph).
Vector gen_smooth_state(const SpectralBasis& basis, double beta, Rng& rng);
Vector gen_smooth_state(const SpectralBasis& basis, double beta, std::uint64_t seed);

/// z = H theta + a + nu with nu ~ N(0, noise_var I).
Vector gen_dc_measurements(const MeasurementModel& model, const Vector& theta, const Vector* attack,
                           double noise_var, Rng& rng);
Vector gen_dc_measurements(const MeasurementModel& model, const Vector& theta, const Vector* attack,
                           double noise_var, std::uint64_t seed);

struct AcSample {
  ComplexVector v_true;
  ComplexVector z;
};

/// Injection-row part of a DC attack vector, indexed by bus.
Vector injection_part(const MeasurementModel& model, const Vector& a);

/// Smooth phases, magnitudes ~ N(1, magnitude_std^2), z = v conj(Y v) +
/// a_inj + e with circularly symmetric complex noise of total variance
/// noise_var.
AcSample gen_ac_measurements(const ComplexMatrix& Y, const SpectralBasis& basis, double beta, double noise_var,
                             const Vector* attack_injections, Rng& rng, double magnitude_std = 0.01);

/// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(int successes, int trials, double z = 1.959963984540054);

/// Null statistics and thresholds for every requested detector.
struct Calibration {
  double target_pfa = 0.05;
  /// detector -> [branch][trial] null statistics.
  std::map<std::string, std::vector<std::vector<double>>> null_statistics;
  /// detector -> per-branch thresholds at pfa / branches.
  std::map<std::string, std::vector<DetectorThreshold>> thresholds;
};

Calibration calibrate(const Scenario& scenario, const ExperimentConfig& config);

/// Re-thresholds an existing calibration at a different pfa.
std::vector<DetectorThreshold> thresholds_at(const Calibration& calibration, const std::string& detector,
                                             double pfa);

struct DetectionOutcome {
  std::string attack;
  std::string detector;
  int alarms = 0;
  int trials = 0;
  double pd = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  /// No attack exists under the secured set; counted as detected.
  bool infeasible = false;
  /// Graph TV of the (deterministic) attack, or the median for random kinds.
  double attack_tv = 0.0;
  /// [branch][trial] statistics under attack.
  std::vector<std::vector<double>> statistics;
};

struct RocPoint {
  double pfa = 0.0;
  double pd = 0.0;
};

struct DetectionStats {
  ExperimentConfig config;
  std::vector<DetectionOutcome> outcomes;
  std::vector<DetectorThreshold> thresholds;

  const DetectionOutcome& at(const std::string& attack, const std::string& detector) const;
};

/// Monte-Carlo detection experiment. Calibrates inline unless a calibration
/// is supplied. Results depend only on (config, seed), not on workers.
DetectionStats run_monte_carlo(const Scenario& scenario, const ExperimentConfig& config,
                               const Calibration* calibration = nullptr);

/// ROC by re-thresholding the stored samples; the grid gets the (0, .) and
/// (1, 1) endpoints added and the output is sorted by pfa.
std::vector<RocPoint> roc_curve(const Calibration& calibration, const DetectionOutcome& outcome,
                                std::vector<double> pfa_grid);

enum class SweepAxis { tau, pfa, protection_ratio };
SweepAxis parse_sweep_axis(const std::string& text);
std::string to_string(SweepAxis axis);

enum class ProtectionPolicy { greedy, random, sparsest };
ProtectionPolicy parse_protection_policy(const std::string& text);
std::string to_string(ProtectionPolicy policy);

struct SweepRow {
  double value = 0.0;
  /// Secured buses for protection sweeps.
  int secured = 0;
  DetectionOutcome outcome;
};

struct SweepOptions {
  ProtectionPolicy policy = ProtectionPolicy::greedy;
  /// Seed for the random policy.
  std::uint64_t policy_seed = 0;
};

/// Re-runs the experiment along one axis. Throws ConfigError on an empty
/// grid. Protection ratios r map to |D| = round(r N) on nested plans.
std::vector<SweepRow> sweep(const Scenario& scenario, const ExperimentConfig& config, SweepAxis axis,
                            const std::vector<double>& grid, const SweepOptions& options = {});

/// `attack,detector,pfa,pd,ci_lo,ci_hi,trials,seed` rows.
std::string stats_csv(const DetectionStats& stats);
/// Same columns preceded by the axis value, the secured count and the attack TV.
std::string sweep_csv(const std::vector<SweepRow>& rows, SweepAxis axis, const ExperimentConfig& config);

}  // namespace gridshield
