#include "gridshield/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gridshield/error.hpp"
#include "gridshield/parallel.hpp"
#include "gridshield/protection.hpp"

namespace gridshield {

namespace {

// Seed streams.
constexpr std::uint64_t kCalibrationStream = 0x10;
constexpr std::uint64_t kTrialStream = 0x20;
constexpr std::uint64_t kRandomAttackStream = 0x30;
constexpr std::uint64_t kNullStream = 0x40;

}  // namespace

std::string to_string(PowerModel model) { return model == PowerModel::dc ? "dc" : "ac"; }

PowerModel parse_power_model(const std::string& text) {
  if (text == "dc" || text == "DC") return PowerModel::dc;
  if (text == "ac" || text == "AC") return PowerModel::ac;
  throw ConfigError("model must be dc or ac, got '" + text + "'");
}

const std::vector<std::string>& dc_detectors() {
  static const std::vector<std::string> ids = {"bdd", "gtv", "ideal"};
  return ids;
}

const std::vector<std::string>& ac_detectors() {
  static const std::vector<std::string> ids = {"bdd_ac", "gtv_ac", "ideal_ac"};
  return ids;
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(noise_var > 0.0)) throw ConfigError("noise variance must be positive");
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) throw ConfigError("pfa must lie in (0, 1)");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(magnitude_std >= 0.0)) throw ConfigError("magnitude spread must be nonnegative");
  if (calibration_trials < 100) throw ConfigError("calibration needs at least 100 trials");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  const auto& allowed = model == PowerModel::dc ? dc_detectors() : ac_detectors();
  for (const auto& d : detectors) {
    if (std::find(allowed.begin(), allowed.end(), d) == allowed.end()) {
      throw ConfigError("detector '" + d + "' is not available for the " + to_string(model) + " model");
    }
  }
}

std::vector<std::string> ExperimentConfig::resolved_detectors() const {
  if (!detectors.empty()) return detectors;
  return model == PowerModel::dc ? dc_detectors() : ac_detectors();
}

Scenario::Scenario(GridCase grid, double noise_var, std::optional<double> lambda_cut)
    : grid_(std::move(grid)),
      basis_(eig_sym(build_laplacian(grid_))),
      estimator_(build_measurement_model(grid_, MeterConfig::full(grid_), noise_var), grid_.slack_bus),
      Y_(build_admittance(grid_)),
      ac_bases_{basis_, eig_sym(build_conductance_laplacian(grid_))},
      ideal_(lambda_cut ? FilterSpec::ideal(*lambda_cut) : FilterSpec::ideal_default(basis_)),
      noise_var_(noise_var) {
  gtv_branches_ = ac_ensemble(AcEnsembleKind::gtv, ac_bases_);
  ideal_branches_ = ac_ensemble(AcEnsembleKind::ideal, ac_bases_);
  if (lambda_cut) {
    for (auto& b : ideal_branches_) b.spec = FilterSpec::ideal(*lambda_cut);
  }
}

int Scenario::branch_count(const std::string& detector) const {
  if (detector == "gtv_ac") return static_cast<int>(gtv_branches_.size());
  if (detector == "ideal_ac") return static_cast<int>(ideal_branches_.size());
  return 1;
}

std::vector<double> Scenario::statistics(const std::string& detector, const EstimationResult& estimate) const {
  if (detector == "bdd" || detector == "bdd_ac") return {estimate.residual_norm * estimate.residual_norm};
  if (detector == "gtv" || detector == "ideal") {
    // Re-centre on the slack phase so the statistic does not depend on the reference.
    const Vector y = estimate.theta.array() - estimate.theta(grid_.slack_bus);
    return {detector == "gtv" ? graph_tv(basis_.laplacian, y) : smoothness(basis_, ideal_, y)};
  }
  if (detector == "gtv_ac") return ac_branch_statistics(gtv_branches_, estimate.v);
  if (detector == "ideal_ac") return ac_branch_statistics(ideal_branches_, estimate.v);
  throw ConfigError("unknown detector '" + detector + "'");
}

Vector gen_smooth_state(const SpectralBasis& basis, double beta, Rng& rng) {
  const int n = basis.size();
  if (n < 2 || !(basis.eigenvalues(1) > 0.0)) throw ConfigError("smooth state: graph is not connected");
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector x = Vector::Zero(n);
  for (int i = 1; i < n; ++i) x(i) = std::sqrt(beta / basis.eigenvalues(i)) * dist(rng);
  return igft(basis, x);
}

Vector gen_smooth_state(const SpectralBasis& basis, double beta, std::uint64_t seed) {
  Rng rng(seed);
  return gen_smooth_state(basis, beta, rng);
}

Vector gen_dc_measurements(const MeasurementModel& model, const Vector& theta, const Vector* attack,
                           double noise_var, Rng& rng) {
  if (theta.size() != model.H.cols()) throw ConfigError("measurements: state length mismatch");
  if (attack && attack->size() != model.H.rows()) throw ConfigError("measurements: attack length mismatch");
  Vector z = model.H * theta;
  if (attack) z += *attack;
  if (noise_var > 0.0) z += std::sqrt(noise_var) * standard_normal(rng, z.size());
  return z;
}

Vector gen_dc_measurements(const MeasurementModel& model, const Vector& theta, const Vector* attack,
                           double noise_var, std::uint64_t seed) {
  Rng rng(seed);
  return gen_dc_measurements(model, theta, attack, noise_var, rng);
}

Vector injection_part(const MeasurementModel& model, const Vector& a) {
  if (a.size() != model.n_meas()) throw ConfigError("attack length mismatch");
  Vector out = Vector::Zero(model.n_state);
  for (int r = 0; r < model.n_meas(); ++r) {
    if (model.rows[r].kind == MeasurementKind::injection) out(model.rows[r].location) += a(r);
  }
  return out;
}

AcSample gen_ac_measurements(const ComplexMatrix& Y, const SpectralBasis& basis, double beta, double noise_var,
                             const Vector* attack_injections, Rng& rng, double magnitude_std) {
  const Eigen::Index n = Y.rows();
  if (basis.size() != n) throw ConfigError("AC measurements: basis size mismatch");
  const Vector phase = gen_smooth_state(basis, beta, rng);
  std::normal_distribution<double> mag(1.0, magnitude_std);
  AcSample s;
  s.v_true.resize(n);
  for (Eigen::Index b = 0; b < n; ++b) s.v_true(b) = std::polar(mag(rng), phase(b));
  s.z = ac_injections(Y, s.v_true);
  if (attack_injections) {
    if (attack_injections->size() != n) throw ConfigError("AC measurements: attack length mismatch");
    s.z.real() += *attack_injections;
  }
  if (noise_var > 0.0) {
    const double sd = std::sqrt(noise_var / 2.0);
    const Vector re = standard_normal(rng, n);
    const Vector im = standard_normal(rng, n);
    for (Eigen::Index b = 0; b < n; ++b) s.z(b) += std::complex<double>(sd * re(b), sd * im(b));
  }
  return s;
}

std::pair<double, double> wilson_interval(int successes, int trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = trials;
  const double p = successes / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

namespace {

// One simulated snapshot followed by estimation.
EstimationResult simulate_trial(const Scenario& sc, const ExperimentConfig& cfg, const Vector* attack,
                                std::uint64_t seed) {
  Rng rng(seed);
  if (cfg.model == PowerModel::dc) {
    const Vector theta = gen_smooth_state(sc.basis(), cfg.beta, rng);
    const Vector z = gen_dc_measurements(sc.model(), theta, attack, cfg.noise_var, rng);
    return sc.estimator().estimate(z);
  }
  Vector inj;
  if (attack) inj = injection_part(sc.model(), *attack);
  const AcSample s = gen_ac_measurements(sc.admittance(), sc.basis(), cfg.beta, cfg.noise_var,
                                         attack ? &inj : nullptr, rng, cfg.magnitude_std);
  return psse_ac(sc.admittance(), s.z, sc.grid().slack_bus);
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Alarm rule shared by every detector: any branch above its threshold.
bool alarm(const std::vector<std::vector<double>>& stats, int trial, const std::vector<double>& gamma) {
  for (size_t b = 0; b < gamma.size(); ++b) {
    if (stats[b][trial] > gamma[b]) return true;
  }
  return false;
}

std::vector<double> gammas(const std::vector<DetectorThreshold>& t) {
  std::vector<double> g;
  for (const auto& x : t) g.push_back(x.gamma);
  return g;
}

}  // namespace

Calibration calibrate(const Scenario& scenario, const ExperimentConfig& config) {
  config.validate();
  const auto detectors = config.resolved_detectors();
  const int n = config.calibration_trials;
  std::vector<std::vector<std::vector<double>>> per_trial(n);
  parallel_for(n, config.workers, [&](int i) {
    const EstimationResult est =
        simulate_trial(scenario, config, nullptr, derive_seed(config.seed, kCalibrationStream, i));
    for (const auto& d : detectors) per_trial[i].push_back(scenario.statistics(d, est));
  });
  Calibration cal;
  cal.target_pfa = config.target_pfa;
  for (size_t d = 0; d < detectors.size(); ++d) {
    const int branches = scenario.branch_count(detectors[d]);
    auto& sample = cal.null_statistics[detectors[d]];
    sample.assign(branches, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < branches; ++b) sample[b][i] = per_trial[i][d][b];
    }
  }
  for (const auto& d : detectors) {
    std::vector<DetectorThreshold> t;
    const auto& sample = cal.null_statistics[d];
    for (size_t b = 0; b < sample.size(); ++b) {
      // Bonferroni split keeps the ensemble false-alarm rate at or below pfa.
      const double pfa = config.target_pfa / static_cast<double>(sample.size());
      std::string id = sample.size() > 1 ? d + "/" + std::to_string(b) : d;
      t.push_back(threshold_from_sample(id, sample[b], pfa, config.seed));
    }
    cal.thresholds[d] = std::move(t);
  }
  return cal;
}

std::vector<DetectorThreshold> thresholds_at(const Calibration& calibration, const std::string& detector,
                                             double pfa) {
  const auto it = calibration.null_statistics.find(detector);
  if (it == calibration.null_statistics.end()) throw ConfigError("detector '" + detector + "' is not calibrated");
  std::vector<DetectorThreshold> out;
  for (size_t b = 0; b < it->second.size(); ++b) {
    std::vector<double> sorted = it->second[b];
    std::sort(sorted.begin(), sorted.end());
    DetectorThreshold t;
    t.detector_id = detector;
    t.target_pfa = pfa;
    t.calibration_size = static_cast<int>(sorted.size());
    const double q = pfa / static_cast<double>(it->second.size());
    t.gamma = q >= 1.0 ? -std::numeric_limits<double>::infinity()
              : q <= 0.0 ? sorted.back()
                         : quantile_sorted(sorted, 1.0 - q);
    out.push_back(t);
  }
  return out;
}

const DetectionOutcome& DetectionStats::at(const std::string& attack, const std::string& detector) const {
  for (const auto& o : outcomes) {
    if (o.attack == attack && o.detector == detector) return o;
  }
  throw ConfigError("no outcome for attack '" + attack + "' and detector '" + detector + "'");
}

DetectionStats run_monte_carlo(const Scenario& scenario, const ExperimentConfig& config,
                               const Calibration* calibration) {
  config.validate();
  const int n = scenario.grid().n_bus;
  if (config.k >= n) throw ConfigError("k must be smaller than the number of buses");
  for (int b : config.secured) {
    if (b < 0 || b >= n) throw ConfigError("secured bus out of range");
  }
  Calibration local;
  if (!calibration) {
    local = calibrate(scenario, config);
    calibration = &local;
  }
  const auto detectors = config.resolved_detectors();
  std::map<std::string, std::vector<double>> gamma;
  DetectionStats stats;
  stats.config = config;
  for (const auto& d : detectors) {
    const auto t = thresholds_at(*calibration, d, config.target_pfa);
    gamma[d] = gammas(t);
    stats.thresholds.insert(stats.thresholds.end(), t.begin(), t.end());
  }

  const std::vector<int> S = derive_secured_rows(config.secured, scenario.model(), scenario.grid()).rows;
  const AttackSetting setting{scenario.laplacian(), scenario.model().H, S};
  GfdiOptions gopt;
  gopt.l1_budget = config.l1_budget;
  gopt.workers = config.workers;
  std::optional<AttackVector> gfdi;
  bool gfdi_done = false;
  auto get_gfdi = [&]() -> const std::optional<AttackVector>& {
    if (!gfdi_done) {
      gfdi = gfdi_attack(setting, config.k, config.tau, gopt).attack;
      gfdi_done = true;
    }
    return gfdi;
  };

  std::vector<std::string> labels;
  if (config.include_null) labels.push_back("none");
  for (AttackKind k : config.attacks) labels.push_back(to_string(k));

  for (size_t li = 0; li < labels.size(); ++li) {
    const std::string& label = labels[li];
    std::optional<AttackVector> fixed;
    bool randomized = false;
    bool infeasible = false;
    if (label != "none") {
      const AttackKind kind = parse_attack_kind(label);
      switch (kind) {
        case AttackKind::gfdi:
          fixed = get_gfdi();
          infeasible = !fixed;
          break;
        case AttackKind::rand: randomized = true; break;
        case AttackKind::rand_gfdi:
          randomized = true;
          infeasible = !get_gfdi();
          break;
        case AttackKind::sparse_low:
        case AttackKind::sparse_avg:
          try {
            fixed = attack_sparsest(setting, config.tau,
                                    kind == AttackKind::sparse_low ? SparseVariant::low : SparseVariant::avg);
          } catch (const InfeasibleError&) {
            infeasible = true;
          }
          break;
      }
    }

    for (const auto& d : detectors) {
      DetectionOutcome o;
      o.attack = label;
      o.detector = d;
      o.trials = config.trials;
      o.infeasible = infeasible;
      stats.outcomes.push_back(std::move(o));
    }
    const size_t first = stats.outcomes.size() - detectors.size();
    if (infeasible) {
      for (size_t j = first; j < stats.outcomes.size(); ++j) {
        auto& o = stats.outcomes[j];
        o.alarms = o.trials;
        o.pd = 1.0;
        std::tie(o.ci_lo, o.ci_hi) = wilson_interval(o.alarms, o.trials);
        o.attack_tv = std::numeric_limits<double>::infinity();
      }
      continue;
    }

    const std::uint64_t trial_stream = label == "none" ? kNullStream : kTrialStream;
    std::vector<std::vector<std::vector<double>>> per_trial(config.trials);
    std::vector<double> tvs(config.trials, fixed ? fixed->tv : 0.0);
    parallel_for(config.trials, config.workers, [&](int i) {
      const Vector* a = nullptr;
      AttackVector drawn;
      if (fixed) {
        a = &fixed->a;
      } else if (randomized) {
        const std::uint64_t s = derive_seed(config.seed, kRandomAttackStream + li, i);
        drawn = label == "rand" ? attack_rand(setting, config.k, config.tau, s) : attack_rand_gfdi(setting, *gfdi, s);
        a = &drawn.a;
        tvs[i] = drawn.tv;
      }
      // Matched state and noise across attack kinds.
      const EstimationResult est = simulate_trial(scenario, config, a, derive_seed(config.seed, trial_stream, i));
      for (const auto& d : detectors) per_trial[i].push_back(scenario.statistics(d, est));
    });
    std::sort(tvs.begin(), tvs.end());
    const double median_tv = quantile_sorted(tvs, 0.5);
    for (size_t dj = 0; dj < detectors.size(); ++dj) {
      auto& o = stats.outcomes[first + dj];
      const int branches = scenario.branch_count(o.detector);
      o.statistics.assign(branches, std::vector<double>(config.trials));
      for (int i = 0; i < config.trials; ++i) {
        for (int b = 0; b < branches; ++b) o.statistics[b][i] = per_trial[i][dj][b];
      }
      for (int i = 0; i < config.trials; ++i) o.alarms += alarm(o.statistics, i, gamma[o.detector]);
      o.pd = static_cast<double>(o.alarms) / o.trials;
      std::tie(o.ci_lo, o.ci_hi) = wilson_interval(o.alarms, o.trials);
      o.attack_tv = median_tv;
    }
  }
  return stats;
}

std::vector<RocPoint> roc_curve(const Calibration& calibration, const DetectionOutcome& outcome,
                                std::vector<double> pfa_grid) {
  pfa_grid.push_back(0.0);
  pfa_grid.push_back(1.0);
  std::sort(pfa_grid.begin(), pfa_grid.end());
  pfa_grid.erase(std::unique(pfa_grid.begin(), pfa_grid.end()), pfa_grid.end());
  std::vector<RocPoint> out;
  for (double pfa : pfa_grid) {
    if (pfa < 0.0 || pfa > 1.0) throw ConfigError("ROC pfa values must lie in [0, 1]");
    if (outcome.infeasible || pfa >= 1.0) {
      out.push_back({pfa, 1.0});
      continue;
    }
    const std::vector<double> g = gammas(thresholds_at(calibration, outcome.detector, pfa));
    int alarms = 0;
    for (int i = 0; i < outcome.trials; ++i) alarms += alarm(outcome.statistics, i, g);
    out.push_back({pfa, static_cast<double>(alarms) / outcome.trials});
  }
  // Thresholds fall as pfa grows, so pd is non-decreasing by construction.
  return out;
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "tau") return SweepAxis::tau;
  if (text == "pfa") return SweepAxis::pfa;
  if (text == "protection_ratio" || text == "protection") return SweepAxis::protection_ratio;
  throw ConfigError("unknown sweep axis '" + text + "'");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::tau: return "tau";
    case SweepAxis::pfa: return "pfa";
    case SweepAxis::protection_ratio: return "protection_ratio";
  }
  return "unknown";
}

ProtectionPolicy parse_protection_policy(const std::string& text) {
  if (text == "greedy" || text == "gsp") return ProtectionPolicy::greedy;
  if (text == "random") return ProtectionPolicy::random;
  if (text == "sparsest") return ProtectionPolicy::sparsest;
  throw ConfigError("unknown protection policy '" + text + "'");
}

std::string to_string(ProtectionPolicy policy) {
  switch (policy) {
    case ProtectionPolicy::greedy: return "greedy";
    case ProtectionPolicy::random: return "random";
    case ProtectionPolicy::sparsest: return "sparsest";
  }
  return "unknown";
}

std::vector<SweepRow> sweep(const Scenario& scenario, const ExperimentConfig& config, SweepAxis axis,
                            const std::vector<double>& grid, const SweepOptions& options) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  config.validate();
  const Calibration cal = calibrate(scenario, config);
  std::vector<SweepRow> rows;
  auto collect = [&](double value, int secured, const DetectionStats& st) {
    for (const auto& o : st.outcomes) {
      SweepRow r;
      r.value = value;
      r.secured = secured;
      r.outcome = o;
      r.outcome.statistics.clear();
      rows.push_back(std::move(r));
    }
  };

  if (axis == SweepAxis::tau) {
    for (double tau : grid) {
      ExperimentConfig c = config;
      c.tau = tau;
      collect(tau, static_cast<int>(config.secured.size()), run_monte_carlo(scenario, c, &cal));
    }
  } else if (axis == SweepAxis::pfa) {
    const DetectionStats st = run_monte_carlo(scenario, config, &cal);
    for (double pfa : grid) {
      for (const auto& o : st.outcomes) {
        const auto roc = roc_curve(cal, o, {pfa});
        SweepRow r;
        r.value = pfa;
        r.secured = static_cast<int>(config.secured.size());
        r.outcome = o;
        r.outcome.statistics.clear();
        for (const auto& p : roc) {
          if (p.pfa == pfa) r.outcome.pd = p.pd;
        }
        r.outcome.alarms = static_cast<int>(std::lround(r.outcome.pd * o.trials));
        std::tie(r.outcome.ci_lo, r.outcome.ci_hi) = wilson_interval(r.outcome.alarms, o.trials);
        rows.push_back(std::move(r));
      }
    }
  } else {
    const int n = scenario.grid().n_bus;
    std::vector<int> sizes;
    for (double r : grid) {
      if (r < 0.0 || r > 1.0) throw ConfigError("protection ratios must lie in [0, 1]");
      sizes.push_back(static_cast<int>(std::lround(r * n)));
    }
    const int max_size = *std::max_element(sizes.begin(), sizes.end());
    const ProtectionProblem problem{scenario.grid(), scenario.model(), scenario.laplacian(), config.k, config.tau};
    ProtectionPlan plan;
    switch (options.policy) {
      case ProtectionPolicy::greedy: {
        GfdiOptions g;
        g.l1_budget = config.l1_budget;
        g.workers = config.workers;
        plan = protect_greedy(problem, std::numeric_limits<double>::infinity(), max_size, g);
        break;
      }
      case ProtectionPolicy::random: plan = protect_random(problem, max_size, options.policy_seed); break;
      case ProtectionPolicy::sparsest: plan = protect_sparsest_baseline(problem, max_size); break;
    }
    for (size_t j = 0; j < grid.size(); ++j) {
      ExperimentConfig c = config;
      c.secured = plan.prefix(sizes[j]);
      // A plan that stopped early has already removed every attack.
      collect(grid[j], static_cast<int>(c.secured.size()), run_monte_carlo(scenario, c, &cal));
    }
  }
  return rows;
}

namespace {

void write_outcome(std::ostream& os, const DetectionOutcome& o, double pfa, std::uint64_t seed) {
  os << o.attack << ',' << o.detector << ',' << pfa << ',' << o.pd << ',' << o.ci_lo << ',' << o.ci_hi << ','
     << o.trials << ',' << seed << '\n';
}

}  // namespace

std::string stats_csv(const DetectionStats& stats) {
  std::ostringstream os;
  os.precision(10);
  os << "attack,detector,pfa,pd,ci_lo,ci_hi,trials,seed\n";
  for (const auto& o : stats.outcomes) write_outcome(os, o, stats.config.target_pfa, stats.config.seed);
  return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows, SweepAxis axis, const ExperimentConfig& config) {
  std::ostringstream os;
  os.precision(10);
  os << to_string(axis) << ",secured,attack_tv,attack,detector,pfa,pd,ci_lo,ci_hi,trials,seed\n";
  for (const auto& r : rows) {
    os << r.value << ',' << r.secured << ',';
    if (std::isinf(r.outcome.attack_tv)) {
      os << "inf";
    } else {
      os << r.outcome.attack_tv;
    }
    os << ',';
    write_outcome(os, r.outcome, axis == SweepAxis::pfa ? r.value : config.target_pfa, config.seed);
  }
  return os.str();
}

}  // namespace gridshield
