// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gridshield/attacks.hpp"
#include "gridshield/error.hpp"
#include "gridshield/protection.hpp"
#include "gridshield/simulation.hpp"
#include "gridshield/solvers.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gridshield;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix rows_of(const Matrix& H, const std::vector<int>& S) {
  Matrix out(S.size(), H.cols());
  for (size_t r = 0; r < S.size(); ++r) out.row(r) = H.row(S[r]);
  return out;
}

// ---------------------------------------------------------------------------

Verdict solvers() {
  Rng rng(1001);
  double qp_err = 0.0;
  int qp_fail = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = std::uniform_int_distribution<int>(2, 20)(rng);
    const int m = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const Matrix M = standard_normal(rng, n * n).reshaped(n, n);
    const Matrix Q = M * M.transpose() + 0.1 * Matrix::Identity(n, n);
    const Vector q = standard_normal(rng, n);
    const Matrix A = standard_normal(rng, m * n).reshaped(m, n);
    const Vector b = standard_normal(rng, m);
    const Vector ref = testing::kkt_oracle(Q, q, A, b);
    const QPSolution s = solve_qp({Q, q, A, b, Matrix(0, n), Vector(0)});
    if (s.status != QPStatus::optimal) {
      ++qp_fail;
      continue;
    }
    qp_err = std::max(qp_err, (s.x - ref).cwiseAbs().maxCoeff());
  }
  double lp_err = 0.0;
  int lp_fail = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 5)(rng);
    const int mi = std::uniform_int_distribution<int>(1, 5)(rng);
    const int me = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const Vector x0 = standard_normal(rng, n).cwiseAbs();
    Matrix Ai(mi + n, n);
    Ai << standard_normal(rng, mi * n).reshaped(mi, n), Matrix::Identity(n, n);
    Vector bi = Ai * x0;
    bi.head(mi) += standard_normal(rng, mi).cwiseAbs();
    bi.tail(n) = Vector::Constant(n, 10.0);
    const Matrix Ae = standard_normal(rng, me * n).reshaped(me, n);
    const Vector be = Ae * x0;
    const Vector cost = standard_normal(rng, n);
    const auto ref = testing::lp_vertex_oracle(cost, Ae, be, Ai, bi);
    const LPResult r = solve_lp(cost, Ae, be, Ai, bi);
    if (!ref || r.status != LPStatus::optimal) {
      ++lp_fail;
      continue;
    }
    lp_err = std::max(lp_err, std::abs(r.objective - *ref));
  }
  return {qp_fail == 0 && lp_fail == 0 && qp_err <= 1e-6 && lp_err <= 1e-9,
          "QP max err " + fmt(qp_err) + " (" + std::to_string(qp_fail) + " failures), LP max err " + fmt(lp_err) +
              " (" + std::to_string(lp_fail) + " failures)"};
}

/// Shared instances for the equivalence and relaxation criteria.
struct SmallInstance {
  GridCase grid;
  int k = 1;
  double tau = 0.0;
  std::vector<int> D;
};

std::vector<SmallInstance> small_instances() {
  Rng rng(1002);
  std::vector<SmallInstance> out;
  for (int t = 0; t < 50; ++t) {
    SmallInstance s;
    const int n = 4 + t % 5;
    s.grid = testing::random_connected(rng, n);
    s.k = std::uniform_int_distribution<int>(1, std::min(4, n - 1))(rng);
    s.tau = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    s.D = testing::random_subset(rng, n, std::uniform_int_distribution<int>(0, n / 2)(rng));
    out.push_back(std::move(s));
  }
  return out;
}

Verdict per_index_equivalence() {
  double worst = 0.0;
  int mismatched = 0, infeasible = 0;
  for (const SmallInstance& s : small_instances()) {
    const testing::Fixture f(s.grid);
    const auto S = f.rows_for(s.D);
    const auto oracle = gfdi_oracle({f.L, f.model.H, S}, s.k, s.tau);
    const auto brute = testing::smoothest_bruteforce(f.L, rows_of(f.model.H, S), s.k, s.tau);
    if (oracle.has_value() != brute.has_value()) {
      ++mismatched;
      continue;
    }
    if (!brute) {
      ++infeasible;
      continue;
    }
    worst = std::max(worst, std::abs(oracle->tv - *brute));
  }
  return {mismatched == 0 && worst <= 1e-8, "max |TV difference| " + fmt(worst) + " over 50 graphs, " +
                                                 std::to_string(infeasible) + " jointly infeasible, " +
                                                 std::to_string(mismatched) + " feasibility mismatches"};
}

Verdict relaxation_quality() {
  // Same graphs, no secured meters, k uniform on 1..N-1.
  Rng rng(1003);
  int below = 0, equal = 0, infeasible = 0;
  const auto instances = small_instances();
  for (const SmallInstance& s : instances) {
    const testing::Fixture f(s.grid);
    const int k = std::uniform_int_distribution<int>(1, s.grid.n_bus - 1)(rng);
    const AttackSetting setting{f.L, f.model.H, {}};
    const GfdiResult g = gfdi_attack(setting, k, s.tau);
    const auto oracle = gfdi_oracle(setting, k, s.tau);
    if (!g.feasible() || !oracle) {
      ++infeasible;
      continue;
    }
    if (g.attack->tv < oracle->tv - 1e-9) ++below;
    if (std::abs(g.attack->tv - oracle->tv) <= 1e-6) ++equal;
  }
  const double share = static_cast<double>(equal) / instances.size();
  return {below == 0 && infeasible == 0 && share >= 0.6,
          std::to_string(below) + " instances below the oracle, " + std::to_string(infeasible) +
              " infeasible, equal on " + std::to_string(equal) + "/50 (" + fmt(100 * share, 3) + "%, floor 60%)"};
}

Verdict feasibility_contracts() {
  Rng rng(1004);
  int violations = 0, attacks = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = std::uniform_int_distribution<int>(4, 10)(rng);
    const testing::Fixture f(testing::random_connected(rng, n));
    const int k = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const double tau = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const auto S = f.rows_for(testing::random_subset(rng, n, std::uniform_int_distribution<int>(0, n - 1)(rng)));
    const AttackSetting setting{f.L, f.model.H, S};
    std::vector<AttackVector> built;
    built.push_back(attack_rand(setting, k, tau, t));
    const GfdiResult g = gfdi_attack(setting, k, tau);
    if (g.feasible()) {
      built.push_back(*g.attack);
      built.push_back(attack_rand_gfdi(setting, *g.attack, t));
    }
    for (SparseVariant v : {SparseVariant::low, SparseVariant::avg}) {
      try {
        built.push_back(attack_sparsest(setting, tau, v));
      } catch (const InfeasibleError&) {
      }
    }
    for (const AttackVector& a : built) {
      ++attacks;
      const bool sparse_kind = a.kind == AttackKind::sparse_low || a.kind == AttackKind::sparse_avg;
      const int limit = sparse_kind ? n : k;
      bool ok = static_cast<int>(a.support.size()) <= limit &&
                (a.c.array() != 0.0).count() <= limit && a.c.cwiseAbs().maxCoeff() >= tau;
      for (int r : S) ok = ok && a.a(r) == 0.0;
      const double tv = a.c.dot(f.L * a.c);
      ok = ok && std::abs(a.tv - tv) <= 1e-9;
      if (!ok) ++violations;
    }
  }
  return {violations == 0,
          std::to_string(violations) + " violations among " + std::to_string(attacks) + " attacks from 1000 configurations"};
}

Verdict smooth_state_statistics() {
  const SpectralBasis b = eig_sym(build_laplacian(load_case("ieee57")));
  const double beta = 0.05;
  double sum = 0.0;
  Rng rng(1005);
  for (int t = 0; t < 10000; ++t) sum += graph_tv(b, gen_smooth_state(b, beta, rng));
  const double mean = sum / 10000.0;
  const double expect = beta * 56;
  const double rel = std::abs(mean - expect) / expect;
  return {rel <= 0.05, "mean TV " + fmt(mean) + " vs beta(N-1) = " + fmt(expect) + " (" + fmt(100 * rel, 3) + "% off)"};
}

/// DC, IEEE-57, tau = 0.2, k = 5, S empty, 1000 trials, all five attacks.
const DetectionStats& dc_baseline() {
  static std::optional<DetectionStats> stats;
  if (!stats) {
    static const Scenario scenario(load_case("ieee57"), 1e-3);
    ExperimentConfig c;
    c.trials = 1000;
    c.detectors = {"bdd", "gtv"};
    stats = run_monte_carlo(scenario, c);
  }
  return *stats;
}

Verdict bdd_unobservability() {
  const DetectionStats& st = dc_baseline();
  bool ok = true;
  std::string detail;
  for (AttackKind kind : all_attack_kinds()) {
    const double pd = st.at(to_string(kind), "bdd").pd;
    ok = ok && std::abs(pd - 0.05) <= 0.02;
    detail += to_string(kind) + "=" + fmt(pd, 3) + " ";
  }
  return {ok, "BDD alarm rates " + detail};
}

Verdict tv_trend() {
  const testing::Fixture f(load_case("ieee57"));
  const AttackSetting setting{f.L, f.model.H, {}};
  bool ok = true;
  std::string detail;
  for (double tau : {0.1, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const GfdiResult g = gfdi_attack(setting, 5, tau);
    const double tv_g = g.attack->tv;
    const double tv_s = attack_sparsest(setting, tau, SparseVariant::low).tv;
    std::vector<double> rand_tv;
    for (int d = 0; d < 200; ++d) {
      rand_tv.push_back(attack_rand(setting, 5, tau, derive_seed(1, 0x31, d)).tv);
    }
    const double tv_r = median(rand_tv);
    ok = ok && tv_g <= tv_s && tv_s <= tv_r;
    if (tau >= 0.4) ok = ok && tv_g < 0.5 * tv_r;
    detail += "tau " + fmt(tau, 2) + ": " + fmt(tv_g, 3) + "/" + fmt(tv_s, 3) + "/" + fmt(tv_r, 3) + "; ";
  }
  return {ok, "gfdi/sparse_low/median rand " + detail};
}

Verdict detection_trend() {
  const DetectionStats& st = dc_baseline();
  const double pd_g = st.at("gfdi", "gtv").pd;
  bool minimal = true;
  std::string detail;
  for (AttackKind kind : all_attack_kinds()) {
    const double pd = st.at(to_string(kind), "gtv").pd;
    minimal = minimal && pd_g <= pd;
    detail += to_string(kind) + "=" + fmt(pd, 3) + " ";
  }
  const double gap = st.at("rand", "gtv").pd - pd_g;
  return {minimal && gap >= 0.2, "GTV pd " + detail + "gap " + fmt(gap, 3)};
}

Verdict protection_tv() {
  const testing::Fixture f(load_case("ieee57"));
  const ProtectionProblem p{f.grid, f.model, f.L, 3, 0.6};
  const int m = static_cast<int>(std::lround(0.15 * f.grid.n_bus));
  const double base = gfdi_attack({f.L, f.model.H, {}}, 3, 0.6).attack->tv;
  const ProtectionPlan greedy = protect_greedy(p, std::numeric_limits<double>::infinity(), m);
  const double greedy_ratio = greedy.final_tv / base;
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ProtectionPlan r = protect_random(p, m, seed);
    const GfdiResult g = gfdi_attack({f.L, f.model.H, r.S}, 3, 0.6);
    ratios.push_back(g.feasible() ? g.attack->tv / base : std::numeric_limits<double>::infinity());
  }
  const double random_ratio = median(ratios);
  return {greedy_ratio >= 3.0 && random_ratio < 1.5, "|D| = " + std::to_string(m) + ": greedy " +
                                                         fmt(greedy_ratio, 3) + "x, random median " +
                                                         fmt(random_ratio, 3) + "x"};
}

/// First |D| in the rows whose gfdi pd reaches the level; none if never.
std::optional<int> first_crossing(const std::vector<SweepRow>& rows, const std::string& detector, double level) {
  for (const SweepRow& r : rows) {
    if (r.outcome.attack == "gfdi" && r.outcome.detector == detector && r.outcome.pd >= level) return r.secured;
  }
  return std::nullopt;
}

std::string pd_series(const std::vector<SweepRow>& rows, const std::string& detector) {
  std::string out;
  for (const SweepRow& r : rows) {
    if (r.outcome.attack == "gfdi" && r.outcome.detector == detector) out += fmt(r.outcome.pd, 3) + " ";
  }
  return out;
}

Verdict protection_detection() {
  static const Scenario scenario(load_case("ieee57"), 1e-3);
  const int n = scenario.grid().n_bus;
  ExperimentConfig c;
  c.tau = 0.6;
  c.k = 3;
  c.trials = 500;
  c.attacks = {AttackKind::gfdi};
  c.detectors = {"gtv"};
  std::vector<double> grid;
  for (int m = 0; m <= 20; ++m) grid.push_back(static_cast<double>(m) / n);
  const auto greedy = sweep(scenario, c, SweepAxis::protection_ratio, grid);
  const auto g_cross = first_crossing(greedy, "gtv", 0.9);
  if (!g_cross) return {false, "greedy plan never reaches pd 0.9 by |D| = 20: " + pd_series(greedy, "gtv")};
  // Random plans only need checking up to the greedy crossing.
  std::vector<double> upto(grid.begin(), grid.begin() + *g_cross + 1);
  SweepOptions opt;
  opt.policy = ProtectionPolicy::random;
  opt.policy_seed = 1;
  const auto random = sweep(scenario, c, SweepAxis::protection_ratio, upto, opt);
  const auto r_cross = first_crossing(random, "gtv", 0.9);
  return {!r_cross.has_value() || *r_cross > *g_cross,
          "greedy reaches 0.9 at |D|/N = " + std::to_string(*g_cross) + "/" + std::to_string(n) + " (pd " +
              pd_series(greedy, "gtv") + "); random pd up to there " + pd_series(random, "gtv")};
}

Verdict ac_pipeline() {
  static const Scenario scenario(load_case("ieee57"), 1e-3);
  const int n = scenario.grid().n_bus;
  ExperimentConfig c;
  c.model = PowerModel::ac;
  c.tau = 0.25;
  c.k = 3;
  c.trials = 300;
  c.calibration_trials = 2000;
  c.attacks = {AttackKind::gfdi};
  c.detectors = {"bdd_ac", "gtv_ac"};
  std::vector<double> grid;
  for (int m = 0; m <= 14; ++m) grid.push_back(static_cast<double>(m) / n);
  const auto rows = sweep(scenario, c, SweepAxis::protection_ratio, grid);
  double bdd = -1.0;
  std::vector<const DetectionOutcome*> gsp;
  for (const SweepRow& r : rows) {
    if (r.outcome.attack != "gfdi") continue;
    if (r.outcome.detector == "bdd_ac" && r.secured == 0) bdd = r.outcome.pd;
    if (r.outcome.detector == "gtv_ac") gsp.push_back(&r.outcome);
  }
  int violations = 0;
  for (size_t j = 1; j < gsp.size(); ++j) {
    if (gsp[j]->ci_hi < gsp[j - 1]->ci_lo) ++violations;
  }
  const bool bdd_ok = std::abs(bdd - c.target_pfa) <= 0.05;
  return {bdd_ok && violations <= 1, "AC BDD pd(gfdi) " + fmt(bdd, 3) + "; GTV ensemble pd along |D| = 0..14: " +
                                          pd_series(rows, "gtv_ac") + "(" + std::to_string(violations) +
                                          " non-overlapping decreases)"};
}

Verdict invariant_suite(int argc, char** argv) {
  doctest::Context ctx;
  ctx.applyCommandLine(argc, argv);
  ctx.addFilter("test-suite", "invariants");
  ctx.setOption("minimal", true);
  const int rc = ctx.run();
  return {rc == 0, rc == 0 ? "all invariant cases passed" : "invariant failures reported above"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    double limit_seconds;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, 30, solvers},
      {2, 120, per_index_equivalence},
      {3, 120, relaxation_quality},
      {4, 600, feasibility_contracts},
      {5, 60, smooth_state_statistics},
      {6, 600, bdd_unobservability},
      {7, 300, tv_trend},
      {8, 600, detection_trend},
      {9, 900, protection_tv},
      {10, 1800, protection_detection},
      {11, 1200, ac_pipeline},
      {12, 60, [&] { return invariant_suite(argc, argv); }},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.limit_seconds) {
      v.pass = false;
      v.detail += "; over the " + fmt(c.limit_seconds) + " s budget";
    }
    if (!v.pass) ++failures;
    std::cout << "Criterion " << c.id << ": " << (v.pass ? "PASS" : "FAIL") << " (" << fmt(secs, 3) << " s) "
              << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
