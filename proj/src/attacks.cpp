#include "gridshield/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gridshield/error.hpp"
#include "gridshield/parallel.hpp"
#include "gridshield/random.hpp"

namespace gridshield {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::gfdi: return "gfdi";
    case AttackKind::rand: return "rand";
    case AttackKind::rand_gfdi: return "rand_gfdi";
    case AttackKind::sparse_low: return "sparse_low";
    case AttackKind::sparse_avg: return "sparse_avg";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view text) {
  std::string t(text);
  std::replace(t.begin(), t.end(), '-', '_');
  std::replace(t.begin(), t.end(), '+', '_');
  for (AttackKind k : all_attack_kinds()) {
    if (to_string(k) == t) return k;
  }
  throw ConfigError("unknown attack kind '" + std::string(text) + "'");
}

const std::vector<AttackKind>& all_attack_kinds() {
  static const std::vector<AttackKind> kinds = {AttackKind::gfdi, AttackKind::rand, AttackKind::rand_gfdi,
                                                AttackKind::sparse_low, AttackKind::sparse_avg};
  return kinds;
}

namespace {

Matrix secured_block(const AttackSetting& s) {
  Matrix HS(static_cast<Eigen::Index>(s.secured_rows.size()), s.H.cols());
  for (size_t r = 0; r < s.secured_rows.size(); ++r) {
    const int row = s.secured_rows[r];
    if (row < 0 || row >= s.H.rows()) throw ConfigError("secured row out of range");
    HS.row(static_cast<Eigen::Index>(r)) = s.H.row(row);
  }
  return HS;
}

void check_setting(const AttackSetting& s) {
  const Eigen::Index n = s.laplacian.rows();
  if (s.laplacian.cols() != n || s.H.cols() != n) throw ConfigError("attack: L and H dimensions disagree");
}

// Rows of the null-space basis of H^S; index i can carry a nonzero entry
// only if its row is nonzero.
std::vector<bool> forceable_indices(const Matrix& HS, Eigen::Index n) {
  std::vector<bool> ok(n, true);
  if (HS.rows() == 0) return ok;
  Eigen::ColPivHouseholderQR<Matrix> qr(HS.transpose());
  qr.setThreshold(1e-12);
  const Eigen::Index r = qr.rank();
  if (r == n) return std::vector<bool>(n, false);
  Matrix Q = qr.householderQ();
  const Matrix Z = Q.rightCols(n - r);
  for (Eigen::Index i = 0; i < n; ++i) ok[i] = Z.row(i).norm() > 1e-9;
  return ok;
}

Vector scale_to_inf(const Vector& c, double tau) {
  const double m = c.cwiseAbs().maxCoeff();
  if (m == 0.0) return c;
  Vector out = c * (tau / m);
  // Pin the peak so that ||c||_inf == tau holds exactly after rounding.
  Eigen::Index arg = 0;
  c.cwiseAbs().maxCoeff(&arg);
  out(arg) = c(arg) > 0.0 ? tau : -tau;
  return out;
}

// The forced entry solves c_i = tau only up to solver round-off.
// Thresholding may drop c_i when other entries tie with it at tau; the peak
// is then pinned instead.
void snap_forced(Vector& c, int i, double tau) {
  if (std::abs(c(i) - tau) <= 1e-6 * tau) c(i) = tau;
  Eigen::Index arg = 0;
  const double m = c.cwiseAbs().maxCoeff(&arg);
  if (m < tau && m >= tau * (1.0 - 1e-6)) c(arg) = c(arg) > 0.0 ? tau : -tau;
}

}  // namespace

void finalize_attack(AttackVector& attack, const AttackSetting& setting) {
  attack.a = setting.H * attack.c;
  const Vector exact = attack.a;
  for (int row : setting.secured_rows) attack.a(row) = 0.0;
  attack.unobs_residual = (attack.a - exact).norm();
  attack.support.clear();
  for (Eigen::Index j = 0; j < attack.c.size(); ++j) {
    if (attack.c(j) != 0.0) attack.support.push_back(static_cast<int>(j));
  }
  attack.tv = std::max(0.0, attack.c.dot(setting.laplacian * attack.c));
}

Vector hard_threshold(const Vector& c, int k, double zero_tol) {
  std::vector<Eigen::Index> order(c.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(c(a)) > std::abs(c(b)); });
  Vector out = Vector::Zero(c.size());
  for (int r = 0; r < std::min<int>(k, static_cast<int>(order.size())); ++r) {
    const Eigen::Index j = order[r];
    if (std::abs(c(j)) > zero_tol) out(j) = c(j);
  }
  return out;
}

QPProblem gfdi_qp(const AttackSetting& setting, int i, double tau, double l1_budget) {
  const Eigen::Index n = setting.laplacian.rows();
  const Matrix HS = secured_block(setting);
  const Eigen::Index s = HS.rows();
  QPProblem p;
  // Variables x = (c, u, v).
  p.Q = Matrix::Zero(3 * n, 3 * n);
  p.Q.topLeftCorner(n, n) = setting.laplacian;
  p.A_eq = Matrix::Zero(1 + s + n, 3 * n);
  p.b_eq = Vector::Zero(1 + s + n);
  p.A_eq(0, i) = 1.0;
  p.b_eq(0) = tau;
  if (s) p.A_eq.block(1, 0, s, n) = HS;
  p.A_eq.block(1 + s, 0, n, n) = Matrix::Identity(n, n);
  p.A_eq.block(1 + s, n, n, n) = -Matrix::Identity(n, n);
  p.A_eq.block(1 + s, 2 * n, n, n) = Matrix::Identity(n, n);
  p.A_ineq = Matrix::Zero(1 + 2 * n, 3 * n);
  p.b_ineq = Vector::Zero(1 + 2 * n);
  p.A_ineq.block(0, n, 1, 2 * n).setOnes();
  p.b_ineq(0) = l1_budget;
  p.A_ineq.block(1, n, 2 * n, 2 * n) = -Matrix::Identity(2 * n, 2 * n);
  return p;
}

GfdiResult gfdi_attack(const AttackSetting& setting, int k, double tau, const GfdiOptions& options) {
  check_setting(setting);
  const int n = static_cast<int>(setting.laplacian.rows());
  if (!(tau > 0.0)) throw ConfigError("gfdi: impact tau must be positive");
  if (k < 1 || k >= n) throw ConfigError("gfdi: sparsity k must satisfy 1 <= k < N");
  const double budget = options.l1_budget.value_or(static_cast<double>(k));
  if (budget < tau) throw ConfigError("gfdi: l1 budget must be at least tau");

  const Matrix HS = secured_block(setting);
  const std::vector<bool> forceable = forceable_indices(HS, n);

  GfdiResult result;
  result.candidates.resize(n);
  std::vector<Vector> thresholded(n);
  parallel_for(n, options.workers, [&](int i) {
    GfdiCandidate& cand = result.candidates[i];
    cand.index = i;
    if (!forceable[i]) return;
    const QPSolution sol = solve_qp(gfdi_qp(setting, i, tau, budget), options.qp);
    cand.status = sol.status;
    cand.qp_iterations = sol.iterations;
    if (sol.status == QPStatus::infeasible) return;
    if (sol.status != QPStatus::optimal) {
      throw NumericError("gfdi: QP for forced bus " + std::to_string(i + 1) + " ended with status " +
                         to_string(sol.status));
    }
    thresholded[i] = hard_threshold(sol.x.head(n), k, 1e-9 * tau);
    snap_forced(thresholded[i], i, tau);
    cand.feasible = true;
    cand.tv = std::max(0.0, thresholded[i].dot(setting.laplacian * thresholded[i]));
  });

  int best = -1;
  for (int i = 0; i < n; ++i) {
    if (result.candidates[i].feasible && (best < 0 || result.candidates[i].tv < result.candidates[best].tv)) {
      best = i;
    }
  }
  if (best < 0) return result;
  AttackVector attack;
  attack.kind = AttackKind::gfdi;
  attack.c = thresholded[best];
  attack.target = best;
  attack.tau = tau;
  attack.k = k;
  finalize_attack(attack, setting);
  result.attack = std::move(attack);
  return result;
}

std::optional<AttackVector> gfdi_oracle(const AttackSetting& setting, int k, double tau) {
  check_setting(setting);
  const int n = static_cast<int>(setting.laplacian.rows());
  if (n > 12) throw ConfigError("gfdi_oracle: N must not exceed 12");
  if (k < 1 || k > n) throw ConfigError("gfdi_oracle: invalid sparsity");
  const Matrix HS = secured_block(setting);

  double best_tv = std::numeric_limits<double>::infinity();
  std::optional<AttackVector> best;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    const int size = std::popcount(mask);
    if (size > k) continue;
    std::vector<int> T;
    for (int j = 0; j < n; ++j) {
      if (mask & (1u << j)) T.push_back(j);
    }
    Matrix Q(size, size);
    for (int a = 0; a < size; ++a) {
      for (int b = 0; b < size; ++b) Q(a, b) = setting.laplacian(T[a], T[b]);
    }
    Matrix A(1 + HS.rows(), size);
    A.setZero();
    for (int b = 0; b < size; ++b) A.block(1, b, HS.rows(), 1) = HS.col(T[b]);
    Vector rhs = Vector::Zero(1 + HS.rows());
    rhs(0) = tau;
    for (int f = 0; f < size; ++f) {
      A.row(0).setZero();
      A(0, f) = 1.0;
      Vector cT;
      try {
        cT = solve_kkt_equality(Q, A, rhs);
      } catch (const NumericError&) {
        continue;
      }
      const double tv = std::max(0.0, cT.dot(Q * cT));
      if (tv < best_tv) {
        best_tv = tv;
        AttackVector attack;
        attack.kind = AttackKind::gfdi;
        attack.c = Vector::Zero(n);
        for (int b = 0; b < size; ++b) attack.c(T[b]) = cT(b);
        attack.c(T[f]) = tau;
        attack.target = T[f];
        attack.tau = tau;
        attack.k = k;
        best = std::move(attack);
      }
    }
  }
  if (best) finalize_attack(*best, setting);
  return best;
}

AttackVector attack_rand(const AttackSetting& setting, int k, double tau, std::uint64_t seed) {
  check_setting(setting);
  const int n = static_cast<int>(setting.laplacian.rows());
  if (k < 1 || k > n) throw ConfigError("rand attack: k must satisfy 1 <= k <= N");
  Rng rng(seed);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first k entries form a uniform k-subset.
  for (int j = 0; j < k; ++j) {
    std::uniform_int_distribution<int> pick(j, n - 1);
    std::swap(idx[j], idx[pick(rng)]);
  }
  const Vector values = standard_normal(rng, k);
  AttackVector attack;
  attack.kind = AttackKind::rand;
  attack.c = Vector::Zero(n);
  for (int j = 0; j < k; ++j) attack.c(idx[j]) = values(j);
  attack.c = scale_to_inf(attack.c, tau);
  Eigen::Index arg = 0;
  attack.c.cwiseAbs().maxCoeff(&arg);
  attack.target = static_cast<int>(arg);
  attack.tau = tau;
  attack.k = k;
  finalize_attack(attack, setting);
  return attack;
}

AttackVector attack_rand_gfdi(const AttackSetting& setting, const AttackVector& gfdi, std::uint64_t seed) {
  check_setting(setting);
  Rng rng(seed);
  const Vector values = standard_normal(rng, static_cast<Eigen::Index>(gfdi.support.size()));
  AttackVector attack;
  attack.kind = AttackKind::rand_gfdi;
  attack.c = Vector::Zero(gfdi.c.size());
  for (size_t j = 0; j < gfdi.support.size(); ++j) attack.c(gfdi.support[j]) = values(static_cast<Eigen::Index>(j));
  attack.c = scale_to_inf(attack.c, gfdi.tau);
  Eigen::Index arg = 0;
  attack.c.cwiseAbs().maxCoeff(&arg);
  attack.target = static_cast<int>(arg);
  attack.tau = gfdi.tau;
  attack.k = gfdi.k;
  finalize_attack(attack, setting);
  // A Gaussian draw is nonzero almost surely; keep the GFDI support verbatim.
  attack.support = gfdi.support;
  return attack;
}

AttackVector attack_rand_gfdi(const AttackSetting& setting, int k, double tau, std::uint64_t seed,
                              const GfdiOptions& options) {
  GfdiResult g = gfdi_attack(setting, k, tau, options);
  if (!g.attack) throw InfeasibleError("rand_gfdi: no feasible GFDI attack to take the support from");
  return attack_rand_gfdi(setting, *g.attack, seed);
}

SparsestCandidates sparsest_candidates(const AttackSetting& setting, double tau) {
  check_setting(setting);
  if (!(tau > 0.0)) throw ConfigError("sparsest attack: tau must be positive");
  const Eigen::Index n = setting.laplacian.rows();
  const Matrix HS = secured_block(setting);
  const Eigen::Index s = HS.rows();
  const std::vector<bool> forceable = forceable_indices(HS, n);

  SparsestCandidates out;
  out.per_index.resize(n);
  const Vector cost = Vector::Ones(2 * n);
  Matrix A_eq = Matrix::Zero(1 + s, 2 * n);
  Vector b_eq = Vector::Zero(1 + s);
  b_eq(0) = tau;
  if (s) {
    A_eq.block(1, 0, s, n) = HS;
    A_eq.block(1, n, s, n) = -HS;
  }
  const Matrix A_in(0, 2 * n);
  const Vector b_in(0);
  std::vector<int> sizes(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!forceable[i]) continue;
    A_eq.row(0).setZero();
    A_eq(0, i) = 1.0;
    A_eq(0, n + i) = -1.0;
    const LPResult lp = solve_lp(cost, A_eq, b_eq, A_in, b_in);
    if (lp.status != LPStatus::optimal) continue;
    Vector c = lp.x.head(n) - lp.x.tail(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(c(j)) < 1e-8 * tau) c(j) = 0.0;
    }
    sizes[i] = static_cast<int>((c.array() != 0.0).count());
    out.per_index[i] = std::move(c);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (out.per_index[i] && (out.min_support == 0 || sizes[i] < out.min_support)) out.min_support = sizes[i];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!out.per_index[i] || sizes[i] != out.min_support) continue;
    Vector c = scale_to_inf(*out.per_index[i], tau);
    // Orient so the first nonzero entry is positive before deduplicating.
    for (Eigen::Index j = 0; j < n; ++j) {
      if (c(j) != 0.0) {
        if (c(j) < 0.0) c = -c;
        break;
      }
    }
    bool dup = false;
    for (const Vector& prev : out.candidates) {
      if ((prev - c).cwiseAbs().maxCoeff() <= 1e-9 * tau) dup = true;
    }
    if (!dup) out.candidates.push_back(std::move(c));
  }
  return out;
}

AttackVector attack_sparsest(const AttackSetting& setting, double tau, SparseVariant variant) {
  const SparsestCandidates cands = sparsest_candidates(setting, tau);
  if (cands.candidates.empty()) throw InfeasibleError("sparsest attack: no index admits an unobservable attack");
  std::vector<double> tvs;
  for (const Vector& c : cands.candidates) tvs.push_back(std::max(0.0, c.dot(setting.laplacian * c)));
  size_t pick = 0;
  if (variant == SparseVariant::low) {
    for (size_t j = 1; j < tvs.size(); ++j) {
      if (tvs[j] < tvs[pick]) pick = j;
    }
  } else {
    const double mean = std::accumulate(tvs.begin(), tvs.end(), 0.0) / static_cast<double>(tvs.size());
    for (size_t j = 1; j < tvs.size(); ++j) {
      if (std::abs(tvs[j] - mean) < std::abs(tvs[pick] - mean)) pick = j;
    }
  }
  AttackVector attack;
  attack.kind = variant == SparseVariant::low ? AttackKind::sparse_low : AttackKind::sparse_avg;
  attack.c = cands.candidates[pick];
  Eigen::Index arg = 0;
  attack.c.cwiseAbs().maxCoeff(&arg);
  attack.target = static_cast<int>(arg);
  attack.tau = tau;
  attack.k = cands.min_support;
  finalize_attack(attack, setting);
  return attack;
}

std::string attack_state_csv(const AttackVector& attack) {
  std::ostringstream os;
  os.precision(17);
  os << "bus,c_value\n";
  for (Eigen::Index i = 0; i < attack.c.size(); ++i) os << i + 1 << ',' << attack.c(i) << '\n';
  return os.str();
}

std::string attack_measurement_csv(const AttackVector& attack) {
  std::ostringstream os;
  os.precision(17);
  os << "row,a_value\n";
  for (Eigen::Index i = 0; i < attack.a.size(); ++i) os << i + 1 << ',' << attack.a(i) << '\n';
  return os.str();
}

std::string attack_metadata(const AttackVector& attack) {
  std::ostringstream os;
  os.precision(17);
  os << "{\n  \"kind\": \"" << to_string(attack.kind) << "\",\n  \"tau\": " << attack.tau
     << ",\n  \"k\": " << attack.k << ",\n  \"target\": ";
  if (attack.target) {
    os << *attack.target + 1;
  } else {
    os << "null";
  }
  os << ",\n  \"tv\": " << attack.tv << ",\n  \"epsilon\": " << attack.unobs_residual << ",\n  \"support\": [";
  for (size_t i = 0; i < attack.support.size(); ++i) os << (i ? ", " : "") << attack.support[i] + 1;
  os << "]\n}\n";
  return os.str();
}

}  // namespace gridshield
