#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridshield/solvers.hpp"
#include "gridshield/types.hpp"

namespace gridshield {

enum class AttackKind { gfdi, rand, rand_gfdi, sparse_low, sparse_avg };

std::string to_string(AttackKind kind);
/// Accepts "gfdi", "rand", "rand_gfdi" (or "rand+gfdi"), "sparse_low",
/// "sparse_avg" (dashes allowed). Throws ConfigError otherwise.
AttackKind parse_attack_kind(std::string_view text);
const std::vector<AttackKind>& all_attack_kinds();

/// State attack c, measurement attack a and bookkeeping.
///
/// For every constructed attack: |support| <= k, a restricted to the secured
/// rows is exactly zero and tv == c^T L c.
struct AttackVector {
  AttackKind kind = AttackKind::gfdi;
  Vector c;
  Vector a;
  std::vector<int> support;
  /// Forced bus of the winning candidate, when the construction has one.
  std::optional<int> target;
  double tv = 0.0;
  /// ||a - H c||, nonzero only when secured entries had to be zeroed.
  double unobs_residual = 0.0;
  double tau = 0.0;
  int k = 0;
};

/// Inputs shared by every attack construction.
struct AttackSetting {
  const Matrix& laplacian;
  const Matrix& H;
  std::span<const int> secured_rows;
};

struct GfdiOptions {
  /// Bound on ||c||_1 in the relaxation; defaults to k.
  std::optional<double> l1_budget;
  QPSettings qp;
  int workers = 1;
};

struct GfdiCandidate {
  int index = 0;
  bool feasible = false;
  QPStatus status = QPStatus::infeasible;
  /// TV of the thresholded candidate (feasible candidates only).
  double tv = 0.0;
  int qp_iterations = 0;
};

struct GfdiResult {
  /// Empty when no index admits a feasible relaxed problem.
  std::optional<AttackVector> attack;
  std::vector<GfdiCandidate> candidates;

  bool feasible() const { return attack.has_value(); }
};

/// Smoothest sparse unobservable attack by l1 relaxation: one QP per forced
/// index, hard-thresholding to k entries, argmin TV, zeroing of secured
/// measurement entries. Requires tau > 0 and 1 <= k < N. Throws NumericError
/// naming the forced index when a QP fails to converge.
GfdiResult gfdi_attack(const AttackSetting& setting, int k, double tau, const GfdiOptions& options = {});

/// Builds the stacked (c, u, v) QP for forced index i.
QPProblem gfdi_qp(const AttackSetting& setting, int i, double tau, double l1_budget);

/// Keeps the k largest-magnitude entries (ties keep the lower index) and
/// zeroes entries below `zero_tol`.
Vector hard_threshold(const Vector& c, int k, double zero_tol = 0.0);

/// Exact minimum of the per-index l0 problem by enumerating supports of
/// size <= k and forced indices. N <= 12. tau = 0 is admitted.
std::optional<AttackVector> gfdi_oracle(const AttackSetting& setting, int k, double tau);

/// Random k-sparse Gaussian attack scaled to ||c||_inf = tau.
AttackVector attack_rand(const AttackSetting& setting, int k, double tau, std::uint64_t seed);

/// Gaussian values on the support of `gfdi`, scaled to ||c||_inf = tau.
AttackVector attack_rand_gfdi(const AttackSetting& setting, const AttackVector& gfdi, std::uint64_t seed);
/// Convenience form that runs gfdi_attack first; throws InfeasibleError
/// when no GFDI attack exists.
AttackVector attack_rand_gfdi(const AttackSetting& setting, int k, double tau, std::uint64_t seed,
                              const GfdiOptions& options = {});

enum class SparseVariant { low, avg };

struct SparsestCandidates {
  /// Per forced index: minimum-l1 state attack (empty if infeasible).
  std::vector<std::optional<Vector>> per_index;
  /// Smallest support size over feasible indices (0 if none).
  int min_support = 0;
  /// Distinct minimum-support candidates, each scaled to ||c||_inf = tau.
  std::vector<Vector> candidates;
};

/// Per-index l1 minimization LPs used by the sparsest baselines.
SparsestCandidates sparsest_candidates(const AttackSetting& setting, double tau);

/// Sparsest unobservable attack with the lowest (low) or closest-to-mean
/// (avg) TV among the minimum-support candidates. Throws InfeasibleError
/// when no index admits an attack.
AttackVector attack_sparsest(const AttackSetting& setting, double tau, SparseVariant variant);

/// Fills a, unobs_residual, support and tv from c.
void finalize_attack(AttackVector& attack, const AttackSetting& setting);

/// `bus,c_value` (1-based).
std::string attack_state_csv(const AttackVector& attack);
/// `row,a_value` (1-based).
std::string attack_measurement_csv(const AttackVector& attack);
/// Small JSON block: kind, tau, k, target (1-based or null), tv, epsilon
/// (the unobservability residual) and support.
std::string attack_metadata(const AttackVector& attack);

}  // namespace gridshield
