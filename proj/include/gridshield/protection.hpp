#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gridshield/attacks.hpp"
#include "gridshield/grid_model.hpp"

namespace gridshield {

struct ProtectionStep {
  /// Size of D when the attack was evaluated.
  int secured = 0;
  /// Bus added after this evaluation (none on the final step).
  std::optional<int> bus_added;
  /// TV of the best remaining attack, +inf when none exists.
  double tv = 0.0;
};

/// Secured bus set D with the induced rows S.
struct ProtectionPlan {
  std::string policy;
  /// Secured buses in selection order.
  std::vector<int> D;
  std::vector<int> S;
  double final_tv = 0.0;
  double delta = 0.0;
  int iterations = 0;
  /// False when the size cap was hit before the stop rule fired.
  bool converged = true;
  std::vector<ProtectionStep> history;

  /// Plan restricted to its first `m` buses.
  std::vector<int> prefix(int m) const;
};

struct ProtectionProblem {
  const GridCase& grid;
  const MeasurementModel& model;
  const Matrix& laplacian;
  int k = 3;
  double tau = 0.6;
};

/// Greedy placement: secure the forced bus of the current best GFDI attack
/// until its TV exceeds delta or no attack remains. `max_secured` defaults to
/// N. When the forced bus is already secured the largest unsecured support
/// entry is added instead, then the unsecured bus nearest to the support
/// (fewest hops, lowest index); a plan that can grow no further stops
/// unconverged.
ProtectionPlan protect_greedy(const ProtectionProblem& problem, double delta,
                              std::optional<int> max_secured = std::nullopt, const GfdiOptions& options = {});

/// Minimum-cardinality D such that the exact oracle optimum exceeds delta
/// or vanishes; ties resolved by lexicographic subset order. N <= 10.
ProtectionPlan protect_exhaustive(const ProtectionProblem& problem, double delta);

/// `size` distinct buses drawn uniformly.
ProtectionPlan protect_random(const ProtectionProblem& problem, int size, std::uint64_t seed);

/// Sparsity-driven baseline: repeatedly secure the bus that maximizes the
/// minimum support of the per-index l1 attacks (fewest minimum-support
/// candidates, then lowest index, break ties). Stops early once no attack
/// remains.
ProtectionPlan protect_sparsest_baseline(const ProtectionProblem& problem, int size);

/// `step,bus_added,gfdi_tv` rows with 1-based bus numbers.
std::string plan_csv(const ProtectionPlan& plan);

}  // namespace gridshield
