#include "gridshield/protection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gridshield/error.hpp"
#include "gridshield/random.hpp"

namespace gridshield {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> induced_rows(const ProtectionProblem& p, const std::vector<int>& D) {
  return derive_secured_rows(D, p.model, p.grid).rows;
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

std::vector<int> ProtectionPlan::prefix(int m) const {
  m = std::clamp(m, 0, static_cast<int>(D.size()));
  return {D.begin(), D.begin() + m};
}

namespace {

// Unsecured bus closest (in hops) to the support, lowest index on ties.
std::optional<int> nearest_unsecured(const GridCase& grid, const std::vector<int>& support,
                                     const std::vector<int>& secured) {
  std::vector<std::vector<int>> adj(grid.n_bus);
  for (const Branch& br : grid.branches) {
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::vector<int> dist(grid.n_bus, -1);
  std::vector<int> frontier;
  for (int j : support) {
    dist[j] = 0;
    frontier.push_back(j);
  }
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int u : frontier) {
      for (int w : adj[u]) {
        if (dist[w] < 0) {
          dist[w] = dist[u] + 1;
          next.push_back(w);
        }
      }
    }
    std::sort(next.begin(), next.end());
    for (int w : next) {
      if (!contains(secured, w)) return w;
    }
    frontier = std::move(next);
  }
  return std::nullopt;
}

}  // namespace

ProtectionPlan protect_greedy(const ProtectionProblem& problem, double delta, std::optional<int> max_secured,
                              const GfdiOptions& options) {
  const int n = problem.grid.n_bus;
  if (!(delta > 0.0)) throw ConfigError("protect: delta must be positive");
  const int cap = max_secured.value_or(n);
  if (cap < 0 || cap > n) throw ConfigError("protect: max_secured must lie in [0, N]");

  ProtectionPlan plan;
  plan.policy = "greedy";
  plan.delta = delta;
  plan.converged = false;
  while (true) {
    plan.S = induced_rows(problem, plan.D);
    AttackSetting setting{problem.laplacian, problem.model.H, plan.S};
    GfdiResult g;
    try {
      g = gfdi_attack(setting, problem.k, problem.tau, options);
    } catch (const NumericError& e) {
      throw NumericError("protect: round " + std::to_string(plan.iterations) + ": " + e.what());
    }
    ProtectionStep step;
    step.secured = static_cast<int>(plan.D.size());
    step.tv = g.attack ? g.attack->tv : kInf;
    plan.final_tv = step.tv;
    if (!g.attack || g.attack->tv > delta) {
      plan.converged = true;
      plan.history.push_back(step);
      break;
    }
    if (static_cast<int>(plan.D.size()) >= cap) {
      plan.history.push_back(step);
      break;
    }
    std::optional<int> next;
    const AttackVector& a = *g.attack;
    if (a.target && !contains(plan.D, *a.target)) {
      next = *a.target;
    } else {
      // The forced entry is already secured: take the largest remaining entry.
      double best = 0.0;
      for (int j : a.support) {
        if (!contains(plan.D, j) && std::abs(a.c(j)) > best) {
          best = std::abs(a.c(j));
          next = j;
        }
      }
      if (!next) next = nearest_unsecured(problem.grid, a.support, plan.D);
    }
    if (!next) {
      plan.history.push_back(step);
      break;
    }
    step.bus_added = *next;
    plan.history.push_back(step);
    plan.D.push_back(*next);
    ++plan.iterations;
  }
  return plan;
}

ProtectionPlan protect_exhaustive(const ProtectionProblem& problem, double delta) {
  const int n = problem.grid.n_bus;
  if (n > 10) throw ConfigError("protect_exhaustive: N must not exceed 10");
  if (!(delta >= 0.0)) throw ConfigError("protect_exhaustive: delta must be nonnegative");
  ProtectionPlan plan;
  plan.policy = "exhaustive";
  plan.delta = delta;
  for (int size = 0; size <= n; ++size) {
    // Lexicographic enumeration of size-subsets.
    std::vector<int> D(size);
    std::iota(D.begin(), D.end(), 0);
    while (true) {
      const std::vector<int> S = induced_rows(problem, D);
      AttackSetting setting{problem.laplacian, problem.model.H, S};
      const auto best = gfdi_oracle(setting, problem.k, problem.tau);
      ++plan.iterations;
      const double tv = best ? best->tv : kInf;
      if (tv > delta) {
        plan.D = D;
        plan.S = S;
        plan.final_tv = tv;
        plan.history.push_back({size, std::nullopt, tv});
        return plan;
      }
      int pos = size - 1;
      while (pos >= 0 && D[pos] == n - size + pos) --pos;
      if (pos < 0) break;
      ++D[pos];
      for (int q = pos + 1; q < size; ++q) D[q] = D[q - 1] + 1;
    }
  }
  plan.converged = false;
  return plan;
}

ProtectionPlan protect_random(const ProtectionProblem& problem, int size, std::uint64_t seed) {
  const int n = problem.grid.n_bus;
  if (size < 0 || size > n) throw ConfigError("protect_random: size must lie in [0, N]");
  Rng rng(seed);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < size; ++j) {
    std::uniform_int_distribution<int> pick(j, n - 1);
    std::swap(idx[j], idx[pick(rng)]);
  }
  ProtectionPlan plan;
  plan.policy = "random";
  plan.D.assign(idx.begin(), idx.begin() + size);
  plan.S = induced_rows(problem, plan.D);
  plan.final_tv = std::numeric_limits<double>::quiet_NaN();
  plan.iterations = size;
  return plan;
}

ProtectionPlan protect_sparsest_baseline(const ProtectionProblem& problem, int size) {
  const int n = problem.grid.n_bus;
  if (size < 0 || size > n) throw ConfigError("protect_sparsest: size must lie in [0, N]");
  ProtectionPlan plan;
  plan.policy = "sparsest";
  plan.final_tv = std::numeric_limits<double>::quiet_NaN();
  while (static_cast<int>(plan.D.size()) < size) {
    int best_bus = -1;
    int best_support = -1;
    size_t best_count = 0;
    bool blocked = false;
    for (int b = 0; b < n && !blocked; ++b) {
      if (contains(plan.D, b)) continue;
      std::vector<int> D = plan.D;
      D.push_back(b);
      const std::vector<int> S = induced_rows(problem, D);
      AttackSetting setting{problem.laplacian, problem.model.H, S};
      const SparsestCandidates c = sparsest_candidates(setting, problem.tau);
      if (c.candidates.empty()) {
        best_bus = b;
        blocked = true;
        break;
      }
      if (c.min_support > best_support || (c.min_support == best_support && c.candidates.size() < best_count)) {
        best_bus = b;
        best_support = c.min_support;
        best_count = c.candidates.size();
      }
    }
    plan.D.push_back(best_bus);
    plan.history.push_back({static_cast<int>(plan.D.size()) - 1, best_bus, std::numeric_limits<double>::quiet_NaN()});
    ++plan.iterations;
    if (blocked) break;
  }
  plan.S = induced_rows(problem, plan.D);
  return plan;
}

std::string plan_csv(const ProtectionPlan& plan) {
  std::ostringstream os;
  os.precision(17);
  os << "step,bus_added,gfdi_tv\n";
  for (size_t i = 0; i < plan.history.size(); ++i) {
    const ProtectionStep& s = plan.history[i];
    os << i << ',';
    if (s.bus_added) os << *s.bus_added + 1;
    os << ',';
    if (std::isinf(s.tv)) {
      os << "inf";
    } else if (!std::isnan(s.tv)) {
      os << s.tv;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace gridshield
