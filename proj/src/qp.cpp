#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "gridshield/error.hpp"
#include "gridshield/solvers.hpp"

namespace gridshield {

std::string to_string(QPStatus status) {
  switch (status) {
    case QPStatus::optimal: return "optimal";
    case QPStatus::infeasible: return "infeasible";
    case QPStatus::unbounded: return "unbounded";
    case QPStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kEqRhoFactor = 1e3;
constexpr double kInfeasTol = 1e-5;

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void check_problem(const QPProblem& p) {
  const Eigen::Index n = p.Q.rows();
  if (p.Q.cols() != n) throw ConfigError("solve_qp: Q is not square");
  if (p.q.size() != 0 && p.q.size() != n) throw ConfigError("solve_qp: q has wrong length");
  if (p.A_eq.rows() != p.b_eq.size() || (p.A_eq.rows() > 0 && p.A_eq.cols() != n)) {
    throw ConfigError("solve_qp: equality constraint dimensions mismatch");
  }
  if (p.A_ineq.rows() != p.b_ineq.size() || (p.A_ineq.rows() > 0 && p.A_ineq.cols() != n)) {
    throw ConfigError("solve_qp: inequality constraint dimensions mismatch");
  }
  const double scale = std::max(1.0, p.Q.cwiseAbs().maxCoeff());
  if ((p.Q - p.Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw NumericError("solve_qp: Q is not symmetric");
  }
  // Cholesky with a small diagonal shift certifies PSD up to -1e-9 * scale.
  Matrix shifted = 0.5 * (p.Q + p.Q.transpose());
  shifted.diagonal().array() += 1e-9 * scale;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) throw NumericError("solve_qp: Q is not positive semidefinite");
}

// Stacked form l <= A x <= u of the caller's constraints.
struct Stacked {
  Matrix P;
  Vector q;
  Matrix A;
  Vector l;
  Vector u;
  int n_eq = 0;
};

Stacked stack(const QPProblem& p) {
  Stacked s;
  const Eigen::Index n = p.Q.rows();
  s.P = p.Q + p.Q.transpose();  // 2Q, symmetrized
  s.q = p.q.size() ? p.q : Vector::Zero(n);
  const Eigen::Index m_eq = p.A_eq.rows(), m_in = p.A_ineq.rows();
  s.n_eq = static_cast<int>(m_eq);
  s.A.resize(m_eq + m_in, n);
  s.l.resize(m_eq + m_in);
  s.u.resize(m_eq + m_in);
  if (m_eq) {
    s.A.topRows(m_eq) = p.A_eq;
    s.l.head(m_eq) = p.b_eq;
    s.u.head(m_eq) = p.b_eq;
  }
  if (m_in) {
    s.A.bottomRows(m_in) = p.A_ineq;
    s.l.tail(m_in).setConstant(-kInf);
    s.u.tail(m_in) = p.b_ineq;
  }
  return s;
}

// Ruiz equilibration of the KKT matrix plus cost scaling.
struct Scaling {
  Vector D;  // variables: x = D xs
  Vector E;  // constraints: zs = E z
  double c = 1.0;
};

Scaling equilibrate(Stacked& s, int iterations) {
  const Eigen::Index n = s.P.rows(), m = s.A.rows();
  Scaling sc{Vector::Ones(n), Vector::Ones(m), 1.0};
  auto clip = [](double v) { return std::clamp(v, 1e-4, 1e4); };
  for (int it = 0; it < iterations; ++it) {
    Vector dv(n), ev(m);
    for (Eigen::Index j = 0; j < n; ++j) {
      double norm = s.P.col(j).cwiseAbs().maxCoeff();
      if (m) norm = std::max(norm, s.A.col(j).cwiseAbs().maxCoeff());
      dv(j) = norm > 0.0 ? 1.0 / std::sqrt(clip(norm)) : 1.0;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const double norm = s.A.row(i).cwiseAbs().maxCoeff();
      ev(i) = norm > 0.0 ? 1.0 / std::sqrt(clip(norm)) : 1.0;
    }
    s.P = dv.asDiagonal() * s.P * dv.asDiagonal();
    s.q = dv.cwiseProduct(s.q);
    if (m) s.A = ev.asDiagonal() * s.A * dv.asDiagonal();
    sc.D = sc.D.cwiseProduct(dv);
    sc.E = sc.E.cwiseProduct(ev);
  }
  double mean_col = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) mean_col += s.P.col(j).cwiseAbs().maxCoeff();
  mean_col = n ? mean_col / static_cast<double>(n) : 0.0;
  const double cost_norm = std::max(mean_col, inf_norm(s.q));
  sc.c = cost_norm > 0.0 ? 1.0 / clip(cost_norm) : 1.0;
  s.P *= sc.c;
  s.q *= sc.c;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isfinite(s.l(i))) s.l(i) *= sc.E(i);
    if (std::isfinite(s.u(i))) s.u(i) *= sc.E(i);
  }
  return sc;
}

struct Residuals {
  double prim = 0.0, dual = 0.0, eps_prim = 0.0, eps_dual = 0.0;
  bool within() const { return prim <= eps_prim && dual <= eps_dual; }
};

// Residuals of the unscaled problem at (x, z, y).
Residuals residuals(const Stacked& orig, const Vector& x, const Vector& z, const Vector& y, double tol) {
  Residuals r;
  const Vector Ax = orig.A * x;
  const Vector Px = orig.P * x;
  const Vector Aty = orig.A.transpose() * y;
  r.prim = inf_norm(Ax - z);
  r.dual = inf_norm(Px + orig.q + Aty);
  r.eps_prim = tol + tol * std::max(inf_norm(Ax), inf_norm(z));
  r.eps_dual = tol + tol * std::max({inf_norm(Px), inf_norm(Aty), inf_norm(orig.q)});
  return r;
}

double violation(const Stacked& orig, const Vector& x) {
  double worst = 0.0;
  const Vector Ax = orig.A * x;
  for (Eigen::Index i = 0; i < Ax.size(); ++i) {
    worst = std::max({worst, Ax(i) - orig.u(i), orig.l(i) - Ax(i)});
  }
  return worst;
}

struct Polished {
  bool ok = false;
  Vector x, y;
  Residuals res;
};

// Solves the equality QP on the guessed active set with a regularized KKT
// system and iterative refinement against the unregularized one.
Polished polish(const Stacked& orig, const Vector& z, const Vector& y, double tol) {
  const Eigen::Index n = orig.P.rows(), m = orig.A.rows();
  std::vector<Eigen::Index> act;
  std::vector<double> target;
  std::vector<int> side;  // -1 lower, +1 upper, 0 equality
  for (Eigen::Index i = 0; i < m; ++i) {
    if (orig.l(i) == orig.u(i)) {
      act.push_back(i);
      target.push_back(orig.l(i));
      side.push_back(0);
    } else if (std::isfinite(orig.l(i)) && z(i) - orig.l(i) < -y(i)) {
      act.push_back(i);
      target.push_back(orig.l(i));
      side.push_back(-1);
    } else if (std::isfinite(orig.u(i)) && orig.u(i) - z(i) < y(i)) {
      act.push_back(i);
      target.push_back(orig.u(i));
      side.push_back(+1);
    }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(act.size());
  Matrix K0 = Matrix::Zero(n + k, n + k);
  K0.topLeftCorner(n, n) = orig.P;
  for (Eigen::Index r = 0; r < k; ++r) {
    K0.block(n + r, 0, 1, n) = orig.A.row(act[r]);
    K0.block(0, n + r, n, 1) = orig.A.row(act[r]).transpose();
  }
  const double delta = 1e-9 * std::max(1.0, orig.P.cwiseAbs().maxCoeff());
  Matrix Kreg = K0;
  Kreg.topLeftCorner(n, n).diagonal().array() += delta;
  Kreg.bottomRightCorner(k, k).diagonal().array() -= delta;
  Vector rhs(n + k);
  rhs.head(n) = -orig.q;
  for (Eigen::Index r = 0; r < k; ++r) rhs(n + r) = target[r];

  Eigen::PartialPivLU<Matrix> lu(Kreg);
  Vector sol = lu.solve(rhs);
  for (int it = 0; it < 5; ++it) sol += lu.solve(rhs - K0 * sol);
  if (!sol.allFinite()) return {};

  Polished out;
  out.x = sol.head(n);
  out.y = Vector::Zero(m);
  for (Eigen::Index r = 0; r < k; ++r) out.y(act[r]) = sol(n + r);
  const Vector Ax = orig.A * out.x;
  Vector zp = Ax.cwiseMax(orig.l).cwiseMin(orig.u);
  out.res = residuals(orig, out.x, zp, out.y, tol);
  out.res.prim = std::max(0.0, violation(orig, out.x));
  const double y_tol = tol * std::max(1.0, inf_norm(out.y));
  bool signs_ok = true;
  for (Eigen::Index r = 0; r < k; ++r) {
    if (side[r] < 0 && out.y(act[r]) > y_tol) signs_ok = false;
    if (side[r] > 0 && out.y(act[r]) < -y_tol) signs_ok = false;
  }
  out.ok = signs_ok && out.res.within();
  return out;
}

}  // namespace

QPSolution solve_qp(const QPProblem& problem, const QPSettings& settings) {
  check_problem(problem);
  const Stacked orig = stack(problem);
  Stacked s = orig;
  const Scaling sc = equilibrate(s, settings.scaling_iterations);
  const Eigen::Index n = s.P.rows(), m = s.A.rows();

  Vector rho(m);
  double rho_base = settings.rho;
  auto set_rho = [&](double base) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (s.l(i) == s.u(i)) {
        rho(i) = kEqRhoFactor * base;
      } else if (!std::isfinite(s.l(i)) && !std::isfinite(s.u(i))) {
        rho(i) = kRhoMin;
      } else {
        rho(i) = base;
      }
    }
  };
  set_rho(rho_base);

  Eigen::LLT<Matrix> kkt;
  auto factor = [&]() {
    Matrix K = s.P;
    K.diagonal().array() += settings.sigma;
    if (m) K.noalias() += s.A.transpose() * rho.asDiagonal() * s.A;
    kkt.compute(K);
    if (kkt.info() != Eigen::Success) throw NumericError("solve_qp: KKT factorization failed");
  };
  factor();

  Vector x = Vector::Zero(n), z = Vector::Zero(m), y = Vector::Zero(m);
  Vector x_prev = x, y_prev = y;
  auto unscale_x = [&](const Vector& xs) -> Vector { return sc.D.cwiseProduct(xs); };
  auto unscale_z = [&](const Vector& zs) -> Vector { return zs.cwiseQuotient(sc.E); };
  auto unscale_y = [&](const Vector& ys) -> Vector { return sc.E.cwiseProduct(ys) / sc.c; };

  auto finish = [&](QPSolution sol) {
    sol.objective = sol.x.dot(problem.Q * sol.x) + (problem.q.size() ? problem.q.dot(sol.x) : 0.0);
    return sol;
  };
  auto split_y = [&](QPSolution& sol, const Vector& y_full) {
    sol.y_eq = y_full.head(orig.n_eq);
    sol.y_ineq = y_full.tail(m - orig.n_eq);
  };

  int infeas_since = -1, unbounded_since = -1;
  int last_polish = -1000000;
  QPSolution sol;
  if (settings.trace) *settings.trace << "iter,primal_res,dual_res,obj\n";
  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;
    Vector rhs = settings.sigma * x - s.q;
    if (m) rhs.noalias() += s.A.transpose() * (rho.cwiseProduct(z) - y);
    const Vector x_tilde = kkt.solve(rhs);
    const Vector z_tilde = s.A * x_tilde;
    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x;
    const Vector z_relax = settings.alpha * z_tilde + (1.0 - settings.alpha) * z;
    z = (z_relax + y.cwiseQuotient(rho)).cwiseMax(s.l).cwiseMin(s.u);
    y += rho.cwiseProduct(z_relax - z);

    const bool last = iter == settings.max_iter;
    if (iter % settings.check_interval != 0 && iter != 1 && !last) continue;

    const Vector xu = unscale_x(x), zu = unscale_z(z), yu = unscale_y(y);
    const Residuals res = residuals(orig, xu, zu, yu, settings.tol);
    if (settings.trace) {
      *settings.trace << iter << ',' << res.prim << ',' << res.dual << ','
                      << xu.dot(problem.Q * xu) + (problem.q.size() ? problem.q.dot(xu) : 0.0) << '\n';
    }

    if (settings.polish && iter - last_polish >= 10 * settings.check_interval) {
      const Residuals loose = residuals(orig, xu, zu, yu, settings.polish_trigger);
      if (loose.within()) {
        last_polish = iter;
        Polished pol = polish(orig, zu, yu, settings.tol);
        if (pol.ok) {
          sol.x = pol.x;
          split_y(sol, pol.y);
          sol.status = QPStatus::optimal;
          sol.primal_residual = pol.res.prim;
          sol.dual_residual = pol.res.dual;
          sol.iterations = iter;
          sol.polished = true;
          return finish(sol);
        }
      }
    }
    if (res.within()) {
      sol.x = xu;
      split_y(sol, yu);
      sol.status = QPStatus::optimal;
      sol.primal_residual = std::max(0.0, violation(orig, xu));
      sol.dual_residual = res.dual;
      sol.iterations = iter;
      return finish(sol);
    }

    // Primal infeasibility certificate from the dual iterate difference.
    const Vector dy = y - y_prev;
    const double dy_norm = inf_norm(sc.E.cwiseProduct(dy));
    bool cert = false;
    if (dy_norm > 1e-12) {
      double support = 0.0;
      bool finite = true;
      for (Eigen::Index i = 0; i < m && finite; ++i) {
        if (dy(i) > 0.0) {
          if (!std::isfinite(s.u(i))) finite = false; else support += s.u(i) * dy(i);
        } else if (dy(i) < 0.0) {
          if (!std::isfinite(s.l(i))) finite = false; else support += s.l(i) * dy(i);
        }
      }
      const double aty = inf_norm(sc.D.cwiseInverse().cwiseProduct(s.A.transpose() * dy));
      cert = finite && aty <= kInfeasTol * dy_norm && support < -kInfeasTol * dy_norm;
    }
    if (cert) {
      if (infeas_since < 0) infeas_since = iter;
      if (iter - infeas_since >= settings.infeasibility_patience) {
        sol.x = xu;
        split_y(sol, yu);
        sol.status = QPStatus::infeasible;
        sol.primal_residual = std::max(0.0, violation(orig, xu));
        sol.dual_residual = res.dual;
        sol.iterations = iter;
        return finish(sol);
      }
    } else {
      infeas_since = -1;
    }

    // Dual infeasibility (unbounded objective) from the primal difference.
    const Vector dx = x - x_prev;
    const double dx_norm = inf_norm(sc.D.cwiseProduct(dx));
    bool ucert = false;
    if (dx_norm > 1e-12) {
      const double pdx = inf_norm(sc.D.cwiseInverse().cwiseProduct(s.P * dx)) / sc.c;
      const double qdx = s.q.dot(dx) / sc.c;
      if (pdx <= kInfeasTol * dx_norm && qdx < -kInfeasTol * dx_norm) {
        const Vector adx = sc.E.cwiseInverse().cwiseProduct(s.A * dx);
        ucert = true;
        for (Eigen::Index i = 0; i < m && ucert; ++i) {
          const double lim = kInfeasTol * dx_norm;
          if (std::isfinite(orig.u(i)) && adx(i) > lim) ucert = false;
          if (std::isfinite(orig.l(i)) && adx(i) < -lim) ucert = false;
        }
      }
    }
    if (ucert) {
      if (unbounded_since < 0) unbounded_since = iter;
      if (iter - unbounded_since >= settings.infeasibility_patience) {
        sol.x = xu;
        split_y(sol, yu);
        sol.status = QPStatus::unbounded;
        sol.primal_residual = std::max(0.0, violation(orig, xu));
        sol.dual_residual = res.dual;
        sol.iterations = iter;
        return finish(sol);
      }
    } else {
      unbounded_since = -1;
    }

    if (last) {
      sol.x = xu;
      split_y(sol, yu);
      sol.status = QPStatus::max_iter;
      sol.primal_residual = std::max(0.0, violation(orig, xu));
      sol.dual_residual = res.dual;
      sol.iterations = iter;
      return finish(sol);
    }

    // Rho adaptation balances the scaled primal and dual residuals.
    if (m) {
      const Vector Ax = s.A * x;
      const Vector Px = s.P * x;
      const Vector Aty = s.A.transpose() * y;
      const double prim_n = inf_norm(Ax - z) / std::max({inf_norm(Ax), inf_norm(z), 1e-12});
      const double dual_n = inf_norm(Px + s.q + Aty) /
                            std::max({inf_norm(Px), inf_norm(Aty), inf_norm(s.q), 1e-12});
      if (prim_n > 0.0 && dual_n > 0.0) {
        const double proposal = std::clamp(rho_base * std::sqrt(prim_n / dual_n), kRhoMin, kRhoMax);
        if (proposal > 5.0 * rho_base || proposal < 0.2 * rho_base) {
          rho_base = proposal;
          set_rho(rho_base);
          factor();
        }
      }
    }
  }
  return finish(sol);
}

}  // namespace gridshield
