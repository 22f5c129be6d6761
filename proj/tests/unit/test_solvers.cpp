#include <doctest.h>

#include <random>
#include <sstream>

#include "gridshield/error.hpp"
#include "gridshield/grid_model.hpp"
#include "gridshield/random.hpp"
#include "gridshield/solvers.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gridshield;

TEST_CASE("equality QP: minimize x^2 subject to x = 3") {
  QPProblem p;
  p.Q = Matrix::Identity(1, 1);
  p.A_eq = Matrix::Ones(1, 1);
  p.b_eq = Vector::Constant(1, 3.0);
  const QPSolution s = solve_qp(p);
  CHECK(s.status == QPStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(s.objective == doctest::Approx(9.0).epsilon(1e-8));
  const Vector x = solve_kkt_equality(p.Q, p.A_eq, p.b_eq);
  CHECK(x(0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("path Laplacian with c_1 = 1 gives the constant vector") {
  const Matrix L = build_laplacian(testing::path3());
  Matrix A = Matrix::Zero(1, 3);
  A(0, 0) = 1.0;
  const Vector b = Vector::Ones(1);
  QPProblem p{L, Vector(), A, b, Matrix(0, 3), Vector(0)};
  const QPSolution s = solve_qp(p);
  CHECK(s.status == QPStatus::optimal);
  CHECK((s.x - Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(s.objective < 1e-8);
}

TEST_CASE("KKT solve of x1 + x2 = 2") {
  const Vector x = solve_kkt_equality(Matrix::Identity(2, 2), Matrix::Ones(1, 2), Vector::Constant(1, 2.0));
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == doctest::Approx(1.0));
}

TEST_CASE("KKT solve tolerates redundant rows and rejects inconsistent ones") {
  Matrix A(2, 2);
  A << 1, 1, 2, 2;
  Vector b(2);
  b << 2, 4;
  const Vector x = solve_kkt_equality(Matrix::Identity(2, 2), A, b);
  CHECK(x(0) == doctest::Approx(1.0));
  b << 2, 5;
  CHECK_THROWS_AS(solve_kkt_equality(Matrix::Identity(2, 2), A, b), NumericError);
  // Singular reduced Hessian: the minimizer is not unique.
  CHECK_THROWS_AS(solve_kkt_equality(Matrix::Zero(2, 2), Matrix::Ones(1, 2), Vector::Ones(1)), NumericError);
}

TEST_CASE("QP input validation") {
  QPProblem p;
  p.Q = Matrix::Identity(2, 2);
  p.A_eq = Matrix::Ones(1, 3);
  p.b_eq = Vector::Ones(1);
  CHECK_THROWS_AS(solve_qp(p), ConfigError);
  QPProblem indefinite;
  indefinite.Q = -Matrix::Identity(2, 2);
  CHECK_THROWS_AS(solve_qp(indefinite), NumericError);
}

TEST_CASE("QP detects infeasibility") {
  QPProblem p;
  p.Q = Matrix::Identity(1, 1);
  p.A_ineq.resize(2, 1);
  p.A_ineq << 1, -1;
  p.b_ineq.resize(2);
  p.b_ineq << 0, -1;  // x <= 0 and x >= 1
  CHECK(solve_qp(p).status == QPStatus::infeasible);
}

TEST_CASE("QP with an active inequality") {
  // min (x - 2)^2 s.t. x <= 1, written as x^2 - 4x.
  QPProblem p;
  p.Q = Matrix::Identity(1, 1);
  p.q = Vector::Constant(1, -4.0);
  p.A_ineq = Matrix::Ones(1, 1);
  p.b_ineq = Vector::Ones(1);
  const QPSolution s = solve_qp(p);
  REQUIRE(s.status == QPStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.y_ineq(0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("QP trace writes one line per residual check") {
  QPProblem p;
  p.Q = Matrix::Identity(2, 2);
  p.A_ineq = Matrix::Ones(1, 2);
  p.b_ineq = Vector::Constant(1, -1.0);
  std::ostringstream trace;
  QPSettings settings;
  settings.trace = &trace;
  const QPSolution s = solve_qp(p, settings);
  CHECK(s.status == QPStatus::optimal);
  CHECK(trace.str().rfind("iter,primal_res,dual_res,obj\n", 0) == 0);
}

TEST_CASE("LP: minimize x subject to x >= 1") {
  Matrix A(1, 1);
  A << -1;
  const LPResult r = solve_lp(Vector::Ones(1), Matrix(0, 1), Vector(0), A, Vector::Constant(1, -1.0));
  CHECK(r.status == LPStatus::optimal);
  CHECK(r.x(0) == doctest::Approx(1.0));
  CHECK(r.objective == doctest::Approx(1.0));
}

TEST_CASE("LP: l1 norm minimization with x_1 = 1") {
  // x = p - m, min sum(p + m) s.t. (p - m)_1 = 1 on three variables.
  Matrix A = Matrix::Zero(1, 6);
  A(0, 0) = 1.0;
  A(0, 3) = -1.0;
  const LPResult r = solve_lp(Vector::Ones(6), A, Vector::Ones(1), Matrix(0, 6), Vector(0));
  CHECK(r.status == LPStatus::optimal);
  CHECK(r.objective == doctest::Approx(1.0));
}

TEST_CASE("LP status reporting") {
  Matrix A(1, 1);
  A << 1;
  // x <= -1 with x >= 0.
  CHECK(solve_lp(Vector::Ones(1), Matrix(0, 1), Vector(0), A, Vector::Constant(1, -1.0)).status ==
        LPStatus::infeasible);
  CHECK(solve_lp(-Vector::Ones(1), Matrix(0, 1), Vector(0), Matrix(0, 1), Vector(0)).status ==
        LPStatus::unbounded);
}

TEST_CASE("random equality QPs match the KKT oracle") {
  Rng rng(301);
  std::uniform_int_distribution<int> dim(2, 20);
  for (int t = 0; t < 40; ++t) {
    const int n = dim(rng);
    const int m = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const Matrix M = standard_normal(rng, n * n).reshaped(n, n);
    const Matrix Q = M * M.transpose() + 0.1 * Matrix::Identity(n, n);
    const Vector q = standard_normal(rng, n);
    const Matrix A = standard_normal(rng, m * n).reshaped(m, n);
    const Vector b = standard_normal(rng, m);
    const Vector ref = testing::kkt_oracle(Q, q, A, b);
    CHECK((solve_kkt_equality(Q, A, b, q) - ref).cwiseAbs().maxCoeff() < 1e-8);
    const QPSolution s = solve_qp({Q, q, A, b, Matrix(0, n), Vector(0)});
    REQUIRE(s.status == QPStatus::optimal);
    CHECK((s.x - ref).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("random LPs match vertex enumeration") {
  Rng rng(302);
  for (int t = 0; t < 40; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    const int mi = std::uniform_int_distribution<int>(1, 4)(rng);
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
    REQUIRE(ref.has_value());
    const LPResult r = solve_lp(cost, Ae, be, Ai, bi);
    REQUIRE(r.status == LPStatus::optimal);
    CHECK(std::abs(r.objective - *ref) < 1e-9);
  }
}

TEST_CASE("QP duality gap and residuals are small at the reported optimum") {
  Rng rng(303);
  for (int t = 0; t < 20; ++t) {
    const int n = 6;
    const Matrix M = standard_normal(rng, n * n).reshaped(n, n);
    const Matrix Q = M * M.transpose() + 0.1 * Matrix::Identity(n, n);
    const Vector q = standard_normal(rng, n);
    const Matrix G = standard_normal(rng, 4 * n).reshaped(4, n);
    const Vector h = standard_normal(rng, 4).cwiseAbs();
    const QPSolution s = solve_qp({Q, q, Matrix(0, n), Vector(0), G, h});
    REQUIRE(s.status == QPStatus::optimal);
    CHECK(s.primal_residual < 1e-7);
    CHECK(s.dual_residual < 1e-6);
    CHECK(s.y_ineq.minCoeff() >= -1e-9);
    // Complementary slackness closes the Lagrangian gap.
    CHECK(std::abs(s.y_ineq.dot(G * s.x - h)) < 1e-6);
  }
}

TEST_CASE("solve_qp is deterministic") {
  Rng rng(304);
  const int n = 8;
  const Matrix M = standard_normal(rng, n * n).reshaped(n, n);
  const QPProblem p{M * M.transpose(), standard_normal(rng, n), Matrix::Ones(1, n), Vector::Ones(1),
                    Matrix::Identity(n, n), Vector::Constant(n, 0.5)};
  const QPSolution a = solve_qp(p);
  const QPSolution b = solve_qp(p);
  CHECK(a.iterations == b.iterations);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
}
