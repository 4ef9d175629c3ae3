#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rcnls/solver/qp.hpp"
#include "../support/oracles.hpp"

using namespace rcnls;
using namespace rcnls::solver;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
SolverSettings defaults() { return SolverSettings{}; }
} // namespace

TEST_CASE("unconstrained quadratic") {
  QuadraticProgram qp;
  qp.q = Matrix::Identity(3, 3);
  qp.c = Vector(3);
  qp.c << -1.0, 2.0, -0.5;
  const SolveReport r = solve_qp(qp, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK((r.x + qp.c).cwiseAbs().maxCoeff() < 1e-7); // x* = -c
  CHECK(r.objective == doctest::Approx(-0.5 * qp.c.squaredNorm()).epsilon(1e-9));
}

TEST_CASE("projection onto the simplex via one equality") {
  // min 0.5||x||^2 s.t. sum x = 1 -> x_i = 1/n.
  const Index n = 4;
  QuadraticProgram qp;
  qp.q = Matrix::Identity(n, n);
  qp.c = Vector::Zero(n);
  qp.a_eq = Matrix::Ones(1, n);
  qp.b_eq = Vector::Ones(1);
  const SolveReport r = solve_qp(qp, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  for (Index j = 0; j < n; ++j) CHECK(r.x[j] == doctest::Approx(0.25).epsilon(1e-8));
  REQUIRE(r.dual_eq.size() == 1);
  CHECK(r.dual_eq[0] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("active inequality") {
  // min 0.5||x||^2 s.t. x1 + x2 >= 2 -> (1,1).
  QuadraticProgram qp;
  qp.q = Matrix::Identity(2, 2);
  qp.c = Vector::Zero(2);
  qp.a_in = Matrix(1, 2);
  qp.a_in << -1.0, -1.0;
  qp.b_in = Vector::Constant(1, -2.0);
  const SolveReport r = solve_qp(qp, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("nonnegativity clips the unconstrained minimizer") {
  QuadraticProgram qp;
  qp.q = Matrix::Identity(2, 2);
  qp.c = Vector(2);
  qp.c << 3.0, -1.0; // unconstrained solution (-3, 1)
  qp.lo = Vector::Zero(2);
  qp.up = Vector::Constant(2, kInf);
  const SolveReport r = solve_qp(qp, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("pinned variables via equal bounds") {
  QuadraticProgram qp;
  qp.q = Matrix::Identity(2, 2);
  qp.c = Vector::Zero(2);
  qp.lo = Vector(2);
  qp.lo << 0.7, -kInf;
  qp.up = Vector(2);
  qp.up << 0.7, kInf;
  const SolveReport r = solve_qp(qp, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(0.7).epsilon(1e-7));
  CHECK(std::abs(r.x[1]) < 1e-7);
}

TEST_CASE("random strictly convex problems match active-set enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    const Index n = 4;
    const Index m = 6;
    Matrix l(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) l(i, j) = u(rng);
    Matrix q = l * l.transpose() + 0.5 * Matrix::Identity(n, n);
    Vector c(n);
    for (Index j = 0; j < n; ++j) c[j] = u(rng);
    Matrix a(m, n);
    Vector b(m);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) a(i, j) = u(rng);
      b[i] = 0.3 + std::abs(u(rng));
    }
    QuadraticProgram qp;
    qp.q = q;
    qp.c = c;
    qp.a_in = a;
    qp.b_in = b;
    const SolveReport r = solve_qp(qp, defaults());
    REQUIRE(r.status == SolveStatus::optimal);
    const auto oracle = testing::active_set_qp_min(q, c, a, b);
    REQUIRE(oracle.has_value());
    CHECK(r.objective == doctest::Approx(*oracle).epsilon(1e-6));
    CHECK(r.max_violation <= 1e-7);
  }
}
