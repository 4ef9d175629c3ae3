#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rcnls/solver/lp.hpp"
#include "../support/oracles.hpp"

using namespace rcnls;
using namespace rcnls::solver;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

SolverSettings defaults() { return SolverSettings{}; }
} // namespace

TEST_CASE("one-variable maximum at an upper bound") {
  LinearProgram lp;
  lp.maximize = true;
  lp.c = Vector::Ones(1);
  lp.lo = Vector::Zero(1);
  lp.up = Vector::Constant(1, 3.0);
  const SolveReport r = solve_lp(lp, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.objective == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(r.x[0] == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("the same maximum expressed with an inequality row") {
  LinearProgram lp;
  lp.maximize = true;
  lp.c = Vector::Ones(1);
  lp.a_in = Matrix::Ones(1, 1);
  lp.b_in = Vector::Constant(1, 3.0);
  lp.lo = Vector::Zero(1);
  lp.up = Vector::Constant(1, kInf);
  const SolveReport r = solve_lp(lp, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.objective == doctest::Approx(3.0).epsilon(1e-9));
  REQUIRE(r.dual_in.size() == 1);
  // Max problem: multiplier on a binding <= row is nonnegative and prices the objective.
  CHECK(r.dual_in[0] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("contradictory inequalities are reported infeasible") {
  LinearProgram lp;
  lp.maximize = false;
  lp.c = Vector::Zero(1);
  lp.a_in = Matrix(2, 1);
  lp.a_in << 1.0, -1.0; // y <= 0 and -y <= -1
  lp.b_in = Vector(2);
  lp.b_in << 0.0, -1.0;
  const SolveReport r = solve_lp(lp, defaults());
  CHECK(r.status == SolveStatus::infeasible);
}

TEST_CASE("unbounded ray is detected") {
  LinearProgram lp;
  lp.maximize = true;
  lp.c = Vector::Ones(1);
  lp.lo = Vector::Zero(1);
  lp.up = Vector::Constant(1, kInf);
  const SolveReport r = solve_lp(lp, defaults());
  CHECK(r.status == SolveStatus::unbounded);
}

TEST_CASE("equality rows carry exact duals") {
  // min x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0  ->  x = (1, 0), eq dual 1.
  LinearProgram lp;
  lp.maximize = false;
  lp.c = Vector(2);
  lp.c << 1.0, 2.0;
  lp.a_eq = Matrix::Ones(1, 2);
  lp.b_eq = Vector::Ones(1);
  lp.lo = Vector::Zero(2);
  lp.up = Vector::Constant(2, kInf);
  const SolveReport r = solve_lp(lp, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.x[1] == doctest::Approx(0.0).epsilon(1e-7));
  REQUIRE(r.dual_eq.size() == 1);
  CHECK(r.dual_eq[0] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("free variables are handled") {
  // min |structure|: min x1 s.t. x1 >= x2 - 3, x2 = 2, x1 free, x2 free.
  LinearProgram lp;
  lp.maximize = false;
  lp.c = Vector(2);
  lp.c << 1.0, 0.0;
  lp.a_in = Matrix(1, 2);
  lp.a_in << -1.0, 1.0; // x2 - x1 <= 3
  lp.b_in = Vector::Constant(1, 3.0);
  lp.a_eq = Matrix(1, 2);
  lp.a_eq << 0.0, 1.0;
  lp.b_eq = Vector::Constant(1, 2.0);
  const SolveReport r = solve_lp(lp, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.objective == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("random dense problems match vertex enumeration") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 6; ++rep) {
    const Index n = 5;
    const Index m = 8;
    Vector c(n);
    for (Index j = 0; j < n; ++j) c[j] = u(rng);
    Matrix a(m, n);
    Vector b(m);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) a(i, j) = u(rng);
      b[i] = 1.0 + 0.5 * std::abs(u(rng)); // keeps the origin strictly feasible
    }

    LinearProgram lp;
    lp.maximize = false;
    lp.c = c;
    lp.a_in = a;
    lp.b_in = b;
    lp.lo = Vector::Constant(n, -10.0);
    lp.up = Vector::Constant(n, 10.0);
    const SolveReport r = solve_lp(lp, defaults());
    REQUIRE(r.status == SolveStatus::optimal);

    // Oracle operates on the <= row union of constraints and box faces.
    Matrix rows(m + 2 * n, n);
    Vector rhs(m + 2 * n);
    rows.topRows(m) = a;
    rhs.head(m) = b;
    rows.middleRows(m, n) = Matrix::Identity(n, n);
    rhs.segment(m, n).setConstant(10.0);
    rows.bottomRows(n) = -Matrix::Identity(n, n);
    rhs.tail(n).setConstant(10.0);
    const auto oracle = testing::vertex_enum_lp_min(c, rows, rhs);
    REQUIRE(oracle.has_value());
    CHECK(r.objective == doctest::Approx(*oracle).epsilon(1e-8));

    // Duality gap bound from the contract.
    CHECK(r.kkt_residual <= 1e-8 * (1.0 + std::abs(r.objective)));
    CHECK(r.max_violation <= 1e-8);
  }
}

TEST_CASE("solutions are deterministic across repeated calls") {
  LinearProgram lp;
  lp.maximize = false;
  lp.c = Vector(3);
  lp.c << 1.0, 1.0, 1.0;
  lp.a_in = Matrix(2, 3);
  lp.a_in << -1.0, -1.0, 0.0, 0.0, -1.0, -1.0;
  lp.b_in = Vector(2);
  lp.b_in << -1.0, -1.0;
  lp.lo = Vector::Zero(3);
  lp.up = Vector::Constant(3, kInf);
  const SolveReport r1 = solve_lp(lp, defaults());
  const SolveReport r2 = solve_lp(lp, defaults());
  REQUIRE(r1.status == SolveStatus::optimal);
  CHECK(r1.objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK((r1.x - r2.x).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}
