#include <doctest.h>

#include <cmath>
#include <limits>

#include "rcnls/solver/nlp.hpp"

using namespace rcnls;
using namespace rcnls::solver;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
SolverSettings defaults() { return SolverSettings{}; }
} // namespace

TEST_CASE("bound-constrained parabola") {
  SmoothNlp p;
  p.n = 1;
  p.objective = [](ConstVectorRef x, Vector* g) {
    if (g) (*g)[0] = 2.0 * (x[0] - 2.0);
    return (x[0] - 2.0) * (x[0] - 2.0);
  };
  p.lo = Vector::Zero(1);
  p.up = Vector::Constant(1, kInf);
  p.x0 = Vector::Constant(1, 5.0);
  const SolveReport r = solve_nlp(p, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(r.objective == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("monotone objective rides to its upper bound") {
  SmoothNlp p;
  p.n = 1;
  p.objective = [](ConstVectorRef x, Vector* g) {
    if (g) (*g)[0] = -1.0 / x[0];
    return -std::log(x[0]);
  };
  p.lo = Vector::Constant(1, 1e-6);
  p.up = Vector::Constant(1, 5.0);
  p.x0 = Vector::Ones(1);
  const SolveReport r = solve_nlp(p, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("binding smooth inequality") {
  // min x1^2 + x2^2 s.t. x1 + x2 >= 1, encoded as c(x) = 1 - x1 - x2 <= 0.
  SmoothNlp p;
  p.n = 2;
  p.objective = [](ConstVectorRef x, Vector* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  p.n_ineq = 1;
  p.ineq_values = [](ConstVectorRef x, Vector& c) { c[0] = 1.0 - x[0] - x[1]; };
  p.ineq_jt_product = [](ConstVectorRef, ConstVectorRef w, Vector& out) {
    out.setConstant(-w[0]);
  };
  p.x0 = Vector::Zero(2);
  const SolveReport r = solve_nlp(p, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(r.max_violation <= 1e-8);
}

TEST_CASE("equality constraint") {
  // min x1^2 + 4 x2^2 s.t. x1 + x2 = 1 -> x = (0.8, 0.2).
  SmoothNlp p;
  p.n = 2;
  p.objective = [](ConstVectorRef x, Vector* g) {
    if (g) {
      (*g)[0] = 2.0 * x[0];
      (*g)[1] = 8.0 * x[1];
    }
    return x[0] * x[0] + 4.0 * x[1] * x[1];
  };
  p.n_eq = 1;
  p.eq_values = [](ConstVectorRef x, Vector& c) { c[0] = x[0] + x[1] - 1.0; };
  p.eq_jt_product = [](ConstVectorRef, ConstVectorRef w, Vector& out) { out.setConstant(w[0]); };
  p.x0 = Vector::Zero(2);
  const SolveReport r = solve_nlp(p, defaults());
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(0.8).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(0.2).epsilon(1e-5));
}

TEST_CASE("an inconsistent constraint set is flagged") {
  SmoothNlp p;
  p.n = 1;
  p.objective = [](ConstVectorRef x, Vector* g) {
    if (g) (*g)[0] = 2.0 * x[0];
    return x[0] * x[0];
  };
  p.n_ineq = 1;
  p.ineq_values = [](ConstVectorRef x, Vector& c) { c[0] = x[0] * x[0] + 1.0; };
  p.ineq_jt_product = [](ConstVectorRef x, ConstVectorRef w, Vector& out) {
    out[0] = 2.0 * x[0] * w[0];
  };
  p.x0 = Vector::Zero(1);
  const SolveReport r = solve_nlp(p, defaults());
  CHECK(r.status == SolveStatus::infeasible);
}

TEST_CASE("multistart incumbents never get worse") {
  SmoothNlp p;
  p.n = 1;
  // Two basins: global near -1.05, local near +0.95.
  p.objective = [](ConstVectorRef x, Vector* g) {
    const double t = x[0];
    if (g) (*g)[0] = 4.0 * t * (t * t - 1.0) + 0.3;
    return (t * t - 1.0) * (t * t - 1.0) + 0.3 * t;
  };
  p.lo = Vector::Constant(1, -4.0);
  p.up = Vector::Constant(1, 4.0);
  p.x0 = Vector::Constant(1, 0.9);
  SolverSettings s = defaults();
  s.multistart = 6;
  const SolveReport r = solve_nlp(p, s);
  REQUIRE(r.status == SolveStatus::optimal);
  REQUIRE(r.incumbent_trace.size() == 6);
  for (std::size_t k = 1; k < r.incumbent_trace.size(); ++k)
    CHECK(r.incumbent_trace[k] <= r.incumbent_trace[k - 1] + 1e-12);
  // Every start lands in some stationary point; the trace must end at least as
  // good as the deterministic first start.
  CHECK(r.objective <= r.incumbent_trace.front() + 1e-12);
}

TEST_CASE("derivative audit rejects a wrong gradient") {
  SmoothNlp p;
  p.n = 1;
  p.objective = [](ConstVectorRef x, Vector* g) {
    if (g) (*g)[0] = 1.0; // wrong on purpose
    return x[0] * x[0];
  };
  p.x0 = Vector::Constant(1, 0.8);
  CHECK_THROWS_AS(check_derivatives(p, p.x0, 1e-6), std::runtime_error);

  SmoothNlp ok = p;
  ok.objective = [](ConstVectorRef x, Vector* g) {
    if (g) (*g)[0] = 2.0 * x[0];
    return x[0] * x[0];
  };
  CHECK_NOTHROW(check_derivatives(ok, ok.x0, 1e-5));
}

TEST_CASE("callable validation") {
  SmoothNlp p;
  p.n = 2;
  p.x0 = Vector::Zero(2);
  CHECK_THROWS_AS(solve_nlp(p, defaults()), std::invalid_argument); // no objective
  p.objective = [](ConstVectorRef x, Vector* g) {
    if (g) g->setZero();
    return 0.0;
  };
  p.x0 = Vector::Zero(3); // wrong length
  CHECK_THROWS_AS(solve_nlp(p, defaults()), std::invalid_argument);
}
