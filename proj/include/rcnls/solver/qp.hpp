#pragma once

#include "rcnls/panel.hpp"
#include "rcnls/solver/common.hpp"

namespace rcnls::solver {

//! Convex quadratic program
//!   min 0.5 x'Qx + c'x  s.t.  a_eq x = b_eq,  a_in x <= b_in,  lo <= x <= up.
//! Q must be symmetric positive semidefinite.
struct QuadraticProgram {
  Matrix q;
  Vector c;
  Matrix a_eq;
  Vector b_eq;
  Matrix a_in;
  Vector b_in;
  Vector lo;
  Vector up;
};

//! Dense primal-dual interior-point solve (Mehrotra predictor-corrector on
//! the perturbed KKT system). Intended for the small structured QPs the
//! estimators generate; infeasible problems surface as iteration-limit with
//! a diagnostic message.
SolveReport solve_qp(const QuadraticProgram& problem, const SolverSettings& settings = {});

} // namespace rcnls::solver
