#pragma once

#include "rcnls/panel.hpp"
#include "rcnls/solver/common.hpp"

namespace rcnls::solver {

//! General-form linear program
//!   optimize c'x  s.t.  a_eq x = b_eq,  a_in x <= b_in,  lo <= x <= up.
//! Empty matrices stand for "no constraints of that kind"; empty bound
//! vectors mean free variables. +-infinity entries are allowed in lo/up.
struct LinearProgram {
  bool maximize = false;
  Vector c;
  Matrix a_eq;
  Vector b_eq;
  Matrix a_in;
  Vector b_in;
  Vector lo;
  Vector up;
};

//! Primal-dual interior-point solve (homogeneous self-dual embedding with
//! Mehrotra predictor-corrector steps). Infeasibility and unboundedness are
//! reported through SolveReport.status rather than exceptions.
//! Row duals are reported for the problem in its stated sense: at optimality
//! c = a_eq' dual_eq + a_in' dual_in + bound multipliers, with
//! dual_in <= 0 for a minimization and >= 0 for a maximization.
SolveReport solve_lp(const LinearProgram& problem, const SolverSettings& settings = {});

} // namespace rcnls::solver
