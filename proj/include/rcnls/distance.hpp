#pragma once

#include <string>
#include <vector>

#include "rcnls/cnls.hpp"
#include "rcnls/panel.hpp"

//! Evaluation of a fitted distance function at arbitrary points through the
//! multiplier linear program over the frontier-projected observations. The
//! projected data span a convex (conical for the intercept-free models)
//! reference technology; each evaluation prices the queried point against it.
namespace rcnls {

//! One multiplier-program evaluation. `value` is the input distance estimate,
//! homogeneous of degree one in x and equal to 1 on the estimated frontier;
//! `lp_objective` is the raw optimum of the pricing program (its reciprocal).
struct DistanceEvaluation {
  Vector x;
  Vector y;
  double value = 0.0;
  double lp_objective = 0.0;
  Vector beta;   // input shadow prices, normalized to beta'x = 1
  Vector gamma;  // output shadow prices
  double omega = 0.0;  // free intercept; fixed at 0 for conical models
  std::vector<Index> binding;  // reference observations priced exactly
  solver::SolveStatus status = solver::SolveStatus::optimal;
};

//! Frontier slice in input space at a fixed output bundle.
struct IsoquantTrace {
  Vector y;
  Matrix points;  // rows (x1, x2) with value 1, ascending in x1
  bool convex_ok = true;
  std::string note;
};

//! Price the point (x, y) against the technology spanned by the fitted
//! solution's projected observations:
//!   max gamma'y - omega  s.t.  beta'x = 1,
//!       omega + beta'(exp(-eps_h) x_h) - gamma'y_h >= 0 for every h,
//!       beta, gamma >= 0 (omega = 0 when the model has no intercepts),
//! and report the distance estimate 1 / optimum. Throws when x is not
//! strictly positive or the program is unbounded (an output direction
//! without reference support).
DistanceEvaluation evaluate_distance(const CnlsSolution& solution, const ProductionPanel& panel,
                                     ConstVectorRef x, ConstVectorRef y);

//! Observations with inputs scaled onto the estimated frontier by
//! exp(-residual); outputs and all other columns are unchanged.
ProductionPanel project_to_frontier(const CnlsSolution& solution, const ProductionPanel& panel);

//! Trace the two-input isoquant {x : value(x, y) = 1} over a grid of
//! `resolution` x1 values spanning [x_lo, x_hi], solving for x2 in the same
//! interval by bisection. Grid points without a root are omitted; an empty
//! trace carries a diagnostic note. The trace is audited for convexity
//! toward the origin.
IsoquantTrace trace_isoquant(const CnlsSolution& solution, const ProductionPanel& panel,
                             ConstVectorRef y, double x_lo, double x_hi, Index resolution = 200);

} // namespace rcnls
