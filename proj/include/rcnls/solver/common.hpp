#pragma once

#include <string>
#include <vector>

#include "rcnls/types.hpp"

namespace rcnls::solver {

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit, stationary };

std::string to_string(SolveStatus status);

//! Uniform result record for the LP/QP/NLP entry points. `status == optimal`
//! guarantees max_violation <= the feasibility tolerance and kkt_residual <=
//! the optimality tolerance used for the solve.
struct SolveReport {
  SolveStatus status = SolveStatus::iteration_limit;
  Vector x;
  double objective = 0.0;
  double max_violation = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  double wall_time_s = 0.0;
  //! Row duals (LP/QP): equality rows then inequality rows, in problem order.
  Vector dual_eq;
  Vector dual_in;
  //! Best objective after each multi-start attempt (NLP); non-increasing.
  std::vector<double> incumbent_trace;
  std::string message;
};

} // namespace rcnls::solver
