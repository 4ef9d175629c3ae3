#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/SparseCore>

#include "rcnls/panel.hpp"
#include "rcnls/solver/common.hpp"

namespace rcnls::solver {

using SparseMatrix = Eigen::SparseMatrix<double>;
using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

//! Smooth nonlinear program
//!   min f(x)  s.t.  c_in(x) <= 0,  c_eq(x) = 0,  lo <= x <= up.
//! Constraints are supplied as a value callable plus an adjoint-product
//! callable (w -> J(x)'w), which keeps the interface cheap for the very
//! sparse constraint blocks the CNLS programs generate.
struct SmoothNlp {
  Index n = 0;

  //! Returns f(x); fills *grad with the gradient when non-null.
  std::function<double(ConstVectorRef, Vector*)> objective;

  Index n_ineq = 0;
  std::function<void(ConstVectorRef, Vector&)> ineq_values;
  std::function<void(ConstVectorRef, ConstVectorRef, Vector&)> ineq_jt_product;

  Index n_eq = 0;
  std::function<void(ConstVectorRef, Vector&)> eq_values;
  std::function<void(ConstVectorRef, ConstVectorRef, Vector&)> eq_jt_product;

  Vector lo, up;  // empty = unbounded
  Vector x0;

  //! Optional second-order structure. When `linear_ineq` holds the constant
  //! Jacobian of the inequality block (rows match ineq_values) and
  //! `objective_hess` appends the Hessian of f in triplet form, the inner
  //! minimizer switches from projected L-BFGS to a projected semismooth
  //! Newton method with a sparse factorization.
  std::shared_ptr<const RowSparseMatrix> linear_ineq;
  std::function<void(ConstVectorRef, std::vector<Triplet>&)> objective_hess;
};

//! Augmented-Lagrangian solve (Powell-Hestenes-Rockafellar multipliers) with
//! projected limited-memory BFGS inner minimization and deterministic
//! multi-start. Returns the best KKT point found across starts; the
//! incumbent objective trace across starts is recorded in the report.
SolveReport solve_nlp(const SmoothNlp& problem, const SolverSettings& settings = {});

//! Central finite-difference audit of the objective gradient and the
//! constraint adjoint products at x. Throws std::runtime_error on a relative
//! mismatch above `tol`. Invoked automatically when
//! SolverSettings::check_gradients is set.
void check_derivatives(const SmoothNlp& problem, ConstVectorRef x, double tol = 1e-4);

} // namespace rcnls::solver
