#pragma once

#include <optional>

#include "rcnls/panel.hpp"
#include "rcnls/solver/common.hpp"
#include "rcnls/types.hpp"

//! Convex nonparametric least-squares estimators for radial distance
//! functions. All fitters minimize the sum of squared residuals of a
//! log-linear regression whose nonparametric part is a piecewise-linear
//! concave (input orientation) or convex (output orientation) function
//! represented by per-observation supporting hyperplanes tied together by
//! Afriat inequalities.
namespace rcnls {

struct CnlsDiagnostics {
  //! Largest violation of the full pairwise hyperplane system at the solution.
  double afriat_max_violation = 0.0;
  //! Smallest fitted chi (must stay above the positivity floor).
  double chi_min = 0.0;
  //! Stationarity residual reported by the smooth solver.
  double kkt_residual = 0.0;
  //! Per-regressor residual dot products (log-ratio columns first, then any
  //! contextual columns). Zero for orthogonality-enforcing fits.
  Vector orthogonality;
  //! Output-orientation only: false when the midpoint audit finds an output
  //! set that is not convex. Always true for input-oriented fits.
  bool convexity_ok = true;
  solver::SolveStatus status = solver::SolveStatus::optimal;
  Index nlp_iterations = 0;
  Index working_set_size = 0;
  Index scan_rounds = 0;
  double wall_time_s = 0.0;
};

//! Fitted CNLS model. `beta` rows are subgradients with respect to the
//! normalized inputs, `gamma` rows with respect to the outputs. `delta`
//! holds the log-ratio coefficients (inputs or outputs depending on the
//! orientation); `lambda_ctx` the contextual-variable coefficients of the
//! pooled panel model. `chi` is the fitted hyperplane value per observation.
struct CnlsSolution {
  ModelKind model_kind = ModelKind::radial_cnls;
  Index numeraire_index = 0;
  Vector d_weights;

  Vector alpha;      // n intercepts; empty for the conical panel model
  Matrix beta;       // n x M
  Matrix gamma;      // n x S
  Matrix mu_bad;     // n x K; zero columns unless the panel model
  Vector delta;      // ratio coefficients
  Vector lambda_ctx; // contextual coefficients; empty unless the panel model
  Vector chi;        // n fitted hyperplane values
  Vector residuals;  // n
  double objective = 0.0;

  //! Panel model: the weight restrictions that were applied (either the
  //! caller's or the stage-one quantile bounds).
  std::optional<WeightBounds> bounds;

  CnlsDiagnostics diagnostics;
};

//! Plain CNLS on the numeraire-normalized input mix x/x1: no ratio
//! regressors, so the residuals carry no homogeneity correction.
CnlsSolution fit_naive_cnls(const ProductionPanel& panel, Index numeraire_index,
                            const SolverSettings& settings);

//! Radial input-distance CNLS. Inputs are normalized by the weighted
//! geometric mean prod_m x_m^{d_m}; the log-ratio coefficients delta are
//! estimated jointly so the residuals satisfy the sample orthogonality
//! conditions. Empty d_weights means equal weights 1/M.
CnlsSolution fit_radial_cnls(const ProductionPanel& panel, Index numeraire_index,
                             const Vector& d_weights, const SolverSettings& settings);

//! Radial output-distance CNLS with equal output weights 1/S. The fitted
//! output sets are audited for convexity; a failed audit sets the
//! diagnostics flag but the fit is still returned.
CnlsSolution fit_radial_output_cnls(const ProductionPanel& panel, Index numeraire_output_index,
                                    const SolverSettings& settings);

//! Conical pooled-panel model with undesirable outputs, contextual
//! covariates, and componentwise weight restrictions on the subgradients.
//! Without caller bounds the model is fitted twice: an unrestricted stage
//! whose coefficient families define 10%/90% quantile bounds, then a
//! restricted refit. Inputs must number exactly two; the mix weights are
//! fixed at (1/2, 1/2).
CnlsSolution fit_weight_restricted_panel(const ProductionPanel& panel,
                                         const std::optional<WeightBounds>& bounds,
                                         const SolverSettings& settings);

//! Residual dot products against each log-ratio regressor of the fitted
//! model (one entry per non-numeraire input, or output for the output
//! orientation). Callers compare against their tolerance; naive fits are
//! accepted and expected to fail such a comparison.
Vector check_orthogonality(const CnlsSolution& solution, const ProductionPanel& panel);

} // namespace rcnls
