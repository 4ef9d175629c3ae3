#include "rcnls/distance.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "rcnls/solver/lp.hpp"

namespace rcnls {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

//! Inputs scaled onto the estimated frontier, the LP's reference block.
Matrix projected_inputs(const CnlsSolution& solution, const ProductionPanel& panel) {
  if (solution.residuals.size() != panel.n_obs())
    throw std::invalid_argument("distance: solution and panel disagree on the observation count");
  return (-solution.residuals.array()).exp().matrix().asDiagonal() * panel.x();
}

bool is_conical(const CnlsSolution& solution) { return solution.alpha.size() == 0; }

//! Multiplier program at one point; nullopt when unbounded (the queried
//! output bundle has no reference support in some direction).
std::optional<DistanceEvaluation> price_point(const Matrix& xhat, const Matrix& yref,
                                              ConstVectorRef x, ConstVectorRef y, bool conical) {
  const Index n = xhat.rows();
  const Index m = xhat.cols();
  const Index s = yref.cols();
  const Index nv = m + s + (conical ? 0 : 1);

  solver::LinearProgram lp;
  lp.maximize = true;
  lp.c = Vector::Zero(nv);
  lp.c.segment(m, s) = y;
  lp.a_eq = Matrix::Zero(1, nv);
  lp.a_eq.row(0).head(m) = x.transpose();
  lp.b_eq = Vector::Ones(1);
  lp.a_in = Matrix::Zero(n, nv);
  lp.a_in.leftCols(m) = -xhat;
  lp.a_in.middleCols(m, s) = yref;
  lp.b_in = Vector::Zero(n);
  lp.lo = Vector::Zero(nv);
  lp.up = Vector::Constant(nv, kInf);
  if (!conical) {
    lp.c[nv - 1] = -1.0;
    lp.a_in.col(nv - 1).setConstant(-1.0);
    lp.lo[nv - 1] = -kInf;
  }

  SolverSettings settings;
  settings.feas_tol = 1e-11;
  settings.opt_tol = 1e-10;
  const solver::SolveReport report = solver::solve_lp(lp, settings);
  if (report.status == solver::SolveStatus::unbounded) return std::nullopt;
  if (report.status != solver::SolveStatus::optimal)
    throw std::runtime_error("evaluate_distance: multiplier program did not solve (" +
                             solver::to_string(report.status) + ")");

  DistanceEvaluation eval;
  eval.x = x;
  eval.y = y;
  eval.beta = report.x.head(m);
  eval.gamma = report.x.segment(m, s);
  eval.omega = conical ? 0.0 : report.x[nv - 1];
  eval.lp_objective = report.objective;
  eval.value = report.objective > 0.0 ? 1.0 / report.objective : kInf;
  eval.status = report.status;
  const Vector slack = lp.b_in - lp.a_in * report.x;
  const double bind_tol = 1e-7 * std::max(1.0, slack.cwiseAbs().maxCoeff());
  for (Index h = 0; h < n; ++h)
    if (slack[h] <= bind_tol) eval.binding.push_back(h);
  return eval;
}

} // namespace

DistanceEvaluation evaluate_distance(const CnlsSolution& solution, const ProductionPanel& panel,
                                     ConstVectorRef x, ConstVectorRef y) {
  if (x.size() != panel.n_inputs() || y.size() != panel.n_outputs())
    throw std::invalid_argument("evaluate_distance: point dimensions do not match the panel");
  if ((x.array() <= 0.0).any())
    throw std::invalid_argument("evaluate_distance: inputs must be strictly positive");
  const Matrix xhat = projected_inputs(solution, panel);
  auto eval = price_point(xhat, panel.y(), x, y, is_conical(solution));
  if (!eval)
    throw std::runtime_error(
        "evaluate_distance: multiplier program unbounded; the output bundle lies outside the "
        "span of the reference observations");
  return *eval;
}

ProductionPanel project_to_frontier(const CnlsSolution& solution, const ProductionPanel& panel) {
  return ProductionPanel(panel.firm_ids(), panel.periods(), projected_inputs(solution, panel),
                         panel.y(), panel.b(), panel.z());
}

IsoquantTrace trace_isoquant(const CnlsSolution& solution, const ProductionPanel& panel,
                             ConstVectorRef y, double x_lo, double x_hi, Index resolution) {
  if (panel.n_inputs() != 2)
    throw std::invalid_argument("trace_isoquant: tracing requires exactly two inputs");
  if (y.size() != panel.n_outputs())
    throw std::invalid_argument("trace_isoquant: output bundle does not match the panel");
  if (!(x_lo > 0.0) || !(x_hi > x_lo))
    throw std::invalid_argument("trace_isoquant: need 0 < x_lo < x_hi");
  if (resolution < 2) throw std::invalid_argument("trace_isoquant: resolution must be >= 2");

  const Matrix xhat = projected_inputs(solution, panel);
  const bool conical = is_conical(solution);
  const auto value_at = [&](double x1, double x2) -> double {
    Vector x(2);
    x << x1, x2;
    const auto eval = price_point(xhat, panel.y(), x, y, conical);
    return eval ? eval->value : 0.0;  // unsupported output bundle: nothing is feasible
  };

  IsoquantTrace trace;
  trace.y = y;
  std::vector<double> xs, zs;
  for (Index g = 0; g < resolution; ++g) {
    const double x1 = x_lo + (x_hi - x_lo) * static_cast<double>(g) /
                                 static_cast<double>(resolution - 1);
    double lo = x_lo, hi = x_hi;
    double f_lo = value_at(x1, lo) - 1.0;
    if (f_lo > 0.0) continue;  // already wasteful at the smallest x2: root below range
    if (value_at(x1, hi) < 1.0) continue;  // still infeasible at the largest x2
    while (hi - lo > 1e-9) {
      const double mid = 0.5 * (lo + hi);
      if (value_at(x1, mid) < 1.0)
        lo = mid;
      else
        hi = mid;
    }
    xs.push_back(x1);
    zs.push_back(0.5 * (lo + hi));
  }

  trace.points.resize(static_cast<Index>(xs.size()), 2);
  for (Index k = 0; k < trace.points.rows(); ++k) {
    trace.points(k, 0) = xs[static_cast<std::size_t>(k)];
    trace.points(k, 1) = zs[static_cast<std::size_t>(k)];
  }
  if (trace.points.rows() == 0)
    trace.note = "no frontier crossing in range; the output bundle may lie outside the "
                 "spanned output set";
  // Convexity toward the origin: each interior point must sit on or below the
  // chord of its neighbors.
  for (Index k = 1; k + 1 < trace.points.rows(); ++k) {
    const double t = (trace.points(k, 0) - trace.points(k - 1, 0)) /
                     (trace.points(k + 1, 0) - trace.points(k - 1, 0));
    const double chord = (1.0 - t) * trace.points(k - 1, 1) + t * trace.points(k + 1, 1);
    if (trace.points(k, 1) > chord + 1e-6) trace.convex_ok = false;
  }
  return trace;
}

} // namespace rcnls
