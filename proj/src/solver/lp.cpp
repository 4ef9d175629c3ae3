#include "rcnls/solver/lp.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rcnls::solver {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration-limit";
    case SolveStatus::stationary: return "stationary";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

//! Bookkeeping for the general-form -> standard-form rewrite
//!   min c'w, A w = b, w >= 0.
struct StandardForm {
  Matrix a;
  Vector b, c;
  double obj_offset = 0.0;
  bool negated_sense = false;
  // Per original variable: first standard column, and how to map back.
  enum class VarKind { free_split, shift_lo, shift_up, boxed };
  std::vector<VarKind> kind;
  std::vector<Index> col;
  Vector lo_ref, up_ref;
  Index n_orig = 0, n_eq = 0, n_in = 0;
};

StandardForm build_standard(const LinearProgram& p) {
  const Index n = p.c.size();
  if (n == 0) throw std::invalid_argument("solve_lp: empty objective");
  const Index n_eq = p.a_eq.rows(), n_in = p.a_in.rows();
  if ((n_eq > 0 && p.a_eq.cols() != n) || (n_in > 0 && p.a_in.cols() != n) ||
      p.b_eq.size() != n_eq || p.b_in.size() != n_in)
    throw std::invalid_argument("solve_lp: inconsistent constraint dimensions");
  Vector lo = p.lo.size() ? p.lo : Vector::Constant(n, -kInf);
  Vector up = p.up.size() ? p.up : Vector::Constant(n, kInf);
  if (lo.size() != n || up.size() != n)
    throw std::invalid_argument("solve_lp: bound vectors must match variable count");
  for (Index j = 0; j < n; ++j)
    if (lo[j] > up[j]) throw std::invalid_argument("solve_lp: lo > up bound");
  if (!p.c.allFinite() || (n_eq && !(p.a_eq.allFinite() && p.b_eq.allFinite())) ||
      (n_in && !(p.a_in.allFinite() && p.b_in.allFinite())))
    throw std::invalid_argument("solve_lp: non-finite problem data");

  StandardForm sf;
  sf.n_orig = n;
  sf.n_eq = n_eq;
  sf.n_in = n_in;
  sf.lo_ref = lo;
  sf.up_ref = up;
  sf.kind.resize(n);
  sf.col.resize(n);

  Index n_boxed = 0, n_cols = 0;
  for (Index j = 0; j < n; ++j) {
    const bool lo_f = std::isfinite(lo[j]), up_f = std::isfinite(up[j]);
    if (lo_f && up_f) {
      sf.kind[j] = StandardForm::VarKind::boxed;
      sf.col[j] = n_cols;
      n_cols += 1;
      ++n_boxed;
    } else if (lo_f) {
      sf.kind[j] = StandardForm::VarKind::shift_lo;
      sf.col[j] = n_cols;
      n_cols += 1;
    } else if (up_f) {
      sf.kind[j] = StandardForm::VarKind::shift_up;
      sf.col[j] = n_cols;
      n_cols += 1;
    } else {
      sf.kind[j] = StandardForm::VarKind::free_split;
      sf.col[j] = n_cols;
      n_cols += 2;
    }
  }
  const Index slack0 = n_cols;           // inequality slacks
  const Index box_slack0 = n_cols + n_in; // box-row slacks
  n_cols += n_in + n_boxed;
  const Index m = n_eq + n_in + n_boxed;

  sf.a = Matrix::Zero(m, n_cols);
  sf.b = Vector::Zero(m);
  sf.c = Vector::Zero(n_cols);

  Vector c = p.c;
  if (p.maximize) {
    c = -c;
    sf.negated_sense = true;
  }

  // Substitute x_j = offset_j + sign_j * w_j (or p - q for free variables).
  auto emit_column = [&](Index row, Index j, double coef, bool is_objective) {
    const Index col = sf.col[j];
    switch (sf.kind[j]) {
      case StandardForm::VarKind::free_split:
        if (is_objective) {
          sf.c[col] += coef;
          sf.c[col + 1] -= coef;
        } else {
          sf.a(row, col) += coef;
          sf.a(row, col + 1) -= coef;
        }
        break;
      case StandardForm::VarKind::shift_lo:
      case StandardForm::VarKind::boxed:
        if (is_objective) {
          sf.c[col] += coef;
          sf.obj_offset += coef * sf.lo_ref[j];
        } else {
          sf.a(row, col) += coef;
          sf.b[row] -= coef * sf.lo_ref[j];
        }
        break;
      case StandardForm::VarKind::shift_up:
        if (is_objective) {
          sf.c[col] -= coef;
          sf.obj_offset += coef * sf.up_ref[j];
        } else {
          sf.a(row, col) -= coef;
          sf.b[row] -= coef * sf.up_ref[j];
        }
        break;
    }
  };

  for (Index i = 0; i < n_eq; ++i) {
    sf.b[i] = p.b_eq[i];
    for (Index j = 0; j < n; ++j)
      if (p.a_eq(i, j) != 0.0) emit_column(i, j, p.a_eq(i, j), false);
  }
  for (Index i = 0; i < n_in; ++i) {
    const Index row = n_eq + i;
    sf.b[row] = p.b_in[i];
    for (Index j = 0; j < n; ++j)
      if (p.a_in(i, j) != 0.0) emit_column(row, j, p.a_in(i, j), false);
    sf.a(row, slack0 + i) = 1.0;
  }
  Index box_row = n_eq + n_in, box_slack = box_slack0;
  for (Index j = 0; j < n; ++j) {
    if (sf.kind[j] != StandardForm::VarKind::boxed) continue;
    sf.a(box_row, sf.col[j]) = 1.0;
    sf.a(box_row, box_slack) = 1.0;
    sf.b[box_row] = sf.up_ref[j] - sf.lo_ref[j];
    ++box_row;
    ++box_slack;
  }
  for (Index j = 0; j < n; ++j)
    if (c[j] != 0.0) emit_column(0, j, c[j], true);
  return sf;
}

Vector recover_x(const StandardForm& sf, const Vector& w) {
  Vector x(sf.n_orig);
  for (Index j = 0; j < sf.n_orig; ++j) {
    const Index col = sf.col[j];
    switch (sf.kind[j]) {
      case StandardForm::VarKind::free_split: x[j] = w[col] - w[col + 1]; break;
      case StandardForm::VarKind::shift_lo:
      case StandardForm::VarKind::boxed: x[j] = sf.lo_ref[j] + w[col]; break;
      case StandardForm::VarKind::shift_up: x[j] = sf.up_ref[j] - w[col]; break;
    }
  }
  return x;
}

} // namespace

SolveReport solve_lp(const LinearProgram& problem, const SolverSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  StandardForm sf = build_standard(problem);
  const Index m = sf.a.rows(), nc = sf.a.cols();
  SolveReport rep;

  auto finish = [&](SolveReport& r) {
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  };

  if (m == 0) {
    // Bounds-only problem: each standard variable independently at 0 or +inf.
    if ((sf.c.array() < 0.0).any()) {
      rep.status = SolveStatus::unbounded;
      return finish(rep);
    }
    Vector w = Vector::Zero(nc);
    rep.status = SolveStatus::optimal;
    rep.x = recover_x(sf, w);
    rep.objective = sf.obj_offset;
    rep.dual_eq.resize(0);
    rep.dual_in.resize(0);
    return finish(rep);
  }

  const Matrix& A = sf.a;
  const Vector& b = sf.b;
  const Vector& c = sf.c;

  Vector w = Vector::Ones(nc), z = Vector::Ones(nc), y = Vector::Zero(m);
  double tau = 1.0, kappa = 1.0;

  const double tol_aim = 1e-11;
  const double tol_ok = std::min(settings.feas_tol, 1e-8);
  const int max_iter = 200;
  const double bnorm = 1.0 + b.lpNorm<Eigen::Infinity>();
  const double cnorm = 1.0 + c.lpNorm<Eigen::Infinity>();

  double best_err = kInf;
  Vector best_w = w, best_y = y, best_z = z;
  double best_tau = tau;

  int it = 0;
  for (; it < max_iter; ++it) {
    const Vector rp = b * tau - A * w;
    const Vector rd = c * tau - A.transpose() * y - z;
    const double rg = kappa + c.dot(w) - b.dot(y);
    const double mu = (w.dot(z) + tau * kappa) / static_cast<double>(nc + 1);

    const Vector xh = w / tau;
    const Vector yh = y / tau;
    const Vector zh = z / tau;
    const double pobj = c.dot(xh);
    const double dobj = b.dot(yh);
    const double pinf = (b - A * xh).lpNorm<Eigen::Infinity>() / bnorm;
    const double dinf = (c - A.transpose() * yh - zh).lpNorm<Eigen::Infinity>() / cnorm;
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    const double err = std::max({pinf, dinf, gap});
    if (err < best_err && tau > 1e-10) {
      best_err = err;
      best_w = w; best_y = y; best_z = z; best_tau = tau;
    }
    if (err <= tol_aim) break;

    // Infeasibility / unboundedness certificates once tau collapses.
    if (tau < 1e-10 * std::max(1.0, kappa) && mu < 1e-12) {
      if (b.dot(y) > 1e-10) {
        rep.status = SolveStatus::infeasible;
        rep.iterations = it;
        rep.message = "primal infeasibility certificate";
        return finish(rep);
      }
      if (c.dot(w) < -1e-10) {
        rep.status = sf.negated_sense ? SolveStatus::unbounded : SolveStatus::unbounded;
        rep.iterations = it;
        rep.message = "dual infeasibility certificate";
        return finish(rep);
      }
      break;
    }

    const Vector d2 = (w.array() / z.array()).matrix();
    Matrix M = A * d2.asDiagonal() * A.transpose();
    const double ridge = 1e-14 * (1.0 + M.trace() / static_cast<double>(m));
    M.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success) {
      M.diagonal().array() += 1e6 * ridge;
      llt.compute(M);
      if (llt.info() != Eigen::Success) {
        rep.status = SolveStatus::iteration_limit;
        rep.message = "normal equations factorization failed";
        break;
      }
    }

    const Vector adc = A * d2.cwiseProduct(c);
    const Vector q = llt.solve(adc + b);
    const Vector vq = d2.cwiseProduct(A.transpose() * q - c);

    auto direction = [&](double eta, const Vector& rc_wz, double rc_tk,
                         Vector& dw, Vector& dy, Vector& dz, double& dtau, double& dkappa) {
      const Vector rbar = eta * rd - rc_wz.cwiseQuotient(w);
      const Vector rhs_p = eta * rp + A * d2.cwiseProduct(rbar);
      const Vector p = llt.solve(rhs_p);
      const Vector u = d2.cwiseProduct(A.transpose() * p - rbar);
      const double denom = kappa / tau + b.dot(q) - c.dot(vq);
      dtau = (eta * rg + c.dot(u) - b.dot(p) + rc_tk / tau) / denom;
      dy = p + dtau * q;
      dw = u + dtau * vq;
      dz = (rc_wz - z.cwiseProduct(dw)).cwiseQuotient(w);
      dkappa = (rc_tk - kappa * dtau) / tau;
    };

    auto max_step = [&](const Vector& dw, const Vector& dz, double dtau, double dkappa) {
      double a = 1.0;
      for (Index j = 0; j < nc; ++j) {
        if (dw[j] < 0.0) a = std::min(a, -w[j] / dw[j]);
        if (dz[j] < 0.0) a = std::min(a, -z[j] / dz[j]);
      }
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    // Predictor.
    Vector dw_a(nc), dy_a(m), dz_a(nc);
    double dtau_a = 0.0, dkappa_a = 0.0;
    direction(1.0, (-w.array() * z.array()).matrix(), -tau * kappa,
              dw_a, dy_a, dz_a, dtau_a, dkappa_a);
    const double alpha_a = max_step(dw_a, dz_a, dtau_a, dkappa_a);
    const double mu_aff = ((w + alpha_a * dw_a).dot(z + alpha_a * dz_a) +
                           (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkappa_a)) /
                          static_cast<double>(nc + 1);
    double sigma = std::pow(mu_aff / mu, 3);
    sigma = std::clamp(sigma, 1e-8, 1.0);

    // Combined corrector.
    Vector rc_wz = (sigma * mu - (w.array() * z.array()) - (dw_a.array() * dz_a.array())).matrix();
    const double rc_tk = sigma * mu - tau * kappa - dtau_a * dkappa_a;
    Vector dw(nc), dy(m), dz(nc);
    double dtau = 0.0, dkappa = 0.0;
    direction(1.0 - sigma, rc_wz, rc_tk, dw, dy, dz, dtau, dkappa);
    const double alpha = std::min(1.0, 0.9995 * max_step(dw, dz, dtau, dkappa));
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      rep.message = "step collapsed";
      break;
    }
    w += alpha * dw;
    y += alpha * dy;
    z += alpha * dz;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }

  // Report from the best (most accurate) iterate.
  const Vector xh = best_w / best_tau;
  const Vector yh = best_y / best_tau;
  const Vector zh = best_z / best_tau;
  const double pobj = sf.c.dot(xh) + 0.0;
  const double pinf = (b - A * xh).lpNorm<Eigen::Infinity>() / bnorm;
  const double dinf = (c - A.transpose() * yh - zh).lpNorm<Eigen::Infinity>() / cnorm;
  const double gap = std::abs(pobj - b.dot(yh)) / (1.0 + std::abs(pobj));

  rep.iterations = it;
  rep.max_violation = pinf;
  rep.kkt_residual = std::max(dinf, gap);
  if (std::max({pinf, dinf, gap}) <= tol_ok) {
    rep.status = SolveStatus::optimal;
  } else if (rep.status != SolveStatus::infeasible && rep.status != SolveStatus::unbounded) {
    rep.status = SolveStatus::iteration_limit;
    if (rep.message.empty()) rep.message = "accuracy target not reached";
  }
  rep.x = recover_x(sf, xh);
  double obj = sf.c.dot(xh) + sf.obj_offset;
  rep.objective = sf.negated_sense ? -obj : obj;
  // Row duals in the caller's sense (negated back for maximization).
  const double dual_sign = sf.negated_sense ? -1.0 : 1.0;
  rep.dual_eq = dual_sign * yh.head(sf.n_eq);
  rep.dual_in = dual_sign * yh.segment(sf.n_eq, sf.n_in);
  return finish(rep);
}

} // namespace rcnls::solver
