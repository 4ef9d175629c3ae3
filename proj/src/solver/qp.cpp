#include "rcnls/solver/qp.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rcnls::solver {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

SolveReport solve_qp(const QuadraticProgram& problem, const SolverSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  const Index n = problem.c.size();
  if (n == 0 || problem.q.rows() != n || problem.q.cols() != n)
    throw std::invalid_argument("solve_qp: inconsistent Q/c dimensions");
  const Index n_eq = problem.a_eq.rows();
  if ((n_eq > 0 && problem.a_eq.cols() != n) || problem.b_eq.size() != n_eq)
    throw std::invalid_argument("solve_qp: inconsistent equality block");
  const Index n_in_rows = problem.a_in.rows();
  if ((n_in_rows > 0 && problem.a_in.cols() != n) || problem.b_in.size() != n_in_rows)
    throw std::invalid_argument("solve_qp: inconsistent inequality block");

  // Fold finite bounds into the inequality block G x <= h.
  Index n_bound = 0;
  const Vector lo = problem.lo.size() ? problem.lo : Vector::Constant(n, -kInf);
  const Vector up = problem.up.size() ? problem.up : Vector::Constant(n, kInf);
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(lo[j])) ++n_bound;
    if (std::isfinite(up[j])) ++n_bound;
  }
  const Index mi = n_in_rows + n_bound;
  Matrix G = Matrix::Zero(mi, n);
  Vector h = Vector::Zero(mi);
  if (n_in_rows) {
    G.topRows(n_in_rows) = problem.a_in;
    h.head(n_in_rows) = problem.b_in;
  }
  Index r = n_in_rows;
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(lo[j])) { G(r, j) = -1.0; h[r] = -lo[j]; ++r; }
    if (std::isfinite(up[j])) { G(r, j) = 1.0; h[r] = up[j]; ++r; }
  }

  const Matrix& Q = problem.q;
  const Vector& c = problem.c;
  const Matrix& A = problem.a_eq;
  const Vector& b = problem.b_eq;

  SolveReport rep;
  auto finish = [&](SolveReport& out) {
    out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  };

  // Unconstrained / equality-only corner case.
  if (mi == 0) {
    Matrix K(n + n_eq, n + n_eq);
    K.setZero();
    K.topLeftCorner(n, n) = Q;
    K.topLeftCorner(n, n).diagonal().array() += 1e-12;
    if (n_eq) {
      K.topRightCorner(n, n_eq) = A.transpose();
      K.bottomLeftCorner(n_eq, n) = A;
    }
    Vector rhs(n + n_eq);
    rhs.head(n) = -c;
    rhs.tail(n_eq) = b;
    Vector sol = K.ldlt().solve(rhs);
    rep.x = sol.head(n);
    rep.dual_eq = -sol.tail(n_eq); // KKT block solves for -dual under Qx + c = A'dual
    rep.dual_in.resize(0);
    rep.objective = 0.5 * rep.x.dot(Q * rep.x) + c.dot(rep.x);
    rep.max_violation = n_eq ? (A * rep.x - b).lpNorm<Eigen::Infinity>() : 0.0;
    rep.kkt_residual = (Q * rep.x + c - (n_eq ? Vector(A.transpose() * rep.dual_eq) : Vector(Vector::Zero(n)))).lpNorm<Eigen::Infinity>();
    rep.status = rep.max_violation <= settings.feas_tol ? SolveStatus::optimal
                                                        : SolveStatus::iteration_limit;
    return finish(rep);
  }

  // Interior-point state: x free, s = slack of Gx <= h, lambda >= 0, y free.
  Vector x = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(lo[j]) && std::isfinite(up[j])) x[j] = 0.5 * (lo[j] + up[j]);
    else if (std::isfinite(lo[j])) x[j] = lo[j] + 1.0;
    else if (std::isfinite(up[j])) x[j] = up[j] - 1.0;
  }
  Vector s = (h - G * x).cwiseMax(1.0);
  Vector lam = Vector::Ones(mi);
  Vector y = Vector::Zero(n_eq);

  const double tol = std::min(settings.feas_tol, 1e-9);
  const int max_iter = 100;
  const double scale_obj = 1.0 + std::abs(c.lpNorm<Eigen::Infinity>());

  int it = 0;
  for (; it < max_iter; ++it) {
    const Vector r_stat = Q * x + c + G.transpose() * lam -
                          (n_eq ? Vector(A.transpose() * y) : Vector(Vector::Zero(n)));
    const Vector r_eq = n_eq ? Vector(A * x - b) : Vector();
    const Vector r_in = G * x + s - h;
    const double mu = s.dot(lam) / static_cast<double>(mi);

    const double err = std::max({r_stat.lpNorm<Eigen::Infinity>() / scale_obj,
                                 n_eq ? r_eq.lpNorm<Eigen::Infinity>() : 0.0,
                                 r_in.lpNorm<Eigen::Infinity>(), mu});
    if (err <= tol) break;

    const Vector w = lam.cwiseQuotient(s);
    Matrix K(n + n_eq, n + n_eq);
    K.setZero();
    K.topLeftCorner(n, n) = Q + G.transpose() * w.asDiagonal() * G;
    K.topLeftCorner(n, n).diagonal().array() +=
        1e-13 * (1.0 + K.topLeftCorner(n, n).trace() / static_cast<double>(n));
    if (n_eq) {
      K.topRightCorner(n, n_eq) = A.transpose();
      K.bottomLeftCorner(n_eq, n) = A;
      K.bottomRightCorner(n_eq, n_eq).diagonal().array() -= 1e-13;
    }
    Eigen::LDLT<Matrix> kkt(K);
    if (kkt.info() != Eigen::Success) {
      rep.message = "KKT factorization failed";
      break;
    }

    auto direction = [&](const Vector& rc, Vector& dx, Vector& dy, Vector& ds, Vector& dlam) {
      // rc is the centering target for S*lam; eliminate ds and dlam first.
      Vector rhs(n + n_eq);
      rhs.head(n) = -r_stat + G.transpose() *
                                  (lam - (rc + lam.cwiseProduct(r_in)).cwiseQuotient(s));
      if (n_eq) rhs.tail(n_eq) = -r_eq;
      const Vector sol = kkt.solve(rhs);
      dx = sol.head(n);
      dy = n_eq ? Vector(-sol.tail(n_eq)) : Vector();  // K carries -dy in its tail block
      ds = -(r_in + G * dx);
      dlam = (rc - lam.cwiseProduct(ds)).cwiseQuotient(s) - lam;
    };

    auto max_step = [&](const Vector& ds, const Vector& dlam) {
      double a = 1.0;
      for (Index j = 0; j < mi; ++j) {
        if (ds[j] < 0.0) a = std::min(a, -s[j] / ds[j]);
        if (dlam[j] < 0.0) a = std::min(a, -lam[j] / dlam[j]);
      }
      return a;
    };

    Vector dx_a(n), dy_a, ds_a(mi), dlam_a(mi);
    direction(Vector::Zero(mi), dx_a, dy_a, ds_a, dlam_a);
    const double alpha_a = max_step(ds_a, dlam_a);
    const double mu_aff = (s + alpha_a * ds_a).dot(lam + alpha_a * dlam_a) / static_cast<double>(mi);
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3), 1e-8, 1.0);

    Vector rc = Vector::Constant(mi, sigma * mu) - ds_a.cwiseProduct(dlam_a);
    Vector dx(n), dy, ds(mi), dlam(mi);
    direction(rc, dx, dy, ds, dlam);
    const double alpha = std::min(1.0, 0.995 * max_step(ds, dlam));
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      rep.message = "step collapsed";
      break;
    }
    x += alpha * dx;
    s += alpha * ds;
    lam += alpha * dlam;
    if (n_eq) y += alpha * dy;
  }

  const Vector r_stat = Q * x + c + G.transpose() * lam -
                        (n_eq ? Vector(A.transpose() * y) : Vector(Vector::Zero(n)));
  const double viol_eq = n_eq ? (A * x - b).lpNorm<Eigen::Infinity>() : 0.0;
  const double viol_in = (G * x - h).maxCoeff();
  rep.x = x;
  rep.objective = 0.5 * x.dot(Q * x) + c.dot(x);
  rep.max_violation = std::max(viol_eq, std::max(0.0, viol_in));
  rep.kkt_residual = std::max(r_stat.lpNorm<Eigen::Infinity>() / scale_obj,
                              s.dot(lam) / static_cast<double>(mi));
  rep.iterations = it;
  rep.dual_eq = y;
  rep.dual_in = -lam.head(n_in_rows); // report under Qx + c = A_eq'y + A_in'dual, dual <= 0
  rep.status = (rep.max_violation <= settings.feas_tol &&
                rep.kkt_residual <= std::max(settings.opt_tol, 1e-8))
                   ? SolveStatus::optimal
                   : SolveStatus::iteration_limit;
  if (rep.status != SolveStatus::optimal && rep.message.empty())
    rep.message = "accuracy target not reached";
  return finish(rep);
}

} // namespace rcnls::solver
