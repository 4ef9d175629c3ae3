#include "rcnls/solver/nlp.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/SparseCholesky>

namespace rcnls::solver {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Box {
  Vector lo, up;
  void clamp(Vector& x) const {
    for (Index j = 0; j < x.size(); ++j) x[j] = std::min(up[j], std::max(lo[j], x[j]));
  }
};

//! Augmented Lagrangian value/gradient for fixed multipliers and penalty.
class AugLag {
 public:
  AugLag(const SmoothNlp& p, const Vector& lam_in, const Vector& lam_eq, double rho)
      : p_(p), lam_in_(lam_in), lam_eq_(lam_eq), rho_(rho),
        c_in_(p.n_ineq), c_eq_(p.n_eq), w_(p.n_ineq), jtw_(p.n), evals_(0) {}

  double eval(ConstVectorRef x, Vector& grad) {
    ++evals_;
    double val = p_.objective(x, &grad);
    if (!std::isfinite(val)) return val;
    if (p_.n_ineq > 0) {
      p_.ineq_values(x, c_in_);
      double pen = 0.0;
      for (Index j = 0; j < p_.n_ineq; ++j) {
        const double t = lam_in_[j] + rho_ * c_in_[j];
        w_[j] = std::max(0.0, t);
        pen += w_[j] * w_[j] - lam_in_[j] * lam_in_[j];
      }
      val += pen / (2.0 * rho_);
      p_.ineq_jt_product(x, w_, jtw_);
      grad += jtw_;
    }
    if (p_.n_eq > 0) {
      p_.eq_values(x, c_eq_);
      val += lam_eq_.dot(c_eq_) + 0.5 * rho_ * c_eq_.squaredNorm();
      Vector we = lam_eq_ + rho_ * c_eq_;
      p_.eq_jt_product(x, we, jtw_);
      grad += jtw_;
    }
    return val;
  }

  double value_only(ConstVectorRef x) {
    ++evals_;
    double val = p_.objective(x, nullptr);
    if (!std::isfinite(val)) return val;
    if (p_.n_ineq > 0) {
      p_.ineq_values(x, c_in_);
      double pen = 0.0;
      for (Index j = 0; j < p_.n_ineq; ++j) {
        const double t = std::max(0.0, lam_in_[j] + rho_ * c_in_[j]);
        pen += t * t - lam_in_[j] * lam_in_[j];
      }
      val += pen / (2.0 * rho_);
    }
    if (p_.n_eq > 0) {
      p_.eq_values(x, c_eq_);
      val += lam_eq_.dot(c_eq_) + 0.5 * rho_ * c_eq_.squaredNorm();
    }
    return val;
  }

  long evals() const { return evals_; }

 private:
  const SmoothNlp& p_;
  const Vector& lam_in_;
  const Vector& lam_eq_;
  double rho_;
  Vector c_in_, c_eq_, w_, jtw_;
  long evals_;
};

double projected_gradient_norm(const Vector& x, const Vector& g, const Box& box) {
  double nrm = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    const double step = std::min(box.up[j], std::max(box.lo[j], x[j] - g[j])) - x[j];
    nrm = std::max(nrm, std::abs(step));
  }
  return nrm;
}

struct LbfgsResult {
  double value = kInf;
  int iterations = 0;
  double pg_norm = kInf;
};

//! Projected L-BFGS over a box. Gradient components pushing into an active
//! bound are masked before the two-loop recursion; steps are projected and
//! accepted under a projected-path Armijo test.
LbfgsResult lbfgs_box_min(AugLag& fn, Vector& x, const Box& box, double tol,
                          int max_iter) {
  const Index n = x.size();
  const int mem = 10;
  std::deque<Vector> S, Y;
  std::deque<double> RhoPairs;

  box.clamp(x);
  Vector g(n), gm(n), d(n), xn(n), gn(n);
  double f = fn.eval(x, g);
  if (!std::isfinite(f)) throw std::runtime_error("solve_nlp: objective not finite at start");

  LbfgsResult out;
  for (int it = 0; it < max_iter; ++it) {
    out.pg_norm = projected_gradient_norm(x, g, box);
    out.iterations = it;
    if (out.pg_norm <= tol) break;

    // Mask gradient on binding bounds.
    gm = g;
    for (Index j = 0; j < n; ++j) {
      if ((x[j] <= box.lo[j] && g[j] > 0.0) || (x[j] >= box.up[j] && g[j] < 0.0)) gm[j] = 0.0;
    }

    // Two-loop recursion on the masked gradient.
    d = -gm;
    if (!S.empty()) {
      std::vector<double> alpha(S.size());
      for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
        alpha[k] = RhoPairs[k] * S[k].dot(d);
        d -= alpha[k] * Y[k];
      }
      const double h0 = S.back().dot(Y.back()) / Y.back().squaredNorm();
      d *= h0;
      for (std::size_t k = 0; k < S.size(); ++k) {
        const double beta = RhoPairs[k] * Y[k].dot(d);
        d += (alpha[k] - beta) * S[k];
      }
      for (Index j = 0; j < n; ++j)
        if ((x[j] <= box.lo[j] && g[j] > 0.0) || (x[j] >= box.up[j] && g[j] < 0.0)) d[j] = 0.0;
    }
    double slope = d.dot(g);
    if (!(slope < -1e-14 * d.norm() * g.norm())) {
      d = -gm;
      slope = d.dot(g);
      if (!(slope < 0.0)) break;  // projected stationary
    }

    // Projected backtracking line search.
    double t = 1.0;
    double fn_val = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + t * d;
      box.clamp(xn);
      fn_val = fn.value_only(xn);
      const double pred = g.dot(xn - x);
      if (std::isfinite(fn_val) && fn_val <= f + 1e-4 * pred && pred < 0.0) {
        accepted = true;
        break;
      }
      if (std::isfinite(fn_val) && (xn - x).lpNorm<Eigen::Infinity>() == 0.0) break;
      t *= 0.5;
    }
    if (!accepted) break;

    const double f_new = fn.eval(xn, gn);
    Vector s = xn - x;
    Vector yv = gn - g;
    const double sy = s.dot(yv);
    if (sy > 1e-10 * s.norm() * yv.norm()) {
      S.push_back(std::move(s));
      Y.push_back(std::move(yv));
      RhoPairs.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > mem) {
        S.pop_front();
        Y.pop_front();
        RhoPairs.pop_front();
      }
    }
    x.swap(xn);
    g.swap(gn);
    f = f_new;
  }
  out.value = f;
  return out;
}

struct AlResult {
  Vector x;
  Vector lam_in, lam_eq;
  double objective = kInf;
  double viol = kInf;
  double kkt = kInf;
  int inner_iterations = 0;
  SolveStatus status = SolveStatus::iteration_limit;
};

//! Primal-dual interior-point method for problems whose inequalities are
//! linear (constant Jacobian supplied in `linear_ineq`) and whose objective
//! Hessian is available. Slacks turn c(x) <= 0 into c(x) + s = 0, s > 0; the
//! barrier subproblems are solved by Newton steps on the primal-dual system
//! with the slack and bound blocks eliminated, so each iteration factorizes
//!   K = hess f + A' diag(lam/s) A + diag(zl/(x-lo) + zu/(up-x)) + tau I
//! once with a sparse LDL^T (plus inertia-correcting shifts tau when the
//! reduced matrix is not positive definite). The smooth weighting of
//! near-active rows avoids the active-set combinatorics that make penalty
//! methods chatter on problems with thousands of close-to-binding rows.
AlResult interior_point(const SmoothNlp& p, const Vector& start, const SolverSettings& st) {
  const Index n = p.n;
  const Index m = p.n_ineq;
  const RowSparseMatrix& A = *p.linear_ineq;
  const bool trace = std::getenv("RCNLS_TRACE") != nullptr;

  Box box;
  box.lo = p.lo.size() ? p.lo : Vector::Constant(n, -kInf);
  box.up = p.up.size() ? p.up : Vector::Constant(n, kInf);

  AlResult res;
  res.lam_eq = Vector::Zero(0);
  Vector x = start;

  // Frozen coordinates (degenerate bounds) are eliminated with identity rows;
  // the rest are pushed strictly inside their bounds for the barrier.
  std::vector<char> frozen(static_cast<std::size_t>(n), 0);
  for (Index j = 0; j < n; ++j) {
    const double lo = box.lo[j], up = box.up[j];
    if (up - lo <= 1e-12) {
      frozen[static_cast<std::size_t>(j)] = 1;
      x[j] = 0.5 * (lo + up);
    } else if (std::isfinite(lo) && std::isfinite(up)) {
      const double pad = std::min(1e-2 * (1.0 + up - lo), 0.25 * (up - lo));
      x[j] = std::clamp(x[j], lo + pad, up - pad);
    } else if (std::isfinite(lo)) {
      x[j] = std::max(x[j], lo + 1e-2 * (1.0 + std::abs(lo)));
    } else if (std::isfinite(up)) {
      x[j] = std::min(x[j], up - 1e-2 * (1.0 + std::abs(up)));
    }
  }
  auto has_lo = [&](Index j) {
    return !frozen[static_cast<std::size_t>(j)] && std::isfinite(box.lo[j]);
  };
  auto has_up = [&](Index j) {
    return !frozen[static_cast<std::size_t>(j)] && std::isfinite(box.up[j]);
  };

  double mu = 0.1;
  if (const char* env = std::getenv("RCNLS_MU0")) mu = std::atof(env);
  const double mu_min = 0.1 * std::min(st.opt_tol, 1e-6);
  Vector c(m), s(m), lam(m), g(n), jtw(n);
  if (m) {
    p.ineq_values(x, c);
    // Violated rows get a slack of the violation's own magnitude so the
    // fraction-to-boundary rule does not throttle the first steps.
    for (Index r = 0; r < m; ++r) s[r] = std::max(1e-2, std::abs(c[r]));
    lam = (mu / s.array()).matrix();
  }
  Vector zl = Vector::Zero(n), zu = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    if (has_lo(j)) zl[j] = mu / (x[j] - box.lo[j]);
    if (has_up(j)) zu[j] = mu / (box.up[j] - x[j]);
  }

  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  bool analyzed = false;
  double tau = 0.0;
  std::vector<Triplet> trips, sys;
  const int max_it = std::min(300, std::max(60, st.max_iterations));
  double f = kInf;

  for (int it = 0; it < max_it; ++it) {
    res.inner_iterations = it;
    f = p.objective(x, &g);
    if (!std::isfinite(f)) throw std::runtime_error("solve_nlp: objective not finite");
    if (m) p.ineq_values(x, c);

    // KKT residuals with the explicit multipliers.
    Vector rd = g;
    if (m) {
      p.ineq_jt_product(x, lam, jtw);
      rd += jtw;
    }
    rd -= zl;
    rd += zu;
    for (Index j = 0; j < n; ++j)
      if (frozen[static_cast<std::size_t>(j)]) rd[j] = 0.0;
    const Vector rc = m ? Vector(c + s) : Vector(0);
    double comp = 0.0;
    for (Index r = 0; r < m; ++r) comp = std::max(comp, s[r] * lam[r]);
    for (Index j = 0; j < n; ++j) {
      if (has_lo(j)) comp = std::max(comp, (x[j] - box.lo[j]) * zl[j]);
      if (has_up(j)) comp = std::max(comp, (box.up[j] - x[j]) * zu[j]);
    }
    const double stat = rd.lpNorm<Eigen::Infinity>();
    const double feas = m ? rc.lpNorm<Eigen::Infinity>() : 0.0;

    res.x = x;
    res.lam_in = lam;
    res.objective = f;
    res.viol = m ? std::max(0.0, c.maxCoeff()) : 0.0;
    res.kkt = std::max(stat, comp);
    if (trace)
      std::fprintf(stderr, "  [ip] it=%d mu=%.1e f=%.8f stat=%.2e feas=%.2e comp=%.2e tau=%.1e\n",
                   it, mu, f, stat, feas, comp, tau);
    if (stat <= st.opt_tol && feas <= st.feas_tol && comp <= st.opt_tol &&
        res.viol <= st.feas_tol) {
      res.status = SolveStatus::optimal;
      return res;
    }
    // Barrier parameter schedule: once the mu-perturbed system is solved to
    // within a factor of mu, tighten it.
    double comp_mu = 0.0;
    for (Index r = 0; r < m; ++r) comp_mu = std::max(comp_mu, std::abs(s[r] * lam[r] - mu));
    for (Index j = 0; j < n; ++j) {
      if (has_lo(j)) comp_mu = std::max(comp_mu, std::abs((x[j] - box.lo[j]) * zl[j] - mu));
      if (has_up(j)) comp_mu = std::max(comp_mu, std::abs((box.up[j] - x[j]) * zu[j] - mu));
    }
    const bool mu_aggressive = std::getenv("RCNLS_MU_AGGR") != nullptr;
    if (mu_aggressive ? (std::max(feas, comp_mu) <= 10.0 * mu)
                      : (std::max({stat, feas, comp_mu}) <= 10.0 * mu))
      mu = std::max(mu_min, std::min(0.2 * mu, std::pow(mu, 1.5)));

    // Reduced Newton system.
    trips.clear();
    p.objective_hess(x, trips);
    for (Index r = 0; r < m; ++r) {
      const double sig = lam[r] / s[r];
      for (RowSparseMatrix::InnerIterator a(A, r); a; ++a)
        for (RowSparseMatrix::InnerIterator b(A, r); b; ++b)
          trips.emplace_back(a.col(), b.col(), sig * a.value() * b.value());
    }
    Vector diag = Vector::Zero(n);
    for (Index j = 0; j < n; ++j) {
      if (has_lo(j)) diag[j] += zl[j] / (x[j] - box.lo[j]);
      if (has_up(j)) diag[j] += zu[j] / (box.up[j] - x[j]);
    }
    // Effective multipliers at zero step define the right-hand side.
    Vector lam_hat(m), rhs = -g;
    if (m) {
      for (Index r = 0; r < m; ++r) lam_hat[r] = mu / s[r] + (lam[r] / s[r]) * rc[r];
      p.ineq_jt_product(x, lam_hat, jtw);
      rhs -= jtw;
    }
    for (Index j = 0; j < n; ++j) {
      if (has_lo(j)) rhs[j] += mu / (x[j] - box.lo[j]);
      if (has_up(j)) rhs[j] -= mu / (box.up[j] - x[j]);
    }

    double scale = 1.0;
    for (const auto& t : trips)
      if (t.row() == t.col()) scale = std::max(scale, std::abs(t.value()));
    Vector dx(n);
    bool solved = false;
    // Inertia correction: try the unshifted system first for pure Newton
    // steps, then restart from a fraction of the last shift that worked and
    // escalate geometrically.
    double tau_try = 0.0;
    for (int attempt = 0; attempt < 30; ++attempt) {
      sys.clear();
      sys.reserve(trips.size() + static_cast<std::size_t>(2 * n));
      for (const auto& t : trips)
        if (!frozen[static_cast<std::size_t>(t.row())] &&
            !frozen[static_cast<std::size_t>(t.col())])
          sys.push_back(t);
      for (Index j = 0; j < n; ++j) {
        if (frozen[static_cast<std::size_t>(j)]) {
          sys.emplace_back(j, j, 1.0);
          rhs[j] = 0.0;
        } else {
          sys.emplace_back(j, j, diag[j] + tau_try);
        }
      }
      SparseMatrix K(n, n);
      K.setFromTriplets(sys.begin(), sys.end());
      if (!analyzed) {
        ldlt.analyzePattern(K);
        analyzed = true;
      }
      ldlt.factorize(K);
      if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
        dx = ldlt.solve(rhs);
        // One step of iterative refinement keeps the direction usable when
        // the barrier weights are strongly graded.
        dx += ldlt.solve(rhs - K * dx);
        if (dx.allFinite()) {
          solved = true;
          break;
        }
      }
      if (tau_try == 0.0)
        tau_try = (tau == 0.0) ? 1e-8 * scale : std::max(1e-12 * scale, tau / 3.0);
      else
        tau_try *= 8.0;
    }
    if (!solved) {
      res.status = SolveStatus::stationary;
      return res;
    }
    if (tau_try > 0.0) tau = tau_try;

    // Recover the eliminated blocks.
    Vector ds(m), dlam(m);
    if (m) {
      const Vector Adx = A * dx;
      ds = -rc - Adx;
      for (Index r = 0; r < m; ++r) dlam[r] = lam_hat[r] - lam[r] + (lam[r] / s[r]) * Adx[r];
    }
    Vector dzl = Vector::Zero(n), dzu = Vector::Zero(n);
    for (Index j = 0; j < n; ++j) {
      if (has_lo(j)) dzl[j] = mu / (x[j] - box.lo[j]) - zl[j] - (zl[j] / (x[j] - box.lo[j])) * dx[j];
      if (has_up(j)) dzu[j] = mu / (box.up[j] - x[j]) - zu[j] + (zu[j] / (box.up[j] - x[j])) * dx[j];
    }

    // Fraction-to-boundary step limits.
    const double ftb = std::max(0.99, 1.0 - mu);
    double ap = 1.0, ad = 1.0;
    for (Index r = 0; r < m; ++r)
      if (ds[r] < 0.0) ap = std::min(ap, -ftb * s[r] / ds[r]);
    for (Index j = 0; j < n; ++j) {
      if (has_lo(j) && dx[j] < 0.0) ap = std::min(ap, -ftb * (x[j] - box.lo[j]) / dx[j]);
      if (has_up(j) && dx[j] > 0.0) ap = std::min(ap, ftb * (box.up[j] - x[j]) / dx[j]);
    }
    for (Index r = 0; r < m; ++r)
      if (dlam[r] < 0.0) ad = std::min(ad, -ftb * lam[r] / dlam[r]);
    for (Index j = 0; j < n; ++j) {
      if (has_lo(j) && dzl[j] < 0.0) ad = std::min(ad, -ftb * zl[j] / dzl[j]);
      if (has_up(j) && dzu[j] < 0.0) ad = std::min(ad, -ftb * zu[j] / dzu[j]);
    }

    // Backtracking line search on the barrier merit function. The
    // constraints are linear, so the infeasibility contracts exactly by
    // (1 - alpha) along the step and an l1 penalty with weight nu makes the
    // direction a descent direction for the merit.
    const double nu = m ? 2.0 * lam_hat.lpNorm<Eigen::Infinity>() + 1.0 : 0.0;
    auto merit = [&](const Vector& xx, const Vector& ss, double rc1) {
      double v = p.objective(xx, nullptr) + nu * rc1;
      for (Index r = 0; r < m; ++r) v -= mu * std::log(ss[r]);
      for (Index j = 0; j < n; ++j) {
        if (has_lo(j)) v -= mu * std::log(xx[j] - box.lo[j]);
        if (has_up(j)) v -= mu * std::log(box.up[j] - xx[j]);
      }
      return v;
    };
    const double rc_l1 = m ? rc.lpNorm<1>() : 0.0;
    double dder = g.dot(dx) - nu * rc_l1;
    for (Index r = 0; r < m; ++r) dder -= mu * ds[r] / s[r];
    for (Index j = 0; j < n; ++j) {
      if (has_lo(j)) dder -= mu * dx[j] / (x[j] - box.lo[j]);
      if (has_up(j)) dder += mu * dx[j] / (box.up[j] - x[j]);
    }
    const double m0 = merit(x, s, rc_l1);
    double alpha = ap;
    Vector xt(n), st_s(m);
    for (int ls = 0; ls < 40; ++ls) {
      xt = x + alpha * dx;
      if (m) st_s = s + alpha * ds;
      const double mv = merit(xt, st_s, (1.0 - alpha) * rc_l1);
      if (std::isfinite(mv) && (dder >= 0.0 || mv <= m0 + 1e-4 * alpha * dder)) break;
      alpha *= 0.5;
      if (alpha < 1e-12) break;
    }
    x = xt;
    if (m) {
      s = st_s;
      lam += ad * dlam;
    }
    zl += ad * dzl;
    zu += ad * dzu;
  }
  res.status = (res.viol <= st.feas_tol) ? SolveStatus::stationary : SolveStatus::iteration_limit;
  return res;
}

AlResult augmented_lagrangian(const SmoothNlp& p, const Vector& start,
                              const SolverSettings& st) {
  Box box;
  box.lo = p.lo.size() ? p.lo : Vector::Constant(p.n, -kInf);
  box.up = p.up.size() ? p.up : Vector::Constant(p.n, kInf);

  AlResult res;
  res.x = start;
  box.clamp(res.x);
  res.lam_in = Vector::Zero(p.n_ineq);
  res.lam_eq = Vector::Zero(p.n_eq);

  Vector c_in(p.n_ineq), c_eq(p.n_eq), grad(p.n), jtw(p.n);

  auto violation = [&](const Vector& x) {
    double v = 0.0;
    if (p.n_ineq) {
      p.ineq_values(x, c_in);
      v = std::max(v, c_in.maxCoeff());
    }
    if (p.n_eq) {
      p.eq_values(x, c_eq);
      v = std::max(v, c_eq.cwiseAbs().maxCoeff());
    }
    return std::max(0.0, v);
  };

  // Penalty start scaled to the objective/violation balance at the start.
  double f0 = p.objective(res.x, nullptr);
  double v0 = violation(res.x);
  double rho = std::clamp(0.1 * (1.0 + std::abs(f0)) / (1.0 + v0), 1.0, 100.0);

  double inner_tol = std::max(1e-2, st.opt_tol);
  double best_viol = kInf;
  double last_kkt = kInf;
  int kkt_stall = 0;
  int total_inner = 0;
  const int max_outer = 50;

  for (int outer = 0; outer < max_outer; ++outer) {
    AugLag fn(p, res.lam_in, res.lam_eq, rho);
    const int budget = std::max(50, st.max_iterations - total_inner);
    LbfgsResult inner = lbfgs_box_min(fn, res.x, box, inner_tol, std::min(budget, 2000));
    total_inner += inner.iterations;

    // Multiplier update and KKT measurement at the new point.
    double comp = 0.0;
    if (p.n_ineq) {
      p.ineq_values(res.x, c_in);
      for (Index j = 0; j < p.n_ineq; ++j) {
        res.lam_in[j] = std::max(0.0, res.lam_in[j] + rho * c_in[j]);
        comp = std::max(comp, std::abs(res.lam_in[j] * std::min(0.0, c_in[j])));
      }
    }
    if (p.n_eq) {
      p.eq_values(res.x, c_eq);
      res.lam_eq += rho * c_eq;
    }
    const double viol = violation(res.x);

    double obj = p.objective(res.x, &grad);
    if (p.n_ineq) {
      p.ineq_jt_product(res.x, res.lam_in, jtw);
      grad += jtw;
    }
    if (p.n_eq) {
      p.eq_jt_product(res.x, res.lam_eq, jtw);
      grad += jtw;
    }
    const double stat = projected_gradient_norm(res.x, grad, box);
    res.objective = obj;
    res.viol = viol;
    res.kkt = std::max(stat, comp);
    res.inner_iterations = total_inner;

    if (std::getenv("RCNLS_TRACE"))
      std::fprintf(stderr, "  [al] outer=%d rho=%.1e inner=%d pg=%.2e viol=%.2e kkt=%.2e obj=%.6f\n",
                   outer, rho, inner.iterations, inner.pg_norm, viol, res.kkt, obj);

    if (viol <= st.feas_tol && res.kkt <= st.opt_tol) {
      res.status = SolveStatus::optimal;
      return res;
    }
    if (total_inner >= st.max_iterations) {
      res.status = SolveStatus::iteration_limit;
      return res;
    }
    // Feasible but stationarity stuck at its numerical floor: accept.
    if (viol <= st.feas_tol && res.kkt >= 0.9 * last_kkt) {
      if (++kkt_stall >= 4) {
        res.status = SolveStatus::stationary;
        return res;
      }
    } else {
      kkt_stall = 0;
    }
    last_kkt = res.kkt;
    const bool inner_done = inner.pg_norm <= inner_tol * (1.0 + std::abs(obj));
    if (outer > 0 && (inner_done || viol > 1e3 * st.feas_tol) &&
        viol > std::max(0.25 * best_viol, st.feas_tol)) {
      rho = std::min(rho * 10.0, 1e12);
      if (rho >= 1e12 && viol > 1e3 * st.feas_tol && best_viol > 1e3 * st.feas_tol) {
        res.status = SolveStatus::infeasible;
        return res;
      }
    } else if (viol <= 0.01 * st.feas_tol && res.kkt > st.opt_tol && rho > 1e2) {
      // Feasibility over-achieved while stationarity lags: a smaller penalty
      // improves the conditioning of the inner problem.
      rho *= 0.2;
    }
    best_viol = std::min(best_viol, viol);
    inner_tol = std::max(0.3 * st.opt_tol, 0.2 * inner_tol);
  }
  res.status = (res.viol <= st.feas_tol) ? SolveStatus::stationary
                                         : SolveStatus::iteration_limit;
  return res;
}

} // namespace

void check_derivatives(const SmoothNlp& p, ConstVectorRef x0, double tol) {
  Vector x = x0;
  Vector g(p.n);
  p.objective(x, &g);
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(p.n);
  for (Index j = 0; j < p.n; ++j) v[j] = nd(rng);
  v /= v.norm();
  const double h = 1e-6 * (1.0 + x.cwiseAbs().maxCoeff());
  const double fp = p.objective(x + h * v, nullptr);
  const double fm = p.objective(x - h * v, nullptr);
  const double fd = (fp - fm) / (2.0 * h);
  const double an = g.dot(v);
  if (std::abs(fd - an) > tol * (1.0 + std::abs(fd)))
    throw std::runtime_error("check_derivatives: objective gradient mismatch");

  if (p.n_ineq > 0) {
    Vector w(p.n_ineq);
    for (Index j = 0; j < p.n_ineq; ++j) w[j] = nd(rng);
    Vector jtw(p.n);
    p.ineq_jt_product(x, w, jtw);
    Vector cp(p.n_ineq), cm(p.n_ineq);
    p.ineq_values(x + h * v, cp);
    p.ineq_values(x - h * v, cm);
    const double lhs = w.dot((cp - cm) / (2.0 * h));
    const double rhs = jtw.dot(v);
    if (std::abs(lhs - rhs) > tol * (1.0 + std::abs(lhs)))
      throw std::runtime_error("check_derivatives: inequality Jacobian mismatch");
  }
  if (p.n_eq > 0) {
    Vector w(p.n_eq);
    for (Index j = 0; j < p.n_eq; ++j) w[j] = nd(rng);
    Vector jtw(p.n);
    p.eq_jt_product(x, w, jtw);
    Vector cp(p.n_eq), cm(p.n_eq);
    p.eq_values(x + h * v, cp);
    p.eq_values(x - h * v, cm);
    const double lhs = w.dot((cp - cm) / (2.0 * h));
    const double rhs = jtw.dot(v);
    if (std::abs(lhs - rhs) > tol * (1.0 + std::abs(lhs)))
      throw std::runtime_error("check_derivatives: equality Jacobian mismatch");
  }
}

SolveReport solve_nlp(const SmoothNlp& problem, const SolverSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  if (problem.n <= 0 || !problem.objective)
    throw std::invalid_argument("solve_nlp: empty problem");
  if (problem.n_ineq > 0 && (!problem.ineq_values || !problem.ineq_jt_product))
    throw std::invalid_argument("solve_nlp: missing inequality callables");
  if (problem.n_eq > 0 && (!problem.eq_values || !problem.eq_jt_product))
    throw std::invalid_argument("solve_nlp: missing equality callables");
  if (problem.x0.size() != problem.n)
    throw std::invalid_argument("solve_nlp: initial point size mismatch");

  if (settings.check_gradients) check_derivatives(problem, problem.x0);

  const int n_starts = std::max(1, settings.multistart);
  SolveReport rep;
  AlResult best;
  bool have_best = false;

  for (int r = 0; r < n_starts; ++r) {
    Vector start = problem.x0;
    if (r > 0) {
      std::mt19937_64 rng(settings.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(r));
      std::uniform_real_distribution<double> um(0.85, 1.15);
      std::uniform_real_distribution<double> ua(-0.1, 0.1);
      for (Index j = 0; j < start.size(); ++j) {
        if (start[j] != 0.0) start[j] *= um(rng);
        else start[j] += ua(rng);
      }
    }
    const bool use_ipm = static_cast<bool>(problem.linear_ineq) && problem.objective_hess &&
                         problem.n_eq == 0 && problem.linear_ineq->rows() == problem.n_ineq &&
                         std::getenv("RCNLS_FORCE_AL") == nullptr;
    AlResult cand = use_ipm ? interior_point(problem, start, settings)
                            : augmented_lagrangian(problem, start, settings);
    const bool cand_feas = cand.viol <= settings.feas_tol;
    const bool best_feas = have_best && best.viol <= settings.feas_tol;
    bool take = !have_best;
    if (have_best) {
      if (cand_feas && !best_feas) take = true;
      else if (cand_feas == best_feas && cand.objective < best.objective) take = true;
    }
    if (take) {
      best = cand;
      have_best = true;
    }
    rep.incumbent_trace.push_back(best.objective);
  }

  rep.status = best.status;
  rep.x = best.x;
  rep.objective = best.objective;
  rep.max_violation = best.viol;
  rep.kkt_residual = best.kkt;
  rep.iterations = best.inner_iterations;
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

} // namespace rcnls::solver
