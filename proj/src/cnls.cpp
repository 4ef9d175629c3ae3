#include "rcnls/cnls.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rcnls/solver/nlp.hpp"
#include "rcnls/solver/qp.hpp"
#include "rcnls/stats.hpp"

namespace rcnls {
namespace {

using solver::SmoothNlp;
using solver::SolveReport;
using solver::SolveStatus;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kChiFloor = 1e-8;
constexpr double kGaugeRidge = 1e-7;

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

//! log with a C2 quadratic extension below the positivity floor, so line
//! searches stay finite when a trial point drives some chi nonpositive.
inline double safe_log(double v) {
  if (v >= kChiFloor) return std::log(v);
  const double d = v - kChiFloor;
  return std::log(kChiFloor) + d / kChiFloor - d * d / (2.0 * kChiFloor * kChiFloor);
}
inline double safe_log_d(double v) {
  if (v >= kChiFloor) return 1.0 / v;
  return 1.0 / kChiFloor - (v - kChiFloor) / (kChiFloor * kChiFloor);
}
inline double safe_log_dd(double v) {
  if (v >= kChiFloor) return -1.0 / (v * v);
  return -1.0 / (kChiFloor * kChiFloor);
}

//! One assembled least-squares program over hyperplane coefficients theta_i
//! (rows of the basis matrix dotted against them give chi_i) plus a global
//! linear coefficient block for the ratio/contextual regressors.
struct Program {
  Matrix basis;      // n x p, row i enters both chi_i and the cross constraints
  Matrix regressors; // n x q
  Vector target;     // n, log of the numeraire variable
  double sign = 1.0; // +1: chi_i <= a_i'theta_h (concave); -1: reversed (convex)
  Vector theta_lo;   // p componentwise bounds shared by every observation
  Vector theta_up;
  Vector col_scale;  // basis columns are divided by these (conditioning)
  Vector reg_scale;  // likewise for the regressor columns
  Index n = 0, p = 0, q = 0;
};

//! Rescale every basis/regressor column to unit root-mean-square. The program
//! is solved in the scaled parameterization (theta_scaled = scale * theta) and
//! mapped back when the solution is assembled.
void apply_scaling(Program& pr) {
  pr.col_scale = Vector::Ones(pr.p);
  pr.reg_scale = Vector::Ones(pr.q);
  for (Index c = 0; c < pr.p; ++c) {
    const double s = std::sqrt(pr.basis.col(c).squaredNorm() / static_cast<double>(pr.n));
    if (s > 1e-12) {
      pr.col_scale[c] = s;
      pr.basis.col(c) /= s;
      if (std::isfinite(pr.theta_lo[c])) pr.theta_lo[c] *= s;
      if (std::isfinite(pr.theta_up[c])) pr.theta_up[c] *= s;
    }
  }
  for (Index c = 0; c < pr.q; ++c) {
    const double s = std::sqrt(pr.regressors.col(c).squaredNorm() / static_cast<double>(pr.n));
    if (s > 1e-12) {
      pr.reg_scale[c] = s;
      pr.regressors.col(c) /= s;
    }
  }
}

using PairSet = std::vector<std::pair<Index, Index>>;

Vector compute_chi(const Program& pr, ConstVectorRef z) {
  Vector chi(pr.n);
  for (Index i = 0; i < pr.n; ++i) chi[i] = pr.basis.row(i).dot(z.segment(i * pr.p, pr.p));
  return chi;
}

Vector compute_residuals(const Program& pr, ConstVectorRef z) {
  Vector eps = pr.target;
  const Index base = pr.n * pr.p;
  for (Index i = 0; i < pr.n; ++i)
    eps[i] += safe_log(pr.basis.row(i).dot(z.segment(i * pr.p, pr.p)));
  if (pr.q) eps -= pr.regressors * z.segment(base, pr.q);
  return eps;
}

SmoothNlp build_nlp(const std::shared_ptr<const Program>& prog,
                    const std::shared_ptr<const PairSet>& pairs, const Vector& x0,
                    bool pin_linear_block = false) {
  const Program& pr = *prog;
  const Index nv = pr.n * pr.p + pr.q;
  SmoothNlp nlp;
  nlp.n = nv;
  nlp.x0 = x0;
  nlp.lo = Vector::Constant(nv, -kInf);
  nlp.up = Vector::Constant(nv, kInf);
  for (Index i = 0; i < pr.n; ++i) {
    nlp.lo.segment(i * pr.p, pr.p) = pr.theta_lo;
    nlp.up.segment(i * pr.p, pr.p) = pr.theta_up;
  }
  if (pin_linear_block && pr.q) {
    nlp.lo.tail(pr.q) = x0.tail(pr.q);
    nlp.up.tail(pr.q) = x0.tail(pr.q);
  }

  nlp.objective = [prog](ConstVectorRef z, Vector* grad) {
    const Program& p = *prog;
    const Index base = p.n * p.p;
    double f = 0.0;
    if (grad) grad->setZero();
    for (Index i = 0; i < p.n; ++i) {
      const double chi = p.basis.row(i).dot(z.segment(i * p.p, p.p));
      double e = p.target[i] + safe_log(chi);
      if (p.q) e -= p.regressors.row(i).dot(z.segment(base, p.q));
      f += e * e;
      if (grad) {
        grad->segment(i * p.p, p.p) += (2.0 * e * safe_log_d(chi)) * p.basis.row(i).transpose();
        if (p.q) grad->segment(base, p.q) -= (2.0 * e) * p.regressors.row(i).transpose();
      }
    }
    // Gauge ridge: the ratio/context coefficients are only partially
    // identified (distinct values can reproduce identical residuals), so a
    // vanishingly small ridge picks one point on the flat manifold and keeps
    // the Newton model nonsingular. The coefficients are re-polished by an
    // unpenalized least-squares step after the solve.
    if (p.q) {
      f += kGaugeRidge * z.tail(p.q).squaredNorm();
      if (grad) grad->tail(p.q) += (2.0 * kGaugeRidge) * z.tail(p.q);
    }
    return f;
  };

  // Constraint block: n positivity floors, then the working-set comparisons.
  nlp.n_ineq = pr.n + static_cast<Index>(pairs->size());
  nlp.ineq_values = [prog, pairs](ConstVectorRef z, Vector& c) {
    const Program& p = *prog;
    const Vector chi = compute_chi(p, z);
    c.head(p.n) = Vector::Constant(p.n, kChiFloor) - chi;
    Index k = p.n;
    for (const auto& [i, h] : *pairs)
      c[k++] = p.sign * (chi[i] - p.basis.row(i).dot(z.segment(h * p.p, p.p)));
  };
  nlp.ineq_jt_product = [prog, pairs](ConstVectorRef, ConstVectorRef w, Vector& out) {
    const Program& p = *prog;
    out.setZero();
    for (Index i = 0; i < p.n; ++i)
      if (w[i] != 0.0) out.segment(i * p.p, p.p) -= w[i] * p.basis.row(i).transpose();
    Index k = p.n;
    for (const auto& [i, h] : *pairs) {
      const double wk = w[k++] * p.sign;
      if (wk != 0.0) {
        out.segment(i * p.p, p.p) += wk * p.basis.row(i).transpose();
        out.segment(h * p.p, p.p) -= wk * p.basis.row(i).transpose();
      }
    }
  };

  // Constant inequality Jacobian + objective Hessian: enables the sparse
  // Newton inner minimizer.
  auto jac = std::make_shared<solver::RowSparseMatrix>(nlp.n_ineq, nv);
  {
    std::vector<solver::Triplet> jt;
    jt.reserve(static_cast<std::size_t>((pr.n + 2 * static_cast<Index>(pairs->size())) * pr.p));
    for (Index i = 0; i < pr.n; ++i)
      for (Index c = 0; c < pr.p; ++c) jt.emplace_back(i, i * pr.p + c, -pr.basis(i, c));
    Index k = pr.n;
    for (const auto& [i, h] : *pairs) {
      for (Index c = 0; c < pr.p; ++c) {
        jt.emplace_back(k, i * pr.p + c, pr.sign * pr.basis(i, c));
        jt.emplace_back(k, h * pr.p + c, -pr.sign * pr.basis(i, c));
      }
      ++k;
    }
    jac->setFromTriplets(jt.begin(), jt.end());
  }
  nlp.linear_ineq = jac;
  nlp.objective_hess = [prog](ConstVectorRef z, std::vector<solver::Triplet>& out) {
    const Program& p = *prog;
    const Index base = p.n * p.p;
    for (Index i = 0; i < p.n; ++i) {
      const double chi = p.basis.row(i).dot(z.segment(i * p.p, p.p));
      double e = p.target[i] + safe_log(chi);
      if (p.q) e -= p.regressors.row(i).dot(z.segment(base, p.q));
      const double sl1 = safe_log_d(chi);
      const double cth = 2.0 * (sl1 * sl1 + e * safe_log_dd(chi));
      for (Index a = 0; a < p.p; ++a)
        for (Index b = 0; b < p.p; ++b)
          out.emplace_back(i * p.p + a, i * p.p + b, cth * p.basis(i, a) * p.basis(i, b));
      for (Index a = 0; a < p.p; ++a)
        for (Index d = 0; d < p.q; ++d) {
          const double v = -2.0 * sl1 * p.basis(i, a) * p.regressors(i, d);
          out.emplace_back(i * p.p + a, base + d, v);
          out.emplace_back(base + d, i * p.p + a, v);
        }
      for (Index a = 0; a < p.q; ++a)
        for (Index d = 0; d < p.q; ++d)
          out.emplace_back(base + a, base + d, 2.0 * p.regressors(i, a) * p.regressors(i, d));
    }
    for (Index a = 0; a < p.q; ++a)
      out.emplace_back(base + a, base + a, 2.0 * kGaugeRidge);
  };
  return nlp;
}

//! Largest violation over all n(n-1) comparisons (and the chi floor);
//! optionally returns the dense violation matrix for constraint seeding.
double full_violation(const Program& pr, ConstVectorRef z, Matrix* v_out) {
  Matrix theta(pr.n, pr.p);
  for (Index i = 0; i < pr.n; ++i) theta.row(i) = z.segment(i * pr.p, pr.p);
  Matrix g = pr.basis * theta.transpose(); // g(i,h) = a_i'theta_h
  const Vector chi = g.diagonal();
  Matrix v = pr.sign * ((-g).colwise() + chi);
  v.diagonal().setZero();
  double worst = v.maxCoeff();
  worst = std::max(worst, (Vector::Constant(pr.n, kChiFloor) - chi).maxCoeff());
  if (v_out) *v_out = std::move(v);
  return worst;
}

//! Working-set seed. At moderate sizes every ordered comparison goes in at
//! once (one interior-point solve settles the whole problem); above the
//! cutoff the set starts from nearest neighbours in the standardized basis
//! space and grows by violation rounds.
PairSet initial_pairs(const Program& pr) {
  const Index n = pr.n;
  if (n <= 150) {
    PairSet pairs;
    pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i)
      for (Index h = 0; h < n; ++h)
        if (h != i) pairs.emplace_back(i, h);
    return pairs;
  }
  Matrix f = pr.basis;
  for (Index j = 0; j < f.cols(); ++j) {
    const double m = f.col(j).mean();
    const double s = std::sqrt((f.col(j).array() - m).square().sum() / std::max<Index>(1, n - 1));
    f.col(j) = (f.col(j).array() - m) / (s > 1e-12 ? s : 1.0);
  }
  const Index k = std::min<Index>(8, n - 1);
  PairSet pairs;
  pairs.reserve(static_cast<std::size_t>(2 * k * n));
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index h = 0; h < n; ++h)
      dist[static_cast<std::size_t>(h)] = {h == i ? kInf : (f.row(i) - f.row(h)).squaredNorm(), h};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (Index j = 0; j < k; ++j) {
      const Index h = dist[static_cast<std::size_t>(j)].second;
      pairs.emplace_back(i, h);
      pairs.emplace_back(h, i);
    }
  }
  return pairs;
}

//! Re-solves the unconstrained linear block exactly by least squares given
//! the final chi. The block does not enter any constraint, so this final
//! polish can only improve the objective; it zeroes the residual/regressor
//! dot products to machine precision.
void polish_linear_block(const Program& pr, Vector& z) {
  if (pr.q == 0) return;
  Vector rhs = pr.target;
  for (Index i = 0; i < pr.n; ++i)
    rhs[i] += safe_log(pr.basis.row(i).dot(z.segment(i * pr.p, pr.p)));
  z.tail(pr.q) = pr.regressors.colPivHouseholderQr().solve(rhs);
}

struct PipelineResult {
  Vector z;
  double objective = kInf;
  double violation = kInf;
  double kkt = kInf;
  SolveStatus status = SolveStatus::iteration_limit;
  Index iterations = 0;
  Index rounds = 0;
  Index working_set = 0;
};

PipelineResult run_pipeline(const std::shared_ptr<const Program>& prog, Vector z,
                            const SolverSettings& settings) {
  const Program& pr = *prog;
  if (std::getenv("RCNLS_INIT_ONLY")) {
    PipelineResult res;
    polish_linear_block(pr, z);
    res.z = z;
    res.objective = compute_residuals(pr, z).squaredNorm();
    res.violation = full_violation(pr, z, nullptr);
    res.kkt = 0.0;
    res.status = SolveStatus::optimal;
    return res;
  }
  auto pairs = std::make_shared<PairSet>(initial_pairs(pr));
  std::vector<int> age(pairs->size(), 0);
  std::unordered_set<long long> have;
  have.reserve(pairs->size() * 2);
  const auto key = [n = pr.n](Index i, Index h) {
    return static_cast<long long>(i) * static_cast<long long>(n) + static_cast<long long>(h);
  };
  for (const auto& [i, h] : *pairs) have.insert(key(i, h));

  SolverSettings inner = settings;
  inner.multistart = 1;
  inner.check_gradients = false;

  // The ratio/context coefficients enter no constraint, so they are held at
  // their exact least-squares value while the hyperplanes are solved and
  // re-fitted between rounds. A fixed point of this alternation is a KKT
  // point of the joint program, and keeping the linear block out of the
  // hyperplane solve prevents the joint descent from drifting into the
  // degenerate near-interpolating region of the constraint system.
  const bool alternating = pr.q > 0 && std::getenv("RCNLS_JOINT") == nullptr;

  PipelineResult res;
  const Vector z_init = z;
  double prev_worst = kInf;
  bool tight = false;
  const int max_rounds = 60;
  for (int round = 0; round < max_rounds; ++round) {
    const double tr0 = now_s();
    // A working subset can leave the coefficients badly unconstrained; when
    // the previous round ended far from hyperplane feasibility, restarting
    // from the deterministic initial point (keeping the current linear
    // block) keeps the next solve in range.
    if (round > 0 && prev_worst > 1.0) {
      const Vector tail = z.tail(pr.q);
      z = z_init;
      if (pr.q) z.tail(pr.q) = tail;
    }
    inner.opt_tol = tight ? settings.opt_tol : std::max(settings.opt_tol, 1e-4);
    SmoothNlp nlp = build_nlp(prog, pairs, z, alternating);
    const SolveReport rep = solver::solve_nlp(nlp, inner);
    z = rep.x;
    res.iterations += rep.iterations;
    res.kkt = rep.kkt_residual;
    res.status = rep.status;
    res.rounds = round + 1;

    double tail_shift = 0.0;
    if (alternating) {
      const Vector tail = z.tail(pr.q);
      polish_linear_block(pr, z);
      // Half-step toward the least-squares value: the full alternation can
      // settle into a two-cycle, the damped one cannot.
      z.tail(pr.q) = 0.5 * (tail + z.tail(pr.q));
      tail_shift = (z.tail(pr.q) - tail).cwiseAbs().maxCoeff() /
                   std::max(1.0, tail.cwiseAbs().maxCoeff());
    }

    Matrix v;
    const double worst = full_violation(pr, z, &v);
    prev_worst = worst;
    if (std::getenv("RCNLS_TRACE"))
      std::fprintf(stderr,
                   "[round %d%s] ws=%zu iters=%ld kkt=%.2e worst=%.2e shift=%.1e obj=%.6f "
                   "time=%.2fs\n",
                   round, tight ? "*" : "", pairs->size(), rep.iterations, rep.kkt_residual,
                   worst, tail_shift, compute_residuals(pr, z).squaredNorm(), now_s() - tr0);
    if (worst <= 0.5 * settings.feas_tol && tail_shift <= 1e-8) {
      if (tight || inner.opt_tol == settings.opt_tol) break;
      tight = true;  // re-solve the settled working set at full precision
      continue;
    }

    // Retire comparisons that have stayed slack for a full round; they are
    // re-added if they ever turn violated again.  Hold off while the linear
    // block is still moving, since its next step can re-violate them.
    if (worst <= 1.0 && tail_shift <= 1e-6) {
      std::size_t w = 0;
      for (std::size_t k2 = 0; k2 < pairs->size(); ++k2) {
        const auto [i, h] = (*pairs)[k2];
        if (age[k2] >= 1 && v(i, h) < -0.25) {
          have.erase(key(i, h));
          continue;
        }
        (*pairs)[w] = (*pairs)[k2];
        age[w] = age[k2] + 1;
        ++w;
      }
      pairs->resize(w);
      age.resize(w);
    } else {
      for (auto& a : age) ++a;
    }

    // Harvest the most violated comparisons, a handful per observation.
    const double add_tol = std::max(0.25 * settings.feas_tol, 1e-12);
    std::vector<std::pair<double, std::pair<Index, Index>>> cand;
    for (Index i = 0; i < pr.n; ++i) {
      Index best_h = -1;
      double best_v = add_tol;
      for (Index h = 0; h < pr.n; ++h) {
        if (v(i, h) > best_v) {
          best_v = v(i, h);
          best_h = h;
        }
      }
      if (best_h >= 0) cand.push_back({best_v, {i, best_h}});
      for (Index h = 0; h < pr.n; ++h)
        if (h != best_h && v(i, h) > add_tol) cand.push_back({v(i, h), {i, h}});
    }
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    Index added = 0;
    const Index cap = std::max<Index>(4 * pr.n, 64);
    for (const auto& c : cand) {
      if (added >= cap) break;
      if (have.insert(key(c.second.first, c.second.second)).second) {
        pairs->push_back(c.second);
        age.push_back(0);
        ++added;
      }
    }
    if (added == 0 && tail_shift <= 1e-8) {
      if (tight || inner.opt_tol == settings.opt_tol) break;
      tight = true;
      continue;
    }
  }

  polish_linear_block(pr, z);
  res.z = z;
  res.objective = compute_residuals(pr, z).squaredNorm();
  res.violation = full_violation(pr, z, nullptr);
  res.working_set = static_cast<Index>(pairs->size());
  return res;
}

//! Deterministic start: OLS for the linear block, then one shared hyperplane
//! fitted to the implied chi targets by bound-constrained least squares.
Vector initial_point(const Program& pr, const SolverSettings& settings, int start) {
  Vector dl0 = Vector::Zero(pr.q);
  if (pr.q) {
    Matrix x(pr.n, pr.q + 1);
    x.col(0).setOnes();
    x.rightCols(pr.q) = pr.regressors;
    const Vector coef = x.colPivHouseholderQr().solve(pr.target);
    dl0 = coef.tail(pr.q);
  }
  Vector ln_chi0 = -pr.target;
  if (pr.q) ln_chi0 += pr.regressors * dl0;

  if (start > 0) {
    std::mt19937_64 rng(settings.seed + 0x9E3779B97F4A7C15ULL * static_cast<unsigned long long>(start));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Index i = 0; i < pr.n; ++i) ln_chi0[i] += 0.25 * u(rng);
    for (Index j = 0; j < pr.q; ++j) dl0[j] = dl0[j] * (1.0 + 0.15 * u(rng)) + 0.05 * u(rng);
  }
  Vector chi0 = ln_chi0.array().min(30.0).max(-13.0).exp().matrix();

  // Shared hyperplane: min ||basis*t - chi0||^2 within the coefficient
  // bounds, keeping every fitted chi above a comfortable floor. Coordinates
  // pinned by equal bounds are substituted out so the program keeps an
  // interior.
  std::vector<Index> free_idx;
  Vector theta = Vector::Zero(pr.p);
  for (Index c = 0; c < pr.p; ++c) {
    if (pr.theta_up[c] - pr.theta_lo[c] < 1e-12) theta[c] = pr.theta_lo[c];
    else free_idx.push_back(c);
  }
  if (!free_idx.empty()) {
    const Index nf = static_cast<Index>(free_idx.size());
    Matrix bf(pr.n, nf);
    Vector lo_f(nf), up_f(nf);
    for (Index c = 0; c < nf; ++c) {
      bf.col(c) = pr.basis.col(free_idx[static_cast<std::size_t>(c)]);
      lo_f[c] = pr.theta_lo[free_idx[static_cast<std::size_t>(c)]];
      up_f[c] = pr.theta_up[free_idx[static_cast<std::size_t>(c)]];
    }
    const Vector resid_target = chi0 - pr.basis * theta;
    solver::QuadraticProgram qp;
    qp.q = bf.transpose() * bf + 1e-10 * Matrix::Identity(nf, nf);
    qp.c = -bf.transpose() * resid_target;
    qp.a_in = -bf;
    qp.b_in = (pr.basis * theta).array() - 1e-6;
    qp.lo = lo_f;
    qp.up = up_f;
    SolverSettings qs = settings;
    qs.multistart = 1;
    SolveReport qrep = solver::solve_qp(qp, qs);
    if (qrep.status != SolveStatus::optimal) {
      qp.a_in.resize(0, 0);
      qp.b_in.resize(0);
      qrep = solver::solve_qp(qp, qs);
    }
    const Vector xf = qrep.x.cwiseMax(lo_f).cwiseMin(up_f);
    for (Index c = 0; c < nf; ++c) theta[free_idx[static_cast<std::size_t>(c)]] = xf[c];
  }

  Vector z(pr.n * pr.p + pr.q);
  for (Index i = 0; i < pr.n; ++i) z.segment(i * pr.p, pr.p) = theta;
  if (pr.q) z.tail(pr.q) = dl0;
  return z;
}

PipelineResult fit_program(const std::shared_ptr<const Program>& prog,
                           const SolverSettings& settings) {
  const int starts = std::max<Index>(1, settings.multistart);
  PipelineResult best;
  bool best_ok = false;
  Index total_iters = 0;
  for (int r = 0; r < starts; ++r) {
    PipelineResult cur = run_pipeline(prog, initial_point(*prog, settings, r), settings);
    total_iters += cur.iterations;
    const bool cur_ok = cur.violation <= 10.0 * settings.feas_tol;
    const bool better = best.z.size() == 0 ||
                        (cur_ok && !best_ok) ||
                        (cur_ok == best_ok && cur.objective < best.objective) ||
                        (!cur_ok && !best_ok && cur.violation < best.violation);
    if (better) {
      best = cur;
      best_ok = cur_ok;
    }
  }
  best.iterations = total_iters;
  if (best.violation > 1e-6 && !std::getenv("RCNLS_INIT_ONLY"))
    throw std::runtime_error(
        "cnls: solver failed to satisfy the hyperplane system (max violation " +
        std::to_string(best.violation) + ")");
  return best;
}

//! Shared assembly of the public solution struct from a solved program.
//! `order` maps basis columns to the (alpha, beta, gamma, mu) fields.
struct FieldMap {
  bool has_alpha = true;
  Index m = 0, s = 0, k = 0, j = 0;
  bool outputs_first = false; // output orientation stores gamma before beta
};

CnlsSolution assemble(const Program& pr, const PipelineResult& fit, ModelKind kind,
                      Index numeraire, const Vector& d_weights, const FieldMap& map,
                      double wall_s) {
  CnlsSolution sol;
  sol.model_kind = kind;
  sol.numeraire_index = numeraire;
  sol.d_weights = d_weights;
  const Index n = pr.n;
  Matrix theta(n, pr.p);
  for (Index i = 0; i < n; ++i)
    theta.row(i) = fit.z.segment(i * pr.p, pr.p).cwiseQuotient(pr.col_scale);

  Index col = 0;
  if (map.has_alpha) {
    sol.alpha = theta.col(col);
    ++col;
  }
  if (map.outputs_first) {
    sol.gamma = theta.middleCols(col, map.s);
    col += map.s;
    sol.beta = theta.middleCols(col, map.m);
    col += map.m;
  } else {
    sol.beta = theta.middleCols(col, map.m);
    col += map.m;
    sol.mu_bad = theta.middleCols(col, map.k);
    col += map.k;
    sol.gamma = theta.middleCols(col, map.s);
    col += map.s;
  }
  if (sol.mu_bad.size() == 0) sol.mu_bad.resize(n, 0);

  const Index base = n * pr.p;
  const Index n_ratio = pr.q - map.j;
  const Vector dl = fit.z.tail(pr.q).cwiseQuotient(pr.reg_scale);
  sol.delta = dl.head(n_ratio);
  sol.lambda_ctx = dl.tail(map.j);

  sol.chi = compute_chi(pr, fit.z);
  sol.residuals = compute_residuals(pr, fit.z);
  sol.objective = sol.residuals.squaredNorm();

  sol.diagnostics.afriat_max_violation = fit.violation;
  sol.diagnostics.chi_min = sol.chi.minCoeff();
  sol.diagnostics.kkt_residual = fit.kkt;
  sol.diagnostics.orthogonality =
      pr.q ? Vector((pr.regressors.transpose() * sol.residuals).cwiseProduct(pr.reg_scale))
           : Vector();
  sol.diagnostics.status = fit.status;
  sol.diagnostics.nlp_iterations = fit.iterations;
  sol.diagnostics.working_set_size = fit.working_set;
  sol.diagnostics.scan_rounds = fit.rounds;
  sol.diagnostics.wall_time_s = wall_s;
  return sol;
}

Matrix log_ratio_columns(const Matrix& cols, Index numeraire) {
  const Index n = cols.rows();
  const Index m = cols.cols();
  Matrix r(n, m - 1);
  const Vector ln_num = cols.col(numeraire).array().log();
  Index out = 0;
  for (Index c = 0; c < m; ++c) {
    if (c == numeraire) continue;
    r.col(out++) = ln_num - cols.col(c).array().log().matrix();
  }
  return r;
}

//! Output-distance value implied by a fitted output-orientation solution at
//! an arbitrary point. The hyperplane family is a max (convex function), and
//! the ratio correction is scale-invariant, so the value is homogeneous of
//! degree one in y. Nonpositive hyperplane values mean the point is far
//! inside every fitted output set; report 0 there.
double output_distance_value(const CnlsSolution& sol, ConstVectorRef x, ConstVectorRef y) {
  const Index s = sol.gamma.cols();
  const double ln_geo = y.array().log().sum() / static_cast<double>(s);
  const Vector ytilde = (y.array().log() - ln_geo).exp().matrix();
  double chi = -kInf;
  for (Index h = 0; h < sol.alpha.size(); ++h)
    chi = std::max(chi, sol.alpha[h] + sol.gamma.row(h).dot(ytilde) - sol.beta.row(h).dot(x));
  if (chi <= 0.0) return 0.0;
  double corr = 0.0;
  Index out = 0;
  const double ln_num = std::log(y[sol.numeraire_index]);
  for (Index c = 0; c < s; ++c) {
    if (c == sol.numeraire_index) continue;
    corr += sol.delta[out++] * (ln_num - std::log(y[c]));
  }
  return y[sol.numeraire_index] * chi * std::exp(-corr);
}

//! Midpoint audit of output-set convexity: scale sampled output bundles to
//! the fitted boundary and verify their midpoints are still producible.
bool audit_output_convexity(const ProductionPanel& panel, const CnlsSolution& sol) {
  const Index n = panel.n_obs();
  std::mt19937_64 rng(0x5eedu);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  const int trials = 60;
  for (int t = 0; t < trials; ++t) {
    const Index i = pick(rng), a = pick(rng), b = pick(rng);
    if (a == b) continue;
    const Vector x = panel.x().row(i);
    const double da = output_distance_value(sol, x, panel.y().row(a));
    const double db = output_distance_value(sol, x, panel.y().row(b));
    if (da <= 1e-10 || db <= 1e-10) continue; // unbounded direction; skip
    const Vector mid = 0.5 * (panel.y().row(a).transpose() / da + panel.y().row(b).transpose() / db);
    if (output_distance_value(sol, x, mid) > 1.0 + 1e-6) return false;
  }
  return true;
}

} // namespace

CnlsSolution fit_naive_cnls(const ProductionPanel& panel, Index numeraire_index,
                            const SolverSettings& settings) {
  const Index n = panel.n_obs(), m = panel.n_inputs(), s = panel.n_outputs();
  if (n < 2) throw std::invalid_argument("fit_naive_cnls: need at least two observations");
  if (m < 2) throw std::invalid_argument("fit_naive_cnls: need at least two inputs");
  if (numeraire_index < 0 || numeraire_index >= m)
    throw std::invalid_argument("fit_naive_cnls: numeraire index out of range");
  const double t0 = now_s();

  auto prog = std::make_shared<Program>();
  prog->n = n;
  prog->p = 1 + m + s;
  prog->q = 0;
  prog->sign = 1.0;
  prog->target = panel.x().col(numeraire_index).array().log();
  prog->basis.resize(n, prog->p);
  prog->basis.col(0).setOnes();
  for (Index j = 0; j < m; ++j)
    prog->basis.col(1 + j) = panel.x().col(j).cwiseQuotient(panel.x().col(numeraire_index));
  prog->basis.rightCols(s) = -panel.y();
  prog->theta_lo = Vector::Zero(prog->p);
  prog->theta_lo[0] = -kInf;
  prog->theta_up = Vector::Constant(prog->p, kInf);
  prog->regressors.resize(n, 0);
  apply_scaling(*prog);

  const PipelineResult fit = fit_program(prog, settings);
  FieldMap map;
  map.m = m;
  map.s = s;
  Vector d = Vector::Zero(m);
  d[numeraire_index] = 1.0;
  return assemble(*prog, fit, ModelKind::naive_cnls, numeraire_index, d, map, now_s() - t0);
}

CnlsSolution fit_radial_cnls(const ProductionPanel& panel, Index numeraire_index,
                             const Vector& d_weights, const SolverSettings& settings) {
  const Index n = panel.n_obs(), m = panel.n_inputs(), s = panel.n_outputs();
  if (n < 2) throw std::invalid_argument("fit_radial_cnls: need at least two observations");
  if (m < 2) throw std::invalid_argument("fit_radial_cnls: need at least two inputs");
  const Vector d = d_weights.size() ? d_weights : Vector::Constant(m, 1.0 / static_cast<double>(m));
  const NormalizedView view = normalize_columns(panel.x(), numeraire_index, d);
  const double t0 = now_s();

  auto prog = std::make_shared<Program>();
  prog->n = n;
  prog->p = 1 + m + s;
  prog->q = m - 1;
  prog->sign = 1.0;
  prog->target = panel.x().col(numeraire_index).array().log();
  prog->basis.resize(n, prog->p);
  prog->basis.col(0).setOnes();
  prog->basis.middleCols(1, m) = view.xtilde;
  prog->basis.rightCols(s) = -panel.y();
  prog->regressors = view.log_ratios;
  prog->theta_lo = Vector::Zero(prog->p);
  prog->theta_lo[0] = -kInf;
  prog->theta_up = Vector::Constant(prog->p, kInf);
  apply_scaling(*prog);

  const PipelineResult fit = fit_program(prog, settings);
  FieldMap map;
  map.m = m;
  map.s = s;
  return assemble(*prog, fit, ModelKind::radial_cnls, numeraire_index, d, map, now_s() - t0);
}

CnlsSolution fit_radial_output_cnls(const ProductionPanel& panel, Index numeraire_output_index,
                                    const SolverSettings& settings) {
  const Index n = panel.n_obs(), m = panel.n_inputs(), s = panel.n_outputs();
  if (n < 2)
    throw std::invalid_argument("fit_radial_output_cnls: need at least two observations");
  if (s < 2) throw std::invalid_argument("fit_radial_output_cnls: need at least two outputs");
  if ((panel.y().array() <= 0.0).any())
    throw std::invalid_argument("fit_radial_output_cnls: outputs must be strictly positive");
  const Vector d = Vector::Constant(s, 1.0 / static_cast<double>(s));
  const NormalizedView view = normalize_columns(panel.y(), numeraire_output_index, d);
  const double t0 = now_s();

  auto prog = std::make_shared<Program>();
  prog->n = n;
  prog->p = 1 + s + m;
  prog->q = s - 1;
  prog->sign = -1.0;
  prog->target = panel.y().col(numeraire_output_index).array().log();
  prog->basis.resize(n, prog->p);
  prog->basis.col(0).setOnes();
  prog->basis.middleCols(1, s) = view.xtilde; // normalized outputs here
  prog->basis.rightCols(m) = -panel.x();
  prog->regressors = view.log_ratios;
  prog->theta_lo = Vector::Zero(prog->p);
  prog->theta_lo[0] = -kInf;
  prog->theta_up = Vector::Constant(prog->p, kInf);
  apply_scaling(*prog);

  const PipelineResult fit = fit_program(prog, settings);
  FieldMap map;
  map.m = m;
  map.s = s;
  map.outputs_first = true;
  CnlsSolution sol =
      assemble(*prog, fit, ModelKind::radial_output_cnls, numeraire_output_index, d, map,
               now_s() - t0);
  sol.diagnostics.convexity_ok = audit_output_convexity(panel, sol);
  return sol;
}

CnlsSolution fit_weight_restricted_panel(const ProductionPanel& panel,
                                         const std::optional<WeightBounds>& bounds,
                                         const SolverSettings& settings) {
  const Index n = panel.n_obs(), m = panel.n_inputs(), s = panel.n_outputs();
  const Index k = panel.n_bad_outputs(), j = panel.n_contextual();
  if (panel.is_cross_section())
    throw std::invalid_argument(
        "fit_weight_restricted_panel: requires a panel with a mapped 'period' column");
  if (m != 2)
    throw std::invalid_argument("fit_weight_restricted_panel: model requires exactly two inputs");
  if (n < 2)
    throw std::invalid_argument("fit_weight_restricted_panel: need at least two observations");
  const double t0 = now_s();

  // Rescale to solver-friendly units. A single factor for both inputs keeps
  // the normalized input mix and the log-ratio exactly unchanged; outputs
  // and undesirable outputs get per-column factors. The reparameterization
  // is exact: residuals and the linear coefficients are unchanged, and the
  // hyperplane coefficients map back by fixed positive factors.
  const double cx = std::exp(panel.x().array().log().mean());
  Vector ey(s), gb(k);
  for (Index c = 0; c < s; ++c) {
    const double mu = panel.y().col(c).mean();
    ey[c] = mu > 0.0 ? mu : 1.0;
  }
  for (Index c = 0; c < k; ++c) {
    const double mu = panel.b().col(c).mean();
    gb[c] = mu > 0.0 ? mu : 1.0;
  }
  // Scaled-space coefficient <- raw coefficient conversion factors:
  //   beta' = cx * beta, mu' = cx*gb * mu, gamma' = cx*ey * gamma.
  const Vector beta_fac = Vector::Constant(m, cx);
  const Vector mu_fac = cx * gb;
  const Vector gamma_fac = cx * ey;

  const Index numeraire = 0;
  const Vector d = Vector::Constant(m, 0.5);
  Matrix xs = panel.x() / cx;
  Matrix ys = panel.y();
  for (Index c = 0; c < s; ++c) ys.col(c) /= ey[c];
  Matrix bs = panel.b();
  for (Index c = 0; c < k; ++c) bs.col(c) /= gb[c];
  const NormalizedView view = normalize_columns(xs, numeraire, d);

  auto prog = std::make_shared<Program>();
  prog->n = n;
  prog->p = m + k + s;
  prog->q = (m - 1) + j;
  prog->sign = 1.0;
  prog->target = xs.col(numeraire).array().log();
  prog->basis.resize(n, prog->p);
  prog->basis.leftCols(m) = view.xtilde;
  if (k) prog->basis.middleCols(m, k) = bs;
  prog->basis.rightCols(s) = -ys;
  prog->regressors.resize(n, prog->q);
  prog->regressors.leftCols(m - 1) = view.log_ratios;
  if (j) prog->regressors.rightCols(j) = panel.z();
  prog->theta_lo = Vector::Constant(prog->p, -kInf);
  prog->theta_up = Vector::Constant(prog->p, kInf);
  apply_scaling(*prog);

  const auto apply_bounds = [&](const std::optional<WeightBounds>& wb) {
    prog->theta_lo = Vector::Constant(prog->p, -kInf);
    prog->theta_up = Vector::Constant(prog->p, kInf);
    prog->theta_lo.head(m).setZero();              // beta >= 0
    prog->theta_lo.tail(s).setZero();              // gamma >= 0
    if (wb) {
      if (wb->beta_lo.size() != m || wb->beta_up.size() != m || wb->gamma_lo.size() != s ||
          wb->gamma_up.size() != s || wb->mu_lo.size() != k || wb->mu_up.size() != k)
        throw std::invalid_argument("fit_weight_restricted_panel: bound lengths must match data");
      if (((wb->beta_up - wb->beta_lo).array() < 0).any() ||
          ((wb->gamma_up - wb->gamma_lo).array() < 0).any() ||
          ((wb->mu_up - wb->mu_lo).array() < 0).any())
        throw std::invalid_argument("fit_weight_restricted_panel: bounds must satisfy lo <= up");
      if ((wb->beta_lo.array() < 0).any() || (wb->gamma_lo.array() < 0).any())
        throw std::invalid_argument(
            "fit_weight_restricted_panel: beta and gamma lower bounds must be nonnegative");
      prog->theta_lo.head(m) = wb->beta_lo.cwiseProduct(beta_fac);
      prog->theta_up.head(m) = wb->beta_up.cwiseProduct(beta_fac);
      if (k) {
        prog->theta_lo.segment(m, k) = wb->mu_lo.cwiseProduct(mu_fac);
        prog->theta_up.segment(m, k) = wb->mu_up.cwiseProduct(mu_fac);
      }
      prog->theta_lo.tail(s) = wb->gamma_lo.cwiseProduct(gamma_fac);
      prog->theta_up.tail(s) = wb->gamma_up.cwiseProduct(gamma_fac);
    }
    // Solver parameterization: scaled basis columns carry scaled bounds.
    for (Index c = 0; c < prog->p; ++c) {
      if (std::isfinite(prog->theta_lo[c])) prog->theta_lo[c] *= prog->col_scale[c];
      if (std::isfinite(prog->theta_up[c])) prog->theta_up[c] *= prog->col_scale[c];
    }
  };

  FieldMap map;
  map.has_alpha = false;
  map.m = m;
  map.s = s;
  map.k = k;
  map.j = j;

  std::optional<WeightBounds> applied = bounds;
  PipelineResult fit;
  if (!bounds) {
    apply_bounds(std::nullopt);
    const PipelineResult stage1 = fit_program(prog, settings);
    Matrix theta(n, prog->p);
    for (Index i = 0; i < n; ++i)
      theta.row(i) = stage1.z.segment(i * prog->p, prog->p).cwiseQuotient(prog->col_scale);
    WeightBounds wb; // derived on the raw scale so callers can reuse them
    wb.beta_lo.resize(m);
    wb.beta_up.resize(m);
    wb.mu_lo.resize(k);
    wb.mu_up.resize(k);
    wb.gamma_lo.resize(s);
    wb.gamma_up.resize(s);
    for (Index c = 0; c < m; ++c) {
      wb.beta_lo[c] = stats::quantile(theta.col(c), 0.10) / beta_fac[c];
      wb.beta_up[c] = stats::quantile(theta.col(c), 0.90) / beta_fac[c];
    }
    for (Index c = 0; c < k; ++c) {
      wb.mu_lo[c] = stats::quantile(theta.col(m + c), 0.10) / mu_fac[c];
      wb.mu_up[c] = stats::quantile(theta.col(m + c), 0.90) / mu_fac[c];
    }
    for (Index c = 0; c < s; ++c) {
      wb.gamma_lo[c] = stats::quantile(theta.col(m + k + c), 0.10) / gamma_fac[c];
      wb.gamma_up[c] = stats::quantile(theta.col(m + k + c), 0.90) / gamma_fac[c];
    }
    wb.beta_lo = wb.beta_lo.cwiseMax(0.0);
    wb.gamma_lo = wb.gamma_lo.cwiseMax(0.0);
    applied = wb;
  }
  apply_bounds(applied);
  fit = fit_program(prog, settings);

  CnlsSolution sol = assemble(*prog, fit, ModelKind::weight_restricted_panel, numeraire, d, map,
                              now_s() - t0);
  sol.bounds = applied;
  // Map the scaled-space hyperplane coefficients back to raw units.
  for (Index c = 0; c < m; ++c) sol.beta.col(c) /= beta_fac[c];
  for (Index c = 0; c < k; ++c) sol.mu_bad.col(c) /= mu_fac[c];
  for (Index c = 0; c < s; ++c) sol.gamma.col(c) /= gamma_fac[c];
  sol.chi /= cx; // chi' = cx * chi under the common input factor
  sol.diagnostics.chi_min = sol.chi.minCoeff();
  return sol;
}

Vector check_orthogonality(const CnlsSolution& solution, const ProductionPanel& panel) {
  if (solution.residuals.size() != panel.n_obs())
    throw std::invalid_argument("check_orthogonality: solution does not match panel size");
  Matrix r;
  switch (solution.model_kind) {
    case ModelKind::naive_cnls:
    case ModelKind::radial_cnls:
    case ModelKind::weight_restricted_panel:
      r = log_ratio_columns(panel.x(), solution.numeraire_index);
      break;
    case ModelKind::radial_output_cnls:
      r = log_ratio_columns(panel.y(), solution.numeraire_index);
      break;
    default:
      throw std::invalid_argument("check_orthogonality: not a CNLS solution");
  }
  return r.transpose() * solution.residuals;
}

} // namespace rcnls
