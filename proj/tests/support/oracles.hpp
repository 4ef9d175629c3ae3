#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "rcnls/types.hpp"

//! Brute-force reference solvers used only by tests. They share no code with
//! the production interior-point/augmented-Lagrangian paths.
namespace rcnls::testing {

//! Exhaustive vertex enumeration for min c'x s.t. rows'x <= rhs (bounds must
//! already be encoded as rows). Suitable for n <= 6. Returns the best vertex
//! objective, or nullopt when no feasible vertex exists.
inline std::optional<double> vertex_enum_lp_min(const Vector& c, const Matrix& rows,
                                                const Vector& rhs, double feas_tol = 1e-9) {
  const Index n = c.size();
  const Index m = rows.rows();
  std::optional<double> best;
  std::vector<Index> pick(static_cast<std::size_t>(n));
  std::function<void(Index, Index)> rec = [&](Index start, Index depth) {
    if (depth == n) {
      Matrix B(n, n);
      Vector d(n);
      for (Index k = 0; k < n; ++k) {
        B.row(k) = rows.row(pick[static_cast<std::size_t>(k)]);
        d[k] = rhs[pick[static_cast<std::size_t>(k)]];
      }
      Eigen::FullPivLU<Matrix> lu(B);
      if (!lu.isInvertible()) return;
      Vector x = lu.solve(d);
      if (((rows * x - rhs).array() > feas_tol).any()) return;
      const double obj = c.dot(x);
      if (!best || obj < *best) best = obj;
      return;
    }
    for (Index r = start; r < m; ++r) {
      pick[static_cast<std::size_t>(depth)] = r;
      rec(r + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

//! Convex-QP reference via active-set enumeration: min 0.5 x'Qx + c'x with
//! rows'x <= rhs. Enumerates every subset of rows treated as equalities,
//! solves the equality-constrained KKT system and keeps the best feasible
//! point with nonnegative multipliers. Suitable for <= ~15 rows.
inline std::optional<double> active_set_qp_min(const Matrix& Q, const Vector& c,
                                               const Matrix& rows, const Vector& rhs,
                                               double feas_tol = 1e-8) {
  const Index n = c.size();
  const Index m = rows.rows();
  std::optional<double> best;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<Index> act;
    for (Index r = 0; r < m; ++r)
      if (mask & (1u << r)) act.push_back(r);
    const Index k = static_cast<Index>(act.size());
    if (k > n) continue;
    Matrix K(n + k, n + k);
    K.setZero();
    K.topLeftCorner(n, n) = Q;
    Vector r_vec(n + k);
    r_vec.head(n) = -c;
    for (Index j = 0; j < k; ++j) {
      K.block(n + j, 0, 1, n) = rows.row(act[static_cast<std::size_t>(j)]);
      K.block(0, n + j, n, 1) = rows.row(act[static_cast<std::size_t>(j)]).transpose();
      r_vec[n + j] = rhs[act[static_cast<std::size_t>(j)]];
    }
    Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible()) continue;
    Vector sol = lu.solve(r_vec);
    Vector x = sol.head(n);
    // KKT with rows'x = rhs active: Qx + c + rows'mult = 0, so mult = +tail
    // under r_vec.head = -c.
    Vector mult = sol.tail(k);
    if (((rows * x - rhs).array() > feas_tol).any()) continue;
    if (k > 0 && (mult.array() < -1e-9).any()) continue;
    const double obj = 0.5 * x.dot(Q * x) + c.dot(x);
    if (!best || obj < *best) best = obj;
  }
  return best;
}

} // namespace rcnls::testing
