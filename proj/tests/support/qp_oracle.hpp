#pragma once

// Brute-force QP oracle for small convex problems: enumerate every assignment
// of inequality rows to {inactive, at lower, at upper}, solve the
// equality-constrained KKT system of each, and keep the best point that is
// primal feasible with correctly signed multipliers. A singular Q is fine as
// long as the problem is bounded: the KKT system is then solved in the
// least-squares sense and kept only if it holds exactly. Independent of the
// ADMM solver; only Eigen dense linear algebra is shared.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dic/qp.hpp"

namespace dic::test {

struct OracleResult {
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::infinity();
  long active_sets_tried = 0;
};

inline std::optional<OracleResult> brute_force_qp(const qp::QpProblem& p, double feas_tol = 1e-8) {
  const Eigen::MatrixXd Q = Eigen::MatrixXd(p.Q);
  const Eigen::MatrixXd A = Eigen::MatrixXd(p.A);
  const Eigen::MatrixXd C = Eigen::MatrixXd(p.C);
  const auto n = p.num_vars();
  const auto me = p.num_eq();
  const auto mi = p.num_ineq();

  std::optional<OracleResult> best;
  std::vector<int> state(static_cast<std::size_t>(mi), 0);  // 0 inactive, 1 lower, 2 upper
  long tried = 0;

  auto evaluate = [&]() {
    ++tried;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < mi; ++i)
      if (state[static_cast<std::size_t>(i)] != 0) rows.push_back(i);
    const auto na = me + static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd M(na, n);
    Eigen::VectorXd t(na);
    if (me) {
      M.topRows(me) = A;
      t.head(me) = p.b;
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto i = rows[r];
      M.row(me + static_cast<Eigen::Index>(r)) = C.row(i);
      t[me + static_cast<Eigen::Index>(r)] = state[static_cast<std::size_t>(i)] == 1 ? p.l[i] : p.u[i];
    }
    // [Q M'; M 0] [x; mu] = [-q; t]
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + na, n + na);
    K.topLeftCorner(n, n) = Q;
    K.topRightCorner(n, na) = M.transpose();
    K.bottomLeftCorner(na, n) = M;
    Eigen::VectorXd rhs(n + na);
    rhs << -p.q, t;
    const Eigen::VectorXd z = K.completeOrthogonalDecomposition().solve(rhs);
    const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
    if ((K * z - rhs).cwiseAbs().maxCoeff() > feas_tol * scale) return;
    const Eigen::VectorXd x = z.head(n);
    const Eigen::VectorXd mu = z.tail(na);
    // Multiplier signs: positive at an upper bound, negative at a lower one.
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double m = mu[me + static_cast<Eigen::Index>(r)];
      if (state[static_cast<std::size_t>(rows[r])] == 2 && m < -1e-9) return;
      if (state[static_cast<std::size_t>(rows[r])] == 1 && m > 1e-9) return;
    }
    const Eigen::VectorXd cx = C * x;
    for (Eigen::Index i = 0; i < mi; ++i) {
      const double scale = 1.0 + std::abs(cx[i]);
      if (cx[i] < p.l[i] - feas_tol * scale || cx[i] > p.u[i] + feas_tol * scale) return;
    }
    const double obj = 0.5 * x.dot(Q * x) + p.q.dot(x);
    if (!best || obj < best->objective) best = OracleResult{x, obj, 0};
  };

  // Odometer over the per-row states, skipping states whose bound is infinite
  // and the redundant "upper" state of a row with l == u.
  auto allowed = [&](Eigen::Index i, int s) {
    if (s == 1) return std::isfinite(p.l[i]);
    if (s == 2) return std::isfinite(p.u[i]) && p.u[i] != p.l[i];
    return true;
  };
  while (true) {
    evaluate();
    Eigen::Index i = 0;
    for (; i < mi; ++i) {
      auto& s = state[static_cast<std::size_t>(i)];
      int next = s + 1;
      while (next <= 2 && !allowed(i, next)) ++next;
      if (next <= 2) {
        s = next;
        break;
      }
      s = 0;
    }
    if (i == mi) break;
  }
  if (best) best->active_sets_tried = tried;
  return best;
}

}  // namespace dic::test
