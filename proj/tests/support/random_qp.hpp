#pragma once

// Random feasible QP instances for solver tests. Feasibility is guaranteed by
// building every constraint around a random interior point x0; a share of the
// rows is made tight at x0 so that solutions have non-trivial active sets.

#include <random>

#include "dic/qp.hpp"

namespace dic::test {

struct RandomQpShape {
  int n = 10;
  int num_eq = 2;
  int num_ineq = 8;
  bool strictly_convex = true;
};

inline qp::QpProblem random_feasible_qp(std::mt19937_64& rng, const RandomQpShape& shape) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = shape.n;

  Eigen::MatrixXd factor(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) factor(i, j) = normal(rng);
  Eigen::MatrixXd Q;
  if (shape.strictly_convex) {
    Q = factor.transpose() * factor / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
  } else {
    const int rank = std::max(1, n / 2);
    const Eigen::MatrixXd low = factor.topRows(rank);
    Q = low.transpose() * low / n;
  }
  Eigen::VectorXd q(n);
  for (int i = 0; i < n; ++i) q[i] = 3.0 * normal(rng);
  // With a singular Q, q must lie in its range or the objective can fall
  // without bound along the null space.
  if (!shape.strictly_convex) q = Q * q;
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0[i] = normal(rng);

  std::vector<qp::Triplet> qt, at, ct;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (Q(i, j) != 0.0) qt.emplace_back(i, j, Q(i, j));

  Eigen::VectorXd b(shape.num_eq);
  for (int r = 0; r < shape.num_eq; ++r) {
    double row_dot = 0.0;
    for (int j = 0; j < n; ++j) {
      if (unit(rng) < 0.5 && j != r % n) continue;
      const double v = normal(rng);
      at.emplace_back(r, j, v);
      row_dot += v * x0[j];
    }
    b[r] = row_dot;
  }

  Eigen::VectorXd l(shape.num_ineq), u(shape.num_ineq);
  for (int r = 0; r < shape.num_ineq; ++r) {
    double row_dot = 0.0;
    for (int j = 0; j < n; ++j) {
      if (unit(rng) < 0.6 && j != r % n) continue;
      const double v = normal(rng);
      ct.emplace_back(r, j, v);
      row_dot += v * x0[j];
    }
    const double kind = unit(rng);
    const double slack_lo = unit(rng) < 0.3 ? 0.0 : unit(rng);
    const double slack_hi = unit(rng) < 0.3 ? 0.0 : unit(rng);
    if (kind < 0.4) {
      l[r] = -qp::kInf;
      u[r] = row_dot + slack_hi;
    } else if (kind < 0.8) {
      l[r] = row_dot - slack_lo;
      u[r] = qp::kInf;
    } else {
      l[r] = row_dot - slack_lo;
      u[r] = row_dot + slack_hi + 0.1;
    }
  }
  return qp::make_problem(n, qt, q, at, b, ct, l, u);
}

}  // namespace dic::test
