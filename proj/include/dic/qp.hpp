#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dic::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Vector = Eigen::VectorXd;

/// minimize 1/2 x'Qx + q'x  subject to  Ax = b,  l <= Cx <= u.
///
/// Q is stored with both triangles. Bounds may be infinite; a row with
/// l == u is an equality written as a box.
struct QpProblem {
  SparseMatrix Q;
  Vector q;
  SparseMatrix A;
  Vector b;
  SparseMatrix C;
  Vector l;
  Vector u;
  std::vector<std::string> variable_names;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_eq() const { return b.size(); }
  Eigen::Index num_ineq() const { return l.size(); }

  double objective(const Vector& x) const;
  /// Throws std::invalid_argument on inconsistent dimensions, an asymmetric
  /// Q or l > u.
  void validate() const;
};

/// Builds a problem from triplet lists; convenient for tests and I/O.
QpProblem make_problem(Eigen::Index n, const std::vector<Triplet>& Q, Vector q, const std::vector<Triplet>& A, Vector b,
                       const std::vector<Triplet>& C, Vector l, Vector u);

enum class QpStatus { optimal, max_iter, infeasible };
const char* to_string(QpStatus s);

struct QpSolution {
  Vector x;
  /// Multipliers: equality rows first, then inequality rows. Positive values
  /// push against upper bounds, negative ones against lower bounds.
  Vector y;
  QpStatus status = QpStatus::max_iter;
  double primal_residual = kInf;
  double dual_residual = kInf;
  double complementarity = kInf;
  /// For status == infeasible: ||C'dy|| / ||dy|| of the certificate.
  double infeasibility_certificate = kInf;
  double objective = 0.0;
  int iterations = 0;
  bool polished = false;
};

struct SolverSettings {
  double tol = 1e-5;
  int max_iter = 20000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool adaptive_rho = true;
  int scaling_iterations = 10;
  bool polish = true;
  double infeasibility_tol = 1e-7;
  /// Recompute KKT residuals of every optimal answer and demote it to
  /// max_iter if they exceed `tol`.
  bool certify = true;
};

struct WarmStart {
  Vector x;
  Vector y;  // may be empty
};

/// ADMM operator splitting on the equilibrated problem, followed by an
/// active-set polish of the ADMM iterate. Deterministic and reentrant.
QpSolution solve(const QpProblem& problem, const SolverSettings& settings = {}, const WarmStart* warm = nullptr);

struct KktResiduals {
  double primal = 0.0;           // worst constraint violation
  double dual = 0.0;             // ||Qx + q + A'y_eq + C'y_in||_inf
  double complementarity = 0.0;  // worst min(|y_i|, distance to the bound y_i presses on)
};

KktResiduals kkt_residuals(const QpProblem& problem, const Vector& x, const Vector& y);

/// Primal objective minus the Lagrange dual value at (x, y); zero at a KKT
/// point and non-negative whenever x is feasible and y has consistent signs.
double duality_gap(const QpProblem& problem, const Vector& x, const Vector& y);

/// Plain-text exchange format, see README ("QP exchange format").
void write_problem(std::ostream& out, const QpProblem& problem);
QpProblem read_problem(std::istream& in);

}  // namespace dic::qp
