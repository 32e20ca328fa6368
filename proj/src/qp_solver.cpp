// Operator-splitting QP solver.
//
// The iteration is the ADMM scheme popularised by OSQP: Ruiz equilibration of
// the KKT matrix, a quasi-definite KKT system factorised once per penalty
// value, over-relaxation, residual-balancing penalty updates, and an
// active-set polish that turns a medium-accuracy ADMM iterate into a
// high-accuracy KKT point.
#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "dic/qp.hpp"

namespace dic::qp {

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal:
      return "optimal";
    case QpStatus::max_iter:
      return "max_iter";
    case QpStatus::infeasible:
      return "infeasible";
  }
  return "unknown";
}

double QpProblem::objective(const Vector& x) const { return 0.5 * x.dot(Q * x) + q.dot(x); }

void QpProblem::validate() const {
  const auto n = num_vars();
  auto fail = [](const std::string& m) { throw std::invalid_argument("QpProblem: " + m); };
  if (Q.rows() != n || Q.cols() != n) fail("Q must be n x n");
  if (A.cols() != n || A.rows() != b.size()) fail("A/b dimensions disagree");
  if (C.cols() != n || C.rows() != l.size() || l.size() != u.size()) fail("C/l/u dimensions disagree");
  if (!variable_names.empty() && static_cast<Eigen::Index>(variable_names.size()) != n)
    fail("variable_names must have one entry per variable");
  const SparseMatrix asym = SparseMatrix(Q.transpose()) - Q;
  const double scale = 1.0 + (Q.nonZeros() ? Eigen::Map<const Vector>(Q.valuePtr(), Q.nonZeros()).cwiseAbs().maxCoeff() : 0.0);
  for (int k = 0; k < asym.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(asym, k); it; ++it)
      if (std::abs(it.value()) > 1e-12 * scale) fail("Q must be symmetric");
  for (Eigen::Index i = 0; i < l.size(); ++i)
    if (!(l[i] <= u[i])) fail("l must not exceed u (row " + std::to_string(i) + ")");
  if (!b.allFinite()) fail("b must be finite");
}

QpProblem make_problem(Eigen::Index n, const std::vector<Triplet>& Q, Vector q, const std::vector<Triplet>& A, Vector b,
                       const std::vector<Triplet>& C, Vector l, Vector u) {
  QpProblem p;
  p.Q.resize(n, n);
  p.Q.setFromTriplets(Q.begin(), Q.end());
  p.q = std::move(q);
  p.A.resize(b.size(), n);
  p.A.setFromTriplets(A.begin(), A.end());
  p.b = std::move(b);
  p.C.resize(l.size(), n);
  p.C.setFromTriplets(C.begin(), C.end());
  p.l = std::move(l);
  p.u = std::move(u);
  return p;
}

KktResiduals kkt_residuals(const QpProblem& p, const Vector& x, const Vector& y) {
  const auto me = p.num_eq();
  const auto mi = p.num_ineq();
  if (x.size() != p.num_vars() || y.size() != me + mi) throw std::invalid_argument("kkt_residuals: dimension mismatch");
  const Vector y_eq = y.head(me);
  const Vector y_in = y.tail(mi);
  KktResiduals r;

  Vector grad = p.Q * x + p.q;
  if (me) grad += p.A.transpose() * y_eq;
  if (mi) grad += p.C.transpose() * y_in;
  r.dual = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;

  if (me) r.primal = (p.A * x - p.b).cwiseAbs().maxCoeff();
  if (mi) {
    const Vector cx = p.C * x;
    for (Eigen::Index i = 0; i < mi; ++i) {
      r.primal = std::max({r.primal, p.l[i] - cx[i], cx[i] - p.u[i]});
      double comp = 0.0;
      if (y_in[i] > 0.0)
        comp = std::isfinite(p.u[i]) ? std::min(y_in[i], std::abs(p.u[i] - cx[i])) : y_in[i];
      else if (y_in[i] < 0.0)
        comp = std::isfinite(p.l[i]) ? std::min(-y_in[i], std::abs(cx[i] - p.l[i])) : -y_in[i];
      r.complementarity = std::max(r.complementarity, comp);
    }
  }
  return r;
}

double duality_gap(const QpProblem& p, const Vector& x, const Vector& y) {
  const auto me = p.num_eq();
  const auto mi = p.num_ineq();
  // Primal objective minus the dual function value evaluated at x:
  //   x'Qx + q'x + b'y_eq + sum(u y+ + l y-)
  double gap = x.dot(p.Q * x) + p.q.dot(x);
  if (me) gap += p.b.dot(y.head(me));
  for (Eigen::Index i = 0; i < mi; ++i) {
    const double yi = y[me + i];
    if (yi > 0.0) gap += p.u[i] * yi;
    if (yi < 0.0) gap += p.l[i] * yi;
  }
  return gap;
}

namespace {

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kEqRhoFactor = 1e3;
constexpr double kScaleMin = 1e-4;
constexpr double kScaleMax = 1e4;
// Weakly feasible problems (feasible sets without interior) have unbounded
// multipliers whose increments look like certificates with a support that
// tends to zero; a genuine certificate keeps a support of the order of its
// terms and persists across checks.
constexpr double kSupportMargin = 1e-5;
constexpr int kCertificateChecks = 5;
constexpr int kPolishRounds = 25;
constexpr int kActiveSetSolves = 200;
constexpr double kReleaseFraction = 0.1;
constexpr double kNullStep = 1e-10;
constexpr double kBlockTie = 1e-12;

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

Vector col_norms(const SparseMatrix& m) {
  Vector out = Vector::Zero(m.cols());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) out[it.col()] = std::max(out[it.col()], std::abs(it.value()));
  return out;
}

Vector row_norms(const SparseMatrix& m) {
  Vector out = Vector::Zero(m.rows());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) out[it.row()] = std::max(out[it.row()], std::abs(it.value()));
  return out;
}

double scale_factor(double norm) {
  if (norm < kScaleMin) return 1.0;
  return 1.0 / std::sqrt(std::min(norm, kScaleMax));
}

/// Equilibrated problem: P = c D Q D, q = c D q, A = E [A; C] D.
struct Scaled {
  SparseMatrix P;
  Vector q;
  SparseMatrix A;
  SparseMatrix At;
  Vector lo, hi;
  Vector D, E;
  double c = 1.0;
};

Scaled equilibrate(const QpProblem& p, int iterations) {
  const auto n = p.num_vars();
  const auto me = p.num_eq();
  const auto m = me + p.num_ineq();
  Scaled s;
  s.P = p.Q;
  s.q = p.q;
  {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(p.A.nonZeros() + p.C.nonZeros()));
    for (int k = 0; k < p.A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(p.A, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < p.C.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(p.C, k); it; ++it) t.emplace_back(me + it.row(), it.col(), it.value());
    s.A.resize(m, n);
    s.A.setFromTriplets(t.begin(), t.end());
  }
  s.lo.resize(m);
  s.hi.resize(m);
  s.lo << p.b, p.l;
  s.hi << p.b, p.u;
  s.D = Vector::Ones(n);
  s.E = Vector::Ones(m);

  for (int it = 0; it < iterations; ++it) {
    const Vector pc = col_norms(s.P);
    const Vector ac = col_norms(s.A);
    const Vector ar = row_norms(s.A);
    Vector dd(n), de(m);
    for (Eigen::Index j = 0; j < n; ++j) dd[j] = scale_factor(std::max(pc[j], ac[j]));
    for (Eigen::Index i = 0; i < m; ++i) de[i] = scale_factor(ar[i]);
    s.P = dd.asDiagonal() * s.P * dd.asDiagonal();
    s.q = dd.cwiseProduct(s.q);
    s.A = de.asDiagonal() * s.A * dd.asDiagonal();
    s.D = s.D.cwiseProduct(dd);
    s.E = s.E.cwiseProduct(de);

    const Vector pcn = col_norms(s.P);
    const double mean_p = n ? pcn.mean() : 0.0;
    double gamma = std::max(mean_p, inf_norm(s.q));
    gamma = gamma < kScaleMin ? 1.0 : 1.0 / std::min(gamma, kScaleMax);
    s.P *= gamma;
    s.q *= gamma;
    s.c *= gamma;
  }
  s.lo = s.E.cwiseProduct(s.lo);
  s.hi = s.E.cwiseProduct(s.hi);
  s.At = s.A.transpose();
  s.P.makeCompressed();
  s.A.makeCompressed();
  s.At.makeCompressed();
  return s;
}

using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

/// Lower triangle of [P + sigma I, A'; A, -diag(1/rho)].
SparseMatrix assemble_kkt(const SparseMatrix& P, const SparseMatrix& A, double sigma, const Vector& rho) {
  const auto n = P.rows();
  const auto m = A.rows();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(P.nonZeros() + A.nonZeros() + n + m));
  for (int k = 0; k < P.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(P, k); it; ++it)
      if (it.row() >= it.col()) t.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index j = 0; j < n; ++j) t.emplace_back(j, j, sigma);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) t.emplace_back(n + it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < m; ++i) t.emplace_back(n + i, n + i, -1.0 / rho[i]);
  SparseMatrix kkt(n + m, n + m);
  kkt.setFromTriplets(t.begin(), t.end());
  kkt.makeCompressed();
  return kkt;
}

enum class RowKind { equality, inequality, free };

struct Iterate {
  Vector x, z, y;
};

struct Residuals {
  double prim = 0.0, dual = 0.0;
  double prim_scale = 0.0, dual_scale = 0.0;  // normalisers for relative tests
};

class AdmmSolver {
 public:
  AdmmSolver(const QpProblem& problem, const SolverSettings& settings)
      : problem_(problem), settings_(settings), s_(equilibrate(problem, settings.scaling_iterations)) {
    const auto m = s_.A.rows();
    kinds_.resize(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!std::isfinite(s_.lo[i]) && !std::isfinite(s_.hi[i]))
        kinds_[i] = RowKind::free;
      else if (s_.hi[i] - s_.lo[i] < 1e-12 * (1.0 + std::abs(s_.hi[i])))
        kinds_[i] = RowKind::equality;
      else
        kinds_[i] = RowKind::inequality;
    }
    set_rho(settings.rho);
    kkt_ = assemble_kkt(s_.P, s_.A, settings_.sigma, rho_vec_);
    ldlt_.analyzePattern(kkt_);
    factorize();
  }

  QpSolution run(const WarmStart* warm) {
    const auto n = s_.P.rows();
    const auto m = s_.A.rows();
    Iterate it{Vector::Zero(n), Vector::Zero(m), Vector::Zero(m)};
    if (warm && warm->x.size() == n) {
      it.x = warm->x.cwiseQuotient(s_.D);
      if (warm->y.size() == m) it.y = warm->y.cwiseQuotient(s_.E) * s_.c;
    }
    it.z = project(s_.A * it.x);

    // A warm start from a neighbouring problem usually carries the right
    // active set already.
    if (warm && settings_.polish && warm->y.size() == m) {
      QpSolution quick = polish(it, 0);
      if (accepted(quick)) return quick;
    }

    QpSolution best;
    best.x = unscale_x(it.x);
    best.y = unscale_y(it.y);
    double best_score = kInf;

    double eps = std::max(1e-3, settings_.tol);
    const int check_every = 5;
    int next_adapt = 25;
    int certified_checks = 0;
    Vector y_prev = it.y;
    Vector rhs(n + m);
    Vector x_tilde(n), z_tilde(m);

    for (int k = 1; k <= settings_.max_iter; ++k) {
      y_prev = it.y;
      rhs.head(n) = settings_.sigma * it.x - s_.q;
      rhs.tail(m) = it.z - it.y.cwiseQuotient(rho_vec_);
      const Vector sol = ldlt_.solve(rhs);
      x_tilde = sol.head(n);
      z_tilde = it.z + (sol.tail(m) - it.y).cwiseQuotient(rho_vec_);

      const double a = settings_.alpha;
      it.x = a * x_tilde + (1.0 - a) * it.x;
      const Vector z_relaxed = a * z_tilde + (1.0 - a) * it.z;
      const Vector z_next = project(z_relaxed + it.y.cwiseQuotient(rho_vec_));
      it.y += rho_vec_.cwiseProduct(z_relaxed - z_next);
      it.z = z_next;

      if (k % check_every != 0 && k != settings_.max_iter) continue;

      certified_checks = infeasible(it.y - y_prev, best.infeasibility_certificate) ? certified_checks + 1 : 0;
      if (certified_checks >= kCertificateChecks) {
        best.x = unscale_x(it.x);
        best.y = unscale_y(it.y);
        best.status = QpStatus::infeasible;
        best.iterations = k;
        best.objective = problem_.objective(best.x);
        return best;
      }

      const Residuals r = residuals(it);
      const bool converged = r.prim <= eps * (1.0 + r.prim_scale) && r.dual <= eps * (1.0 + r.dual_scale);

      if (converged) {
        QpSolution candidate = finish(it, k, false);
        if (accepted(candidate)) return candidate;
        if (settings_.polish) {
          QpSolution polished = polish(it, k);
          if (accepted(polished)) return polished;
          keep_best(polished, best, best_score);
        }
        keep_best(candidate, best, best_score);
        eps = std::max(eps * 0.1, 1e-14);
      }

      if (settings_.adaptive_rho && k >= next_adapt) {
        adapt_rho(it, r);
        next_adapt = k + std::max(25, k / 2);
      }
    }
    QpSolution last = finish(it, settings_.max_iter, false);
    keep_best(last, best, best_score);
    best.status = QpStatus::max_iter;
    best.iterations = settings_.max_iter;
    return best;
  }

 private:
  void set_rho(double rho) {
    rho_ = std::clamp(rho, kRhoMin, kRhoMax);
    rho_vec_.resize(s_.A.rows());
    for (Eigen::Index i = 0; i < rho_vec_.size(); ++i) {
      switch (kinds_[i]) {
        case RowKind::equality:
          rho_vec_[i] = kEqRhoFactor * rho_;
          break;
        case RowKind::free:
          rho_vec_[i] = kRhoMin;
          break;
        case RowKind::inequality:
          rho_vec_[i] = rho_;
          break;
      }
    }
  }

  void factorize() {
    const auto n = s_.P.rows();
    for (Eigen::Index i = 0; i < rho_vec_.size(); ++i) kkt_.coeffRef(n + i, n + i) = -1.0 / rho_vec_[i];
    ldlt_.factorize(kkt_);
    if (ldlt_.info() != Eigen::Success) throw std::runtime_error("QP solver: KKT factorization failed");
  }

  Vector project(const Vector& v) const { return v.cwiseMax(s_.lo).cwiseMin(s_.hi); }

  Vector unscale_x(const Vector& x) const { return s_.D.cwiseProduct(x); }
  Vector unscale_y(const Vector& y) const { return s_.E.cwiseProduct(y) / s_.c; }

  Residuals residuals(const Iterate& it) const {
    Residuals r;
    const Vector ax = s_.A * it.x;
    const Vector px = s_.P * it.x;
    const Vector aty = s_.At * it.y;
    const Vector e_inv = s_.E.cwiseInverse();
    const Vector d_inv = s_.D.cwiseInverse();
    r.prim = inf_norm(e_inv.cwiseProduct(ax - it.z));
    r.prim_scale = std::max(inf_norm(e_inv.cwiseProduct(ax)), inf_norm(e_inv.cwiseProduct(it.z)));
    r.dual = inf_norm(d_inv.cwiseProduct(px + s_.q + aty)) / s_.c;
    r.dual_scale = std::max({inf_norm(d_inv.cwiseProduct(px)), inf_norm(d_inv.cwiseProduct(aty)),
                             inf_norm(d_inv.cwiseProduct(s_.q))}) /
                   s_.c;
    return r;
  }

  void adapt_rho(const Iterate& it, const Residuals&) {
    // Balance the residuals in the scaled space.
    const Vector ax = s_.A * it.x;
    const Vector px = s_.P * it.x;
    const Vector aty = s_.At * it.y;
    const double prim = inf_norm(ax - it.z) / std::max({inf_norm(ax), inf_norm(it.z), 1e-30});
    const double dual =
        inf_norm(px + s_.q + aty) / std::max({inf_norm(px), inf_norm(aty), inf_norm(s_.q), 1e-30});
    if (prim <= 0.0 || dual <= 0.0) return;
    const double proposed = std::clamp(rho_ * std::sqrt(prim / dual), kRhoMin, kRhoMax);
    if (proposed > 5.0 * rho_ || proposed < 0.2 * rho_) {
      set_rho(proposed);
      factorize();
    }
  }

  bool infeasible(const Vector& dy_scaled, double& certificate) const {
    const Vector dy = s_.E.cwiseProduct(dy_scaled);
    const double norm = inf_norm(dy);
    if (norm < 1e-12) return false;
    const double stat = inf_norm(s_.D.cwiseInverse().cwiseProduct(s_.At * dy_scaled)) / norm;
    if (stat > settings_.infeasibility_tol) return false;
    const Vector lo = s_.lo.cwiseQuotient(s_.E);
    const Vector hi = s_.hi.cwiseQuotient(s_.E);
    // The support function is compared against the magnitude of its own
    // terms too, so rounding in nearly cancelling sums (tight but feasible
    // boxes) cannot pass for a certificate.
    double support = 0.0;
    double magnitude = 0.0;
    for (Eigen::Index i = 0; i < dy.size(); ++i) {
      if (dy[i] > 0.0) {
        if (!std::isfinite(hi[i])) return false;
        support += hi[i] * dy[i];
        magnitude += std::abs(hi[i] * dy[i]);
      } else if (dy[i] < 0.0) {
        if (!std::isfinite(lo[i])) return false;
        support += lo[i] * dy[i];
        magnitude += std::abs(lo[i] * dy[i]);
      }
    }
    if (support >= -settings_.infeasibility_tol * norm - kSupportMargin * magnitude) return false;
    certificate = stat;
    return true;
  }

  QpSolution finish(const Iterate& it, int iterations, bool polished) const {
    QpSolution s;
    s.x = unscale_x(it.x);
    s.y = unscale_y(it.y);
    return certify(std::move(s), iterations, polished);
  }

  QpSolution certify(QpSolution s, int iterations, bool polished) const {
    // No multiplier may push against an infinite bound.
    const auto me = problem_.num_eq();
    for (Eigen::Index i = 0; i < problem_.num_ineq(); ++i) {
      double& yi = s.y[me + i];
      if ((yi > 0.0 && problem_.u[i] == kInf) || (yi < 0.0 && problem_.l[i] == -kInf)) yi = 0.0;
    }
    const KktResiduals r = kkt_residuals(problem_, s.x, s.y);
    s.primal_residual = r.primal;
    s.dual_residual = r.dual;
    s.complementarity = r.complementarity;
    s.iterations = iterations;
    s.polished = polished;
    s.objective = problem_.objective(s.x);
    s.status = QpStatus::max_iter;
    return s;
  }

  bool accepted(QpSolution& s) const {
    const double tol = settings_.tol;
    const bool ok = s.primal_residual <= tol && s.dual_residual <= tol && s.complementarity <= tol;
    if (!ok && settings_.certify) return false;
    s.status = QpStatus::optimal;
    return true;
  }

  static void keep_best(const QpSolution& candidate, QpSolution& best, double& best_score) {
    const double score = std::max({candidate.primal_residual, candidate.dual_residual, candidate.complementarity});
    if (score < best_score) {
      best_score = score;
      best = candidate;
    }
  }

  // Active bound per row: 0 inactive, -1 lower, +1 upper. Equality rows are
  // always active.
  std::vector<int> guess_active(const Vector& z, const Vector& y, const Vector& rho) const {
    std::vector<int> side(static_cast<std::size_t>(z.size()), 0);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (kinds_[i] == RowKind::equality) {
        side[i] = 1;
      } else if (kinds_[i] == RowKind::inequality) {
        const double lower = z[i] - s_.lo[i] + y[i] / rho[i];
        const double upper = z[i] - s_.hi[i] + y[i] / rho[i];
        if (lower < 0.0) side[i] = -1;
        else if (upper > 0.0) side[i] = 1;
      }
    }
    return side;
  }

  // Solves the equality-constrained problem on the active rows; returns false
  // when the reduced KKT system cannot be factorised.
  bool solve_reduced(const std::vector<int>& side, Vector& x, Vector& y) const {
    const auto n = s_.P.rows();
    const auto m = s_.A.rows();
    std::vector<Eigen::Index> active;
    std::vector<double> bound;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (side[i] == 0) continue;
      active.push_back(i);
      bound.push_back(side[i] < 0 ? s_.lo[i] : s_.hi[i]);
    }
    const auto na = static_cast<Eigen::Index>(active.size());
    constexpr double delta = 1e-7;

    std::vector<Triplet> t0;  // unregularised reduced KKT, lower triangle
    for (int k = 0; k < s_.P.outerSize(); ++k)
      for (SparseMatrix::InnerIterator p(s_.P, k); p; ++p)
        if (p.row() >= p.col()) t0.emplace_back(p.row(), p.col(), p.value());
    for (Eigen::Index r = 0; r < na; ++r)
      for (SparseMatrix::InnerIterator a(s_.At, static_cast<int>(active[static_cast<std::size_t>(r)])); a; ++a)
        t0.emplace_back(n + r, a.row(), a.value());
    SparseMatrix k0(n + na, n + na);
    k0.setFromTriplets(t0.begin(), t0.end());
    SparseMatrix k0_full = k0.selfadjointView<Eigen::Lower>();

    std::vector<Triplet> t1 = t0;
    for (Eigen::Index j = 0; j < n; ++j) t1.emplace_back(j, j, delta);
    for (Eigen::Index r = 0; r < na; ++r) t1.emplace_back(n + r, n + r, -delta);
    SparseMatrix k1(n + na, n + na);
    k1.setFromTriplets(t1.begin(), t1.end());

    Ldlt ldlt;
    ldlt.compute(k1);
    if (ldlt.info() != Eigen::Success) return false;

    Vector rhs(n + na);
    rhs.head(n) = -s_.q;
    for (Eigen::Index r = 0; r < na; ++r) rhs[n + r] = bound[static_cast<std::size_t>(r)];
    Vector sol = ldlt.solve(rhs);
    for (int refine = 0; refine < 10; ++refine) {
      const Vector res = rhs - k0_full * sol;
      if (inf_norm(res) < 1e-14 * (1.0 + inf_norm(rhs))) break;
      sol += ldlt.solve(res);
    }
    if (!sol.allFinite()) return false;

    x = sol.head(n);
    y = Vector::Zero(m);
    for (Eigen::Index r = 0; r < na; ++r) y[active[static_cast<std::size_t>(r)]] = sol[n + r];
    return true;
  }

  QpSolution evaluate(const Vector& x, const Vector& y, int iterations) const {
    QpSolution s;
    s.x = unscale_x(x);
    s.y = unscale_y(y);
    return certify(std::move(s), iterations, true);
  }

  static double score(const QpSolution& s) { return std::max({s.primal_residual, s.dual_residual, s.complementarity}); }

  // Polish in two stages. A primal-dual active-set update seeded by the ADMM
  // iterate runs while it keeps improving; if it ends on a feasible point
  // whose only defect is wrongly signed multipliers, a primal active-set
  // phase releases those rows and walks downhill with a ratio test.
  QpSolution polish(const Iterate& it, int iterations) const {
    QpSolution best;
    best.primal_residual = best.dual_residual = best.complementarity = kInf;
    double best_score = kInf;
    std::vector<int> best_side;
    Vector best_x, best_y;
    const Vector unit = Vector::Ones(s_.A.rows());
    auto side = guess_active(it.z, it.y, rho_vec_);
    for (int round = 0; round < kPolishRounds; ++round) {
      Vector x, y;
      if (!solve_reduced(side, x, y)) break;
      QpSolution s = evaluate(x, y, iterations);
      const double sc = score(s);
      if (sc >= best_score) break;
      best_score = sc;
      best = std::move(s);
      best_side = side;
      best_x = x;
      best_y = y;
      if (sc <= settings_.tol) return best;
      auto next = guess_active(s_.A * x, y, unit);
      if (next == side) break;
      side = std::move(next);
    }
    if (best_side.empty() || best.primal_residual > settings_.tol || best.dual_residual > settings_.tol) return best;
    QpSolution refined = primal_active_set(best_side, best_x, best_y, iterations);
    return score(refined) < best_score ? refined : best;
  }

  // Primal active-set iterations from a feasible point that is optimal on
  // its working set `side`.
  QpSolution primal_active_set(std::vector<int> side, Vector x, Vector y, int iterations) const {
    const auto m = s_.A.rows();
    const Vector e_over_c = s_.E / s_.c;
    QpSolution best = evaluate(x, y, iterations);
    bool one_at_a_time = false;
    std::set<std::vector<int>> visited;
    for (int solves = 0; solves < kActiveSetSolves;) {
      // Release wrongly signed rows (multiplier measured in unscaled units);
      // after a released row blocked straight away, only the worst one.
      std::vector<Eigen::Index> released;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (kinds_[i] != RowKind::inequality || side[i] == 0) continue;
        const double signed_y = side[i] * y[i] * e_over_c[i];
        if (signed_y >= -kReleaseFraction * settings_.tol) continue;
        released.push_back(i);
        if (one_at_a_time) break;  // lowest index first, which cannot cycle
      }
      for (auto i : released) side[i] = 0;
      if (released.empty()) break;
      // Degenerate working sets can cycle; give up on the first repeat.
      if (!visited.insert(side).second) break;
      // Walk to the minimiser on the reduced set, stopping at blocking rows.
      while (solves < kActiveSetSolves) {
        Vector xs, ys;
        ++solves;
        if (!solve_reduced(side, xs, ys)) return best;
        const Vector d = xs - x;
        // A released row that does not move anything was redundant: the
        // working set was linearly dependent and only the multipliers change.
        if (inf_norm(d) <= kNullStep * (1.0 + inf_norm(x))) {
          x = xs;
          y = ys;
          break;
        }
        const Vector ax = s_.A * x;
        const Vector ad = s_.A * d;
        // Ratio test; every row that blocks at the shortest step joins.
        Vector t = Vector::Constant(m, kInf);
        for (Eigen::Index i = 0; i < m; ++i) {
          if (kinds_[i] != RowKind::inequality || side[i] != 0) continue;
          if (ad[i] > 0.0 && std::isfinite(s_.hi[i]))
            t[i] = std::max(0.0, (s_.hi[i] - ax[i]) / ad[i]);
          else if (ad[i] < 0.0 && std::isfinite(s_.lo[i]))
            t[i] = std::max(0.0, (s_.lo[i] - ax[i]) / ad[i]);
        }
        const double alpha = std::min(1.0, t.size() ? t.minCoeff() : kInf);
        bool blocked = false;
        for (Eigen::Index i = 0; i < m; ++i) {
          if (t[i] > alpha + kBlockTie || t[i] > 1.0) continue;
          side[static_cast<std::size_t>(i)] = ad[i] > 0.0 ? 1 : -1;
          blocked = true;
          if (alpha == 0.0 && std::find(released.begin(), released.end(), i) != released.end())
            one_at_a_time = true;
        }
        x += alpha * d;
        if (!blocked) {
          y = ys;
          break;
        }
      }
      QpSolution s = evaluate(x, y, iterations);
      if (score(s) < score(best)) best = std::move(s);
      if (score(best) <= settings_.tol) break;
    }
    return best;
  }

  const QpProblem& problem_;
  SolverSettings settings_;
  Scaled s_;
  std::vector<RowKind> kinds_;
  double rho_ = 0.1;
  Vector rho_vec_;
  SparseMatrix kkt_;
  Ldlt ldlt_;
};

}  // namespace

QpSolution solve(const QpProblem& problem, const SolverSettings& settings, const WarmStart* warm) {
  problem.validate();
  if (problem.num_vars() == 0) {
    QpSolution s;
    s.x = Vector::Zero(0);
    s.y = Vector::Zero(problem.num_eq() + problem.num_ineq());
    const KktResiduals r = kkt_residuals(problem, s.x, s.y);
    s.primal_residual = r.primal;
    s.dual_residual = r.dual;
    s.complementarity = r.complementarity;
    s.status = r.primal <= settings.tol ? QpStatus::optimal : QpStatus::infeasible;
    return s;
  }
  AdmmSolver solver(problem, settings);
  return solver.run(warm);
}

}  // namespace dic::qp
