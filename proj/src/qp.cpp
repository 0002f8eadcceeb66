#include "ztube/qp.hpp"

#include "ztube/setalg.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ztube {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

/// Largest step in (0, 1] keeping v + alpha dv >= 0.
double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

struct EqualityReduction {
  bool consistent = true;
  MatrixXd matrix;
  VectorXd rhs;
};

/// Replaces A x = b by an equivalent full-row-rank system.
EqualityReduction reduce_equalities(const MatrixXd& a, const VectorXd& b) {
  EqualityReduction out;
  if (a.rows() == 0) {
    out.matrix = a;
    out.rhs = b;
    return out;
  }
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  const double cutoff = 1e-11 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  if (rank == a.rows()) {
    out.matrix = a;
    out.rhs = b;
    return out;
  }
  const MatrixXd u = svd.matrixU().leftCols(rank);
  // b must lie in range(A): residual of the projection onto span(U_r).
  const VectorXd resid = b - u * (u.transpose() * b);
  out.consistent = inf_norm(resid) <= 1e-9 * std::max(1.0, inf_norm(b));
  out.matrix = u.transpose() * a;
  out.rhs = u.transpose() * b;
  return out;
}

void check_shapes(const QuadraticProgram& p) {
  const auto n = p.linear.size();
  detail::require(p.hessian.size() == 0 || (p.hessian.rows() == n && p.hessian.cols() == n),
                  "solve_qp: hessian must be n x n");
  detail::require(p.eq_matrix.rows() == p.eq_rhs.size(), "solve_qp: equality rows/rhs mismatch");
  detail::require(p.eq_matrix.rows() == 0 || p.eq_matrix.cols() == n, "solve_qp: equality columns mismatch");
  detail::require(p.ineq_matrix.rows() == p.ineq_rhs.size(), "solve_qp: inequality rows/rhs mismatch");
  detail::require(p.ineq_matrix.rows() == 0 || p.ineq_matrix.cols() == n, "solve_qp: inequality columns mismatch");
}

QpSolution interior_point(const MatrixXd& h, const VectorXd& f, const MatrixXd& aeq, const VectorXd& beq,
                          const MatrixXd& ain, const VectorXd& bin, const QpSettings& settings) {
  const Eigen::Index n = f.size();
  const Eigen::Index p = aeq.rows();
  const Eigen::Index m = ain.rows();
  const double reg = 1e-10;
  // Constraint matrices built from stacked blocks are mostly zeros.
  const Eigen::SparseMatrix<double> as = ain.sparseView();
  const Eigen::SparseMatrix<double> ast = as.transpose();

  VectorXd x = VectorXd::Zero(n);
  VectorXd y = VectorXd::Zero(p);
  VectorXd s(m), z(m);
  {
    const VectorXd r = bin - (m > 0 ? VectorXd(as * x) : VectorXd(0));
    for (Eigen::Index i = 0; i < m; ++i) s(i) = std::max(1.0, r(i));
    z.setOnes();
  }

  const double scale_f = 1.0 + inf_norm(f);
  const double scale_eq = 1.0 + inf_norm(beq);
  const double scale_in = 1.0 + inf_norm(bin);

  QpSolution sol;
  MatrixXd kkt(n + p, n + p);
  for (int it = 0; it < settings.max_iterations; ++it) {
    VectorXd rd = f + h * x;
    if (p > 0) rd += aeq.transpose() * y;
    if (m > 0) rd += ast * z;
    const VectorXd re = p > 0 ? VectorXd(aeq * x - beq) : VectorXd(0);
    const VectorXd ri = m > 0 ? VectorXd(as * x + s - bin) : VectorXd(0);
    const double mu = m > 0 ? s.dot(z) / static_cast<double>(m) : 0.0;
    const double obj = 0.5 * x.dot(h * x) + f.dot(x);

    sol.iterations = it;
    sol.dual_residual = inf_norm(rd);
    sol.primal_residual = std::max(inf_norm(re), inf_norm(ri));
    sol.complementarity = m > 0 ? s.dot(z) : 0.0;
    if (inf_norm(rd) <= settings.tolerance * scale_f && inf_norm(re) <= settings.tolerance * scale_eq &&
        inf_norm(ri) <= settings.tolerance * scale_in &&
        sol.complementarity <= settings.tolerance * (1.0 + std::abs(obj))) {
      sol.status = SolveStatus::optimal;
      sol.x = x;
      sol.eq_dual = y;
      sol.ineq_dual = z;
      sol.objective = obj;
      return sol;
    }

    const VectorXd w = z.cwiseQuotient(s);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = h;
    if (m > 0) {
      const Eigen::SparseMatrix<double> wa = w.asDiagonal() * as;
      kkt.topLeftCorner(n, n) += MatrixXd(ast * wa);
    }
    kkt.topLeftCorner(n, n).diagonal().array() += reg;
    if (p > 0) {
      kkt.topRightCorner(n, p) = aeq.transpose();
      kkt.bottomLeftCorner(p, n) = aeq;
      kkt.bottomRightCorner(p, p).diagonal().array() = -reg;
    }
    Eigen::PartialPivLU<MatrixXd> lu(kkt);

    // Solves the Newton system for a given complementarity residual rsz.
    auto newton = [&](const VectorXd& rsz, VectorXd& dx, VectorXd& dy, VectorXd& dz, VectorXd& ds) {
      VectorXd rhs(n + p);
      VectorXd top = -rd;
      if (m > 0) top -= ast * VectorXd(w.cwiseProduct(ri) - rsz.cwiseQuotient(s));
      rhs.head(n) = top;
      if (p > 0) rhs.tail(p) = -re;
      VectorXd sol_v = lu.solve(rhs);
      // Two refinement sweeps against the unregularized matrix.
      for (int r = 0; r < 2; ++r) {
        VectorXd resid = rhs - kkt * sol_v;
        resid.head(n) += reg * sol_v.head(n);
        if (p > 0) resid.tail(p) -= reg * sol_v.tail(p);
        sol_v += lu.solve(resid);
      }
      dx = sol_v.head(n);
      dy = sol_v.tail(p);
      if (m > 0) {
        dz = w.cwiseProduct(VectorXd(as * dx) + ri) - rsz.cwiseQuotient(s);
        ds = -(rsz + s.cwiseProduct(dz)).cwiseQuotient(z);
      } else {
        dz = VectorXd(0);
        ds = VectorXd(0);
      }
    };

    VectorXd dx, dy, dz, ds;
    if (m == 0) {
      newton(VectorXd(0), dx, dy, dz, ds);
      x += dx;
      y += dy;
      continue;
    }

    const VectorXd sz = s.cwiseProduct(z);
    newton(sz, dx, dy, dz, ds);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);

    const VectorXd rsz = sz + ds.cwiseProduct(dz) - VectorXd::Constant(m, sigma * mu);
    newton(rsz, dx, dy, dz, ds);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
    if (!(alpha > 1e-14) || !dx.allFinite()) {
      sol.status = SolveStatus::numerical_error;
      break;
    }
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    // Keep strictly interior.
    s = s.cwiseMax(1e-300);
    z = z.cwiseMax(1e-300);
    if (!x.allFinite() || inf_norm(x) > 1e15) {
      sol.status = SolveStatus::numerical_error;
      break;
    }
    sol.status = SolveStatus::max_iterations;
  }
  sol.x = x;
  sol.eq_dual = y;
  sol.ineq_dual = z;
  sol.objective = 0.5 * x.dot(h * x) + f.dot(x);
  return sol;
}

}  // namespace

double QuadraticProgram::objective(const Eigen::VectorXd& x) const {
  double v = linear.dot(x);
  if (hessian.size() > 0) v += 0.5 * x.dot(hessian * x);
  return v;
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::max_iterations:
      return "max_iterations";
    case SolveStatus::numerical_error:
      return "numerical_error";
  }
  return "unknown";
}

double feasibility_violation(const QuadraticProgram& problem, const QpSettings& settings) {
  check_shapes(problem);
  const auto eq = reduce_equalities(problem.eq_matrix, problem.eq_rhs);
  if (!eq.consistent) return -1.0;
  const Eigen::Index n = problem.linear.size();
  const Eigen::Index m = problem.ineq_matrix.rows();
  if (m == 0) return 0.0;

  // Variables [x; t]: min t  s.t. A x - t <= b,  -t <= 0,  |x_i| <= big.
  const double big = 1e6 * (1.0 + inf_norm(problem.ineq_rhs) + inf_norm(problem.eq_rhs));
  MatrixXd ain = MatrixXd::Zero(m + 1 + 2 * n, n + 1);
  VectorXd bin = VectorXd::Zero(m + 1 + 2 * n);
  ain.topLeftCorner(m, n) = problem.ineq_matrix;
  ain.block(0, n, m, 1).setConstant(-1.0);
  bin.head(m) = problem.ineq_rhs;
  ain(m, n) = -1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ain(m + 1 + 2 * i, i) = 1.0;
    ain(m + 2 + 2 * i, i) = -1.0;
    bin(m + 1 + 2 * i) = big;
    bin(m + 2 + 2 * i) = big;
  }
  MatrixXd aeq = MatrixXd::Zero(eq.matrix.rows(), n + 1);
  if (eq.matrix.rows() > 0) aeq.leftCols(n) = eq.matrix;
  VectorXd f = VectorXd::Zero(n + 1);
  f(n) = 1.0;
  const auto sol = interior_point(MatrixXd::Zero(n + 1, n + 1), f, aeq, eq.rhs, ain, bin, settings);
  if (sol.status != SolveStatus::optimal) return -1.0;
  return std::max(0.0, sol.x(n));
}

QpSolution solve_qp(const QuadraticProgram& problem, const QpSettings& settings) {
  check_shapes(problem);
  const Eigen::Index n = problem.linear.size();
  const MatrixXd h = problem.hessian.size() > 0 ? problem.hessian : MatrixXd::Zero(n, n);
  const auto eq = reduce_equalities(problem.eq_matrix, problem.eq_rhs);
  if (!eq.consistent) {
    QpSolution sol;
    sol.status = SolveStatus::infeasible;
    return sol;
  }
  const MatrixXd ain = problem.ineq_matrix.rows() > 0 ? problem.ineq_matrix : MatrixXd(0, n);
  const MatrixXd aeq = eq.matrix.rows() > 0 ? eq.matrix : MatrixXd(0, n);
  auto sol = interior_point(h, problem.linear, aeq, eq.rhs, ain, problem.ineq_rhs, settings);
  if (sol.status != SolveStatus::optimal) {
    const double v = feasibility_violation(problem, settings);
    if (v > settings.infeasibility_tolerance) sol.status = SolveStatus::infeasible;
  }
  if (sol.status == SolveStatus::optimal && eq.matrix.rows() != problem.eq_matrix.rows()) {
    sol.eq_dual.resize(0);  // multipliers refer to the reduced system
  }
  return sol;
}

}  // namespace ztube
