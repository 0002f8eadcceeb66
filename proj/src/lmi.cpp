#include "ztube/lmi.hpp"

#include "ztube/setalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ztube {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double min_eigenvalue(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

struct Barrier {
  const LmiProblem& p;
  MatrixXd a;  // linear rows over z = [y; t]
  VectorXd b;

  Barrier(const LmiProblem& problem, double cap) : p(problem) {
    const Index q = p.num_variables;
    const Index r = p.ineq_matrix.rows();
    a = MatrixXd::Zero(r + 1, q + 1);
    b = VectorXd::Zero(r + 1);
    if (r > 0) {
      a.topLeftCorner(r, q) = p.ineq_matrix;
      b.head(r) = p.ineq_rhs;
    }
    a(r, q) = 1.0;
    b(r) = cap;
  }

  double degree() const {
    double nu = static_cast<double>(a.rows());
    for (const auto& blk : p.blocks) nu += static_cast<double>(blk.constant.rows());
    return nu;
  }

  /// Barrier value at z, or +inf outside the domain.
  double value(const VectorXd& z) const {
    const Index q = p.num_variables;
    const VectorXd slack = b - a * z;
    if ((slack.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    double v = -slack.array().log().sum();
    for (const auto& blk : p.blocks) {
      MatrixXd s = evaluate_block(blk, z.head(q));
      s.diagonal().array() -= z(q);
      Eigen::LLT<MatrixXd> llt(s);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      v -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
    return v;
  }

  void derivatives(const VectorXd& z, VectorXd& g, MatrixXd& h) const {
    const Index q = p.num_variables;
    g = VectorXd::Zero(q + 1);
    h = MatrixXd::Zero(q + 1, q + 1);
    const VectorXd slack = b - a * z;
    for (Index j = 0; j < a.rows(); ++j) {
      g += a.row(j).transpose() / slack(j);
      h += a.row(j).transpose() * a.row(j) / (slack(j) * slack(j));
    }
    std::vector<MatrixXd> m(static_cast<std::size_t>(q + 1));
    for (const auto& blk : p.blocks) {
      MatrixXd s = evaluate_block(blk, z.head(q));
      s.diagonal().array() -= z(q);
      const MatrixXd sinv = Eigen::LLT<MatrixXd>(s).solve(MatrixXd::Identity(s.rows(), s.cols()));
      for (Index i = 0; i < q; ++i) m[static_cast<std::size_t>(i)] = sinv * blk.coefficients[static_cast<std::size_t>(i)];
      m[static_cast<std::size_t>(q)] = -sinv;
      for (Index i = 0; i <= q; ++i) {
        const auto& mi = m[static_cast<std::size_t>(i)];
        g(i) -= mi.trace();
        for (Index k = 0; k <= i; ++k) {
          // tr(M_i M_k) without forming the product.
          const double v = mi.cwiseProduct(m[static_cast<std::size_t>(k)].transpose()).sum();
          h(i, k) += v;
          if (k != i) h(k, i) += v;
        }
      }
    }
  }
};

}  // namespace

MatrixXd evaluate_block(const LmiBlock& block, const VectorXd& y) {
  MatrixXd f = block.constant;
  for (std::size_t a = 0; a < block.coefficients.size(); ++a) f += y(static_cast<Index>(a)) * block.coefficients[a];
  return f;
}

LmiResult maximize_lmi_margin(const LmiProblem& problem, const VectorXd& y0, const LmiSettings& settings) {
  const Index q = problem.num_variables;
  detail::require(y0.size() == q, "maximize_lmi_margin: y0 size must equal num_variables");
  detail::require(problem.ineq_matrix.rows() == problem.ineq_rhs.size(), "maximize_lmi_margin: inequality shape");
  for (const auto& blk : problem.blocks) {
    detail::require(blk.constant.rows() == blk.constant.cols(), "maximize_lmi_margin: blocks must be square");
    detail::require(static_cast<Index>(blk.coefficients.size()) == q,
                    "maximize_lmi_margin: one coefficient matrix per variable");
  }
  if (problem.ineq_matrix.rows() > 0 && ((problem.ineq_rhs - problem.ineq_matrix * y0).array() <= 0.0).any())
    throw std::invalid_argument("maximize_lmi_margin: y0 must satisfy the linear inequalities strictly");

  LmiResult res;
  double t0 = settings.margin_cap;
  for (const auto& blk : problem.blocks) t0 = std::min(t0, min_eigenvalue(evaluate_block(blk, y0)));
  VectorXd z(q + 1);
  z << y0, t0 - 1.0;

  Barrier bar(problem, settings.margin_cap);
  const double nu = bar.degree();
  double w = 1.0;
  VectorXd g;
  MatrixXd h;
  auto objective = [&](const VectorXd& v) { return -w * v(q) + bar.value(v); };

  while (res.newton_steps < settings.max_newton_steps) {
    // Center for the current weight.
    for (int inner = 0; inner < 100 && res.newton_steps < settings.max_newton_steps; ++inner) {
      bar.derivatives(z, g, h);
      g(q) -= w;
      h.diagonal().array() += 1e-14 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
      const VectorXd dz = -h.ldlt().solve(g);
      const double decrement = -g.dot(dz);
      ++res.newton_steps;
      if (!(decrement > 1e-10)) break;
      const double f0 = objective(z);
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        const VectorXd trial = z + step * dz;
        const double f1 = objective(trial);
        if (std::isfinite(f1) && f1 <= f0 - 0.25 * step * decrement) {
          z = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (nu / w < settings.gap_tolerance) {
      res.converged = true;
      break;
    }
    w *= 10.0;
  }

  res.y = z.head(q);
  res.margin = std::numeric_limits<double>::infinity();
  for (const auto& blk : problem.blocks) res.margin = std::min(res.margin, min_eigenvalue(evaluate_block(blk, res.y)));
  return res;
}

}  // namespace ztube
