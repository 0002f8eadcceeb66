#include "ztube/membership.hpp"

#include "ztube/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ztube {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

/// min ||b||_inf s.t. G b = d.
MembershipResult factor_lp(const MatrixXd& g, const VectorXd& d) {
  MembershipResult r;
  const double tol = kMembershipTolerance * std::max(1.0, inf_norm(d));
  const Index k = g.cols();
  if (k == 0) {
    r.residual = inf_norm(d);
    r.factor_norm = r.residual <= tol ? 0.0 : std::numeric_limits<double>::infinity();
    r.contained = r.residual <= tol;
    return r;
  }

  QuadraticProgram lp;
  lp.linear = VectorXd::Zero(k + 1);
  lp.linear(k) = 1.0;
  lp.eq_matrix = MatrixXd::Zero(g.rows(), k + 1);
  lp.eq_matrix.leftCols(k) = g;
  lp.eq_rhs = d;
  lp.ineq_matrix = MatrixXd::Zero(2 * k, k + 1);
  lp.ineq_matrix.topLeftCorner(k, k).setIdentity();
  lp.ineq_matrix.bottomLeftCorner(k, k) = -MatrixXd::Identity(k, k);
  lp.ineq_matrix.col(k).setConstant(-1.0);
  lp.ineq_rhs = VectorXd::Zero(2 * k);

  const auto sol = solve_qp(lp);
  if (sol.status == SolveStatus::infeasible) {
    // p is off the affine hull of the zonotope.
    const VectorXd beta = g.completeOrthogonalDecomposition().solve(d);
    r.residual = inf_norm(g * beta.cwiseMax(-1.0).cwiseMin(1.0) - d);
    r.factor_norm = std::numeric_limits<double>::infinity();
    r.contained = false;
    return r;
  }
  if (sol.status != SolveStatus::optimal)
    throw SolverError(std::string("membership LP failed: ") + std::string(to_string(sol.status)));

  const VectorXd beta = sol.x.head(k).cwiseMax(-1.0).cwiseMin(1.0);
  r.factor_norm = sol.x.head(k).lpNorm<Eigen::Infinity>();
  r.residual = inf_norm(g * beta - d);
  r.contained = r.residual <= kMembershipTolerance * std::max({1.0, inf_norm(d), g.cwiseAbs().maxCoeff()});
  return r;
}

std::vector<VectorXd> sign_pattern_points(const Zonotoped& z) {
  const Index k = z.num_generators();
  const std::size_t count = std::size_t{1} << k;
  std::vector<VectorXd> pts;
  pts.reserve(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    VectorXd p = z.center();
    for (Index j = 0; j < k; ++j) {
      if (mask & (std::size_t{1} << j))
        p += z.generators().col(j);
      else
        p -= z.generators().col(j);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

double cross(const VectorXd& o, const VectorXd& a, const VectorXd& b) {
  return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
}

std::vector<VectorXd> hull_2d(std::vector<VectorXd> pts) {
  std::sort(pts.begin(), pts.end(), [](const VectorXd& a, const VectorXd& b) {
    return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1));
  });
  double scale = 1.0;
  for (const auto& p : pts) scale = std::max(scale, inf_norm(p));
  const double eps = 1e-12 * scale * scale;
  const double same = 1e-12 * scale;
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [&](const VectorXd& a, const VectorXd& b) { return inf_norm(a - b) <= same; }),
            pts.end());
  if (pts.size() <= 2) return pts;

  std::vector<VectorXd> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

/// Sign pattern s is a vertex iff some direction d has s_j g_j'd > 0 for all j.
bool pattern_is_vertex(const MatrixXd& unit_gens, const VectorXd& signs) {
  const Index n = unit_gens.rows();
  const Index k = unit_gens.cols();
  QuadraticProgram lp;
  lp.linear = VectorXd::Zero(n + 1);
  lp.linear(n) = -1.0;
  lp.ineq_matrix = MatrixXd::Zero(k + 2 * n + 1, n + 1);
  lp.ineq_rhs = VectorXd::Zero(k + 2 * n + 1);
  for (Index j = 0; j < k; ++j) {
    lp.ineq_matrix.block(j, 0, 1, n) = -signs(j) * unit_gens.col(j).transpose();
    lp.ineq_matrix(j, n) = 1.0;
  }
  for (Index i = 0; i < n; ++i) {
    lp.ineq_matrix(k + 2 * i, i) = 1.0;
    lp.ineq_matrix(k + 2 * i + 1, i) = -1.0;
    lp.ineq_rhs(k + 2 * i) = 1.0;
    lp.ineq_rhs(k + 2 * i + 1) = 1.0;
  }
  lp.ineq_matrix(k + 2 * n, n) = 1.0;
  lp.ineq_rhs(k + 2 * n) = 1.0;
  const auto sol = solve_qp(lp);
  if (sol.status != SolveStatus::optimal) throw SolverError("vertex LP failed");
  return sol.x(n) > 1e-7;
}

}  // namespace

MembershipResult point_membership(const Zonotoped& z, const Eigen::VectorXd& p) {
  detail::require(p.size() == z.dim(), "contains_point: dimension mismatch");
  return factor_lp(z.generators(), p - z.center());
}

bool contains_point(const Zonotoped& z, const Eigen::VectorXd& p) { return point_membership(z, p).contained; }

MembershipResult matrix_membership(const MatrixZonotoped& m, const Eigen::MatrixXd& x) {
  detail::require(x.rows() == m.rows() && x.cols() == m.cols(), "mz_contains: shape mismatch");
  const MatrixXd diff = x - m.center();
  return factor_lp(m.vectorized_generators(), diff.reshaped());
}

bool mz_contains(const MatrixZonotoped& m, const Eigen::MatrixXd& x) { return matrix_membership(m, x).contained; }

std::vector<Eigen::VectorXd> zonotope_vertices(const Zonotoped& z) {
  if (z.dim() > kMaxVertexDimension || z.num_generators() > kMaxVertexGenerators)
    throw std::invalid_argument("zonotope_vertices: limited to dimension <= 3 and at most 12 generators");
  if (z.is_singleton() || z.dim() == 0) return {z.center()};

  auto pts = sign_pattern_points(z);
  if (z.dim() == 1) {
    auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(),
                                        [](const VectorXd& a, const VectorXd& b) { return a(0) < b(0); });
    return {*lo, *hi};
  }
  if (z.dim() == 2) return hull_2d(std::move(pts));

  MatrixXd unit = z.generators();
  for (Index j = 0; j < unit.cols(); ++j) unit.col(j).normalize();
  std::vector<VectorXd> out;
  for (std::size_t mask = 0; mask < pts.size(); ++mask) {
    VectorXd signs(unit.cols());
    for (Index j = 0; j < unit.cols(); ++j) signs(j) = (mask & (std::size_t{1} << j)) ? 1.0 : -1.0;
    if (pattern_is_vertex(unit, signs)) out.push_back(pts[mask]);
  }
  return out;
}

}  // namespace ztube
