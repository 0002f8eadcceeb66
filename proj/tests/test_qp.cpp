#include "ztube/qp.hpp"
#include "ztube/setalg.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ztube;
using namespace ztube::testing;

TEST(SolveQp, BoxedLp) {
  // min -x - 2y  s.t.  x + y <= 1, x, y >= 0  ->  (0, 1), objective -2
  QuadraticProgram lp;
  lp.linear = (VectorXd(2) << -1, -2).finished();
  lp.ineq_matrix = (MatrixXd(3, 2) << 1, 1, -1, 0, 0, -1).finished();
  lp.ineq_rhs = (VectorXd(3) << 1, 0, 0).finished();
  auto sol = solve_qp(lp);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  EXPECT_NEAR(sol.objective, -2.0, 1e-8);
  EXPECT_NEAR(sol.x(1), 1.0, 1e-7);
}

TEST(SolveQp, EqualityConstrainedMatchesKkt) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 6, p = 2;
    MatrixXd r = random_matrix(n, n, rng);
    QuadraticProgram qp;
    qp.hessian = r.transpose() * r + 0.1 * MatrixXd::Identity(n, n);
    qp.linear = random_vector(n, rng);
    qp.eq_matrix = random_matrix(p, n, rng);
    qp.eq_rhs = random_vector(p, rng);
    MatrixXd kkt = MatrixXd::Zero(n + p, n + p);
    kkt << qp.hessian, qp.eq_matrix.transpose(), qp.eq_matrix, MatrixXd::Zero(p, p);
    VectorXd rhs(n + p);
    rhs << -qp.linear, qp.eq_rhs;
    VectorXd ref = kkt.fullPivLu().solve(rhs).head(n);
    auto sol = solve_qp(qp);
    ASSERT_EQ(sol.status, SolveStatus::optimal);
    EXPECT_LT((sol.x - ref).lpNorm<Eigen::Infinity>(), 1e-7);
    EXPECT_NEAR(sol.objective, qp.objective(ref), 1e-8 * (1 + std::abs(qp.objective(ref))));
  }
}

TEST(SolveQp, ActiveBoundProjection) {
  // min ||x - a||^2 over the box [-1, 1]^n is the clip of a.
  std::mt19937_64 rng(2);
  const Index n = 5;
  VectorXd a = random_vector(n, rng, 3.0);
  QuadraticProgram qp;
  qp.hessian = 2.0 * MatrixXd::Identity(n, n);
  qp.linear = -2.0 * a;
  qp.ineq_matrix = MatrixXd(2 * n, n);
  qp.ineq_matrix << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
  qp.ineq_rhs = VectorXd::Ones(2 * n);
  auto sol = solve_qp(qp);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  EXPECT_LT((sol.x - a.cwiseMax(-1.0).cwiseMin(1.0)).lpNorm<Eigen::Infinity>(), 1e-7);
}

TEST(SolveQp, RedundantEqualities) {
  QuadraticProgram qp;
  qp.hessian = MatrixXd::Identity(2, 2);
  qp.linear = VectorXd::Zero(2);
  qp.eq_matrix = (MatrixXd(2, 2) << 1, 1, 2, 2).finished();
  qp.eq_rhs = (VectorXd(2) << 1, 2).finished();
  auto sol = solve_qp(qp);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  EXPECT_NEAR(sol.x(0), 0.5, 1e-8);

  qp.eq_rhs(1) = 3.0;
  EXPECT_EQ(solve_qp(qp).status, SolveStatus::infeasible);
}

TEST(SolveQp, DetectsInfeasibleInequalities) {
  QuadraticProgram lp;
  lp.linear = VectorXd::Ones(1);
  lp.ineq_matrix = (MatrixXd(2, 1) << 1, -1).finished();
  lp.ineq_rhs = (VectorXd(2) << -1, -1).finished();  // x <= -1 and x >= 1
  EXPECT_EQ(solve_qp(lp).status, SolveStatus::infeasible);
  EXPECT_NEAR(feasibility_violation(lp), 1.0, 1e-6);
}

TEST(SolveQp, ShapeErrors) {
  QuadraticProgram qp;
  qp.linear = VectorXd::Zero(2);
  qp.hessian = MatrixXd::Identity(3, 3);
  EXPECT_THROW(solve_qp(qp), DimensionError);
}
