#pragma once

/**
 * @file qp.hpp
 * @brief Dense convex quadratic programming by a primal-dual interior-point method.
 *
 * Solves
 *   min  1/2 x' H x + f' x
 *   s.t. A_eq x  = b_eq
 *        A_in x <= b_in
 * with H positive semidefinite. An empty H means a linear program.
 */

#include <Eigen/Dense>

#include <string_view>

namespace ztube {

struct QuadraticProgram {
  Eigen::MatrixXd hessian;  ///< n x n, or empty for an LP
  Eigen::VectorXd linear;   ///< n
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_rhs;

  Eigen::Index num_variables() const { return linear.size(); }
  double objective(const Eigen::VectorXd& x) const;
};

enum class SolveStatus { optimal, infeasible, max_iterations, numerical_error };

std::string_view to_string(SolveStatus s);

struct QpSettings {
  double tolerance = 1e-9;
  int max_iterations = 150;
  /// Phase-one slack above which the program is declared infeasible.
  double infeasibility_tolerance = 1e-7;
};

struct QpSolution {
  SolveStatus status = SolveStatus::numerical_error;
  Eigen::VectorXd x;
  Eigen::VectorXd eq_dual;
  Eigen::VectorXd ineq_dual;
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
};

/// Throws DimensionError on inconsistent shapes.
QpSolution solve_qp(const QuadraticProgram& problem, const QpSettings& settings = {});

/**
 * Phase-one check: smallest uniform violation t >= 0 such that
 * A_in x <= b_in + t, A_eq x = b_eq is feasible. Returns a negative value
 * when the equalities alone are inconsistent or the solve fails.
 */
double feasibility_violation(const QuadraticProgram& problem, const QpSettings& settings = {});

}  // namespace ztube
