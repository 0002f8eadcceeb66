#pragma once

/**
 * @file lmi.hpp
 * @brief Margin maximization over affine symmetric matrix inequalities.
 *
 *   max  t
 *   s.t. F_i(y) = F_i0 + sum_a y_a F_ia  >=  t I   for every block i
 *        A y <= b
 *
 * solved by a log-det barrier method with damped Newton steps from a strictly
 * feasible y0 (t0 is chosen below the smallest block eigenvalue).
 */

#include <Eigen/Dense>

#include <vector>

namespace ztube {

struct LmiBlock {
  Eigen::MatrixXd constant;
  std::vector<Eigen::MatrixXd> coefficients;  ///< one per variable, symmetric
};

struct LmiProblem {
  Eigen::Index num_variables = 0;
  std::vector<LmiBlock> blocks;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_rhs;
};

struct LmiSettings {
  /// Stop when (barrier degree) / weight falls below this.
  double gap_tolerance = 1e-7;
  int max_newton_steps = 2000;
  /// Upper bound on t; keeps the program bounded when the LMIs allow arbitrary margin.
  double margin_cap = 1.0;
};

struct LmiResult {
  bool converged = false;
  Eigen::VectorXd y;
  double margin = 0.0;  ///< min over blocks of lambda_min(F_i(y))
  int newton_steps = 0;
};

Eigen::MatrixXd evaluate_block(const LmiBlock& block, const Eigen::VectorXd& y);

/// Requires A y0 < b strictly. Throws std::invalid_argument otherwise or on shape errors.
LmiResult maximize_lmi_margin(const LmiProblem& problem, const Eigen::VectorXd& y0, const LmiSettings& settings = {});

}  // namespace ztube
