#pragma once

/**
 * @file ocp.hpp
 * @brief Tube-tightened receding-horizon control.
 *
 * P_N(e_t, xb_t):  min  sum_{k=1}^N  xb_k' Q xb_k + q' xb_k + c_u |ub_k|_1 + r' ub_k
 *                  s.t. xb_{k+1} = Ab xb_k + Bb ub_k,            xb_1 = xb_t
 *                       Z_{k+1} = M_DK Z_k + M_delta [xb_k; ub_k] + Z_w,   Z_1 = {e_t}
 *                       hull(Z_k) + xb_k  in hull(Z_x)
 *                       hull(K Z_k) + ub_k in hull(Z_u),          k = 1..N
 *
 * Every Z_k is box-reduced, which makes the inclusions linear. In coupled
 * mode the tube depends on the decisions through M_delta [xb_k; ub_k] and is
 * carried by epigraph variables; in worst_case mode [xb_k; ub_k] is replaced
 * by Z_x x Z_u and the tube is a constant.
 */

#include "ztube/gains.hpp"
#include "ztube/qp.hpp"
#include "ztube/reach.hpp"
#include "ztube/serialize.hpp"
#include "ztube/tube.hpp"

#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ztube {

enum class Tightening { coupled, worst_case };

std::string_view to_string(Tightening t);
Tightening tightening_from_string(std::string_view s);

struct StageCost {
  Eigen::MatrixXd Q;             ///< n x n, positive semidefinite
  double input_abs_weight = 0;   ///< c_u
  Eigen::VectorXd state_linear;  ///< empty or n
  Eigen::VectorXd input_linear;  ///< empty or m

  double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

struct OcpSpec {
  Index horizon = 2;
  Zonotoped state_set;
  Zonotoped input_set;
  StageCost cost;
  Tightening tightening = Tightening::coupled;
  QpSettings solver{};

  /// Throws std::invalid_argument or DimensionError.
  void validate(Index n, Index m) const;
};

enum class OcpStatus { optimal, infeasible, solver_failure };

std::string_view to_string(OcpStatus s);

struct OcpSolution {
  OcpStatus status = OcpStatus::solver_failure;
  /// First step k in 1..N whose constraints, together with all earlier ones, are infeasible.
  std::optional<Index> infeasible_step;
  std::vector<Eigen::VectorXd> nominal_inputs;  ///< ub_1..ub_N
  std::vector<Eigen::VectorXd> nominal_states;  ///< xb_1..xb_{N+1}
  std::vector<IntervalBoxd> error_bounds;       ///< hull(Z_k), k = 1..N+1
  double objective = 0.0;
  int iterations = 0;

  bool ok() const { return status == OcpStatus::optimal; }
  /// max_k |xb_{k+1} - Ab xb_k - Bb ub_k|_inf
  double dynamics_residual(const NominalModel& nominal) const;
};

OcpSolution solve_ocp(const Eigen::VectorXd& e_t, const Eigen::VectorXd& x_bar_t, const NominalModel& nominal,
                      const TubeOperators& ops, const OcpSpec& spec);

/// Inequality rows of the worst_case program per step, independent of N.
Index constraints_per_step(Index n, Index m, bool abs_input_cost);

struct TrajectoryStep {
  Index t = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd x_bar;
  Eigen::VectorXd e;  ///< x - x_bar
  Eigen::VectorXd u;
  Eigen::VectorXd u_bar;
  /// Predicted tube x_bar + hull(Z_{2|t-1}) around x; the point {x_0} at t = 0.
  IntervalBoxd tube;
  double cost = 0.0;       ///< stage cost at (x, u)
  double objective = 0.0;  ///< optimal value of P_N at t
};

enum class RunStatus { ok, infeasible, solver_failure, input_out_of_bounds };

std::string_view to_string(RunStatus s);

struct TubeTrajectory {
  RunStatus status = RunStatus::ok;
  std::optional<Index> failed_step;
  std::optional<Index> infeasible_horizon_step;
  std::string message;
  std::vector<TrajectoryStep> steps;  ///< t = 0..M-1 when complete
  /// State after the last applied input; tube holds the prediction around it.
  std::optional<TrajectoryStep> terminal;

  bool complete() const { return status == RunStatus::ok; }
  /// Realized states x_0..x_M.
  std::vector<Eigen::VectorXd> states() const;
};

/**
 * Closed loop: x_bar_0 = x_0, e_0 = 0; each step solves P_N, applies
 * u = K e + ub_1 to the plant and moves x_bar to xb_2.
 */
TubeTrajectory run_receding_horizon(const PlantModel& plant, const NominalModel& nominal, const TubeOperators& ops,
                                    const GainCertificate& cert, const OcpSpec& spec, Index steps,
                                    const Eigen::VectorXd& x0, NoiseLaw noise_law, std::mt19937_64& rng);

struct FeasibilityReport {
  bool passed = false;
  bool all_steps_solved = false;
  std::optional<Index> first_violation;
  /// Smallest distance to the hull bounds over all steps; negative outside.
  double state_margin = 0.0;
  double input_margin = 0.0;
  Index state_violations = 0;
  Index input_violations = 0;
};

/// A-posteriori check of the realized states and inputs, by interval bounds and exact membership.
FeasibilityReport check_recursive_feasibility(const TubeTrajectory& traj, const Zonotoped& state_set,
                                              const Zonotoped& input_set);

/// Header t,x1..xn,xbar1..xbarn,u (u1..um when m > 1),tube_lo1,tube_hi1,...,cost. The terminal row has empty u and cost.
void write_trajectory_csv(std::ostream& out, const TubeTrajectory& traj);

void to_json(Json& j, const OcpSolution& s);
void to_json(Json& j, const TubeTrajectory& t);
void to_json(Json& j, const FeasibilityReport& r);

}  // namespace ztube
