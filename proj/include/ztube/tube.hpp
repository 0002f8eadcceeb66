#pragma once

/**
 * @file tube.hpp
 * @brief Error tubes around a nominal trajectory.
 *
 * With nominal dynamics xb+ = Ab xb + Bb ub and input u = K e + ub, the
 * tracking error e = x - xb of the true plant evolves as
 *
 *   e+ = (A0 + B0 K) e + dA0 xb + dB0 ub + w,   dA0 = A0 - Ab, dB0 = B0 - Bb.
 *
 * Since [A0 B0] lies in M_D, the set recursion
 *
 *   Z+ = M_DK Z + M_delta [xb; ub] + Z_w,   M_DK = M_D [I; K],  M_delta = M_D - [Ab Bb]
 *
 * contains every reachable error. The pair (xb_k, ub_k) drives the step from
 * k to k + 1.
 */

#include "ztube/reach.hpp"
#include "ztube/setalg.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ztube {

struct NominalModel {
  Eigen::MatrixXd A_bar;
  Eigen::MatrixXd B_bar;
  /// Whether [A_bar B_bar] was checked to lie in M_D.
  bool must_be_member = false;

  /// Center of M_D; always a member.
  static NominalModel center_of(const MatrixZonotoped& md);
  /// Checks membership and throws std::invalid_argument when `require_member` fails.
  static NominalModel checked(Eigen::MatrixXd a, Eigen::MatrixXd b, const MatrixZonotoped& md,
                              bool require_member = true);

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const { return A_bar * x + B_bar * u; }
};

struct TubeOperators {
  MatrixZonotoped m_dk;     ///< n x n
  MatrixZonotoped m_delta;  ///< n x (n + m)
  Zonotoped noise;
  Eigen::MatrixXd K;

  static TubeOperators make(const MatrixZonotoped& md, const NominalModel& nominal, const Eigen::MatrixXd& K,
                            const Zonotoped& noise);
  /// Recomputes both operators from md and compares exactly.
  bool consistent_with(const MatrixZonotoped& md, const NominalModel& nominal) const;

  Index state_dim() const { return m_dk.rows(); }
  Index input_dim() const { return K.rows(); }
};

/// girard keeps the cap - n largest generators and boxes the rest; box is order 1.
enum class Reduction { girard, box };

struct TubeConfig {
  /// Generator count above which the tube is reduced; 0 means 4n.
  Index order_cap = 0;
  Reduction method = Reduction::girard;
  /// Reduce after every step regardless of the cap.
  bool reduce_every_step = false;
  /// Divergence is declared when the hull radius exceeds this multiple of the state-set radius.
  double divergence_factor = 1e3;
  /**
   * Worst-case sequences only: pad each step with axis generators so its
   * interval radii are at least the previous step's. Padding only enlarges
   * the set; it keeps Girard's ranking switches from making the radii
   * oscillate.
   */
  bool monotone_hull = true;

  Index cap_for(Index n) const { return order_cap > 0 ? order_cap : 4 * n; }
  static TubeConfig unreduced() {
    return TubeConfig{std::numeric_limits<Index>::max() / 4, Reduction::box, false, 1e3, false};
  }
  static TubeConfig boxed() { return TubeConfig{0, Reduction::box, true, 1e3, false}; }
  static TubeConfig girard(Index cap = 0) { return TubeConfig{cap, Reduction::girard, false, 1e3, true}; }
};

Zonotoped reduce_tube(const Zonotoped& z, const TubeConfig& config);

class TubeDivergent : public std::runtime_error {
 public:
  TubeDivergent(Index step, double radius, const std::string& what)
      : std::runtime_error(what), step_(step), radius_(radius) {}
  Index step() const { return step_; }
  double radius() const { return radius_; }

 private:
  Index step_;
  double radius_;
};

using NominalPair = std::pair<Eigen::VectorXd, Eigen::VectorXd>;

/// Exact error set of the true plant after t steps; needs (A0, B0), so only usable as an oracle.
Zonotoped exact_error_zonotope(const PlantModel& plant, const NominalModel& nominal, const Eigen::MatrixXd& K,
                               const Eigen::VectorXd& e0, const std::vector<NominalPair>& nominal_traj, Index t);

/// One step of the recursion followed by reduction per `config`.
Zonotoped propagate_error_tube(const TubeOperators& ops, const Zonotoped& z_prev, const Eigen::VectorXd& x_bar,
                               const Eigen::VectorXd& u_bar, const TubeConfig& config = {});

/// Propagates through all pairs from `initial`; returns steps 0..pairs.size().
std::vector<Zonotoped> propagate_along(const TubeOperators& ops, const Zonotoped& initial,
                                       const std::vector<NominalPair>& pairs, const TubeConfig& config = {});

/// M_delta (Z_x x Z_u) + Z_w: the disturbance that covers every admissible nominal pair.
Zonotoped worst_case_disturbance(const TubeOperators& ops, const Zonotoped& state_set, const Zonotoped& input_set);

/**
 * Tube under the decision-independent disturbance, from `initial` (default
 * {0}). Returns horizon + 1 zonotopes. Throws TubeDivergent when the hull
 * radius exceeds divergence_factor times the radius of the state set.
 */
std::vector<Zonotoped> worst_case_tube_sequence(const TubeOperators& ops, const Zonotoped& state_set,
                                                const Zonotoped& input_set, Index horizon,
                                                const TubeConfig& config = {},
                                                const std::optional<Zonotoped>& initial = std::nullopt);

/// sum_{k<k0} M_DK^k (M_delta p_k + Z_w) over the window, oldest pair first.
Zonotoped truncated_tube(const TubeOperators& ops, const std::vector<NominalPair>& window, Index k0,
                         const TubeConfig& config = TubeConfig::unreduced());

struct StabilityReport {
  bool diverged = false;
  Index steps = 0;
  double sup_radius = 0.0;       ///< max over steps of the hull radius (inf-norm)
  double final_increment = 0.0;  ///< inf-norm change of the hull radius at the last step
  std::vector<double> radii;
};

/// Runs worst_case_tube_sequence and summarizes the radius sequence instead of throwing.
StabilityReport assess_tube_stability(const TubeOperators& ops, const Zonotoped& state_set,
                                      const Zonotoped& input_set, Index steps, const TubeConfig& config = {});

/// One zonotope JSON object per line.
void write_tube_jsonl(std::ostream& out, const std::vector<Zonotoped>& tube);
std::vector<Zonotoped> read_tube_jsonl(std::istream& in);
/// Header `step,lower1..lowern,upper1..uppern`.
void write_tube_bounds_csv(std::ostream& out, const std::vector<Zonotoped>& tube);

}  // namespace ztube
