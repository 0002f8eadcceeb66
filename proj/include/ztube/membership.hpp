#pragma once

/**
 * @file membership.hpp
 * @brief LP-decided membership tests and vertex enumeration for small zonotopes.
 */

#include "ztube/setalg.hpp"

#include <stdexcept>
#include <vector>

namespace ztube {

/// The membership LP did not terminate; distinct from a negative answer.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Residual tolerance applied to c + G b = p after clipping b to the unit cube.
inline constexpr double kMembershipTolerance = 1e-8;

struct MembershipResult {
  bool contained = false;
  /// Optimal ||b||_inf of the representing factors (infinity if p is off the affine hull).
  double factor_norm = 0.0;
  /// ||c + G clip(b) - p||_inf.
  double residual = 0.0;
};

/// Solves min ||b||_inf s.t. c + G b = p. Throws SolverError on non-convergence.
MembershipResult point_membership(const Zonotoped& z, const Eigen::VectorXd& p);

bool contains_point(const Zonotoped& z, const Eigen::VectorXd& p);

MembershipResult matrix_membership(const MatrixZonotoped& m, const Eigen::MatrixXd& x);

bool mz_contains(const MatrixZonotoped& m, const Eigen::MatrixXd& x);

/// Limits guarding the 2^gamma enumeration.
inline constexpr Index kMaxVertexDimension = 3;
inline constexpr Index kMaxVertexGenerators = 12;

/**
 * Exact vertex set of a zonotope with dim <= 3 and at most 12 generators.
 *
 * Enumerates the 2^gamma sign-pattern points and keeps the extreme ones. In
 * two dimensions the vertices are returned counter-clockwise starting from
 * the leftmost (then lowest) one. Throws std::invalid_argument beyond the limits.
 */
std::vector<Eigen::VectorXd> zonotope_vertices(const Zonotoped& z);

}  // namespace ztube
