#pragma once

/**
 * @file reach.hpp
 * @brief Offline phase: trajectory data, persistent excitation, and the
 * matrix zonotope of all models consistent with the data.
 */

#include "ztube/serialize.hpp"
#include "ztube/setalg.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <iosfwd>
#include <random>
#include <stdexcept>
#include <vector>

namespace ztube {

/// [X-; U-] does not have full row rank.
class NotPersistentlyExciting : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular values below this fraction of the largest count as zero for the rank test.
inline constexpr double kRankTolerance = 1e-8;
/// Relative singular-value cutoff of the pseudo-inverse.
inline constexpr double kPinvCutoff = 1e-10;

struct RankCertificate {
  Index rank = 0;
  Index required = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  bool full_row_rank() const { return rank == required; }
};

RankCertificate rank_certificate(const Eigen::MatrixXd& stacked);

struct DataSet {
  Eigen::MatrixXd X_minus;  ///< n x T
  Eigen::MatrixXd X_plus;   ///< n x T
  Eigen::MatrixXd U_minus;  ///< m x T
  RankCertificate rank;

  Index state_dim() const { return X_minus.rows(); }
  Index input_dim() const { return U_minus.rows(); }
  Index samples() const { return X_minus.cols(); }
  Eigen::MatrixXd stacked() const;
};

/// Checks shapes and evaluates the rank certificate; does not throw on rank deficiency.
DataSet make_dataset(Eigen::MatrixXd x_minus, Eigen::MatrixXd x_plus, Eigen::MatrixXd u_minus);

/// x+ = A0 x + B0 u + w with w in `noise`.
struct PlantModel {
  Eigen::MatrixXd A0;
  Eigen::MatrixXd B0;
  Zonotoped noise;

  PlantModel(Eigen::MatrixXd a, Eigen::MatrixXd b, Zonotoped w);
  Index state_dim() const { return A0.rows(); }
  Index input_dim() const { return B0.cols(); }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& w) const;
};

struct InputLaw {
  enum class Kind { gaussian, uniform, zero };
  Kind kind = Kind::gaussian;
  /// Standard deviation (gaussian) or half-width (uniform).
  double scale = 1.0;
};

enum class NoiseLaw { uniform, vertices, none };

/**
 * Draws noise realizations. `vertices` picks uniformly among the exact
 * vertices when the zonotope is small enough to enumerate, and otherwise
 * among the 2^gamma sign-pattern points (which contain every vertex).
 */
class NoiseSampler {
 public:
  NoiseSampler(const Zonotoped& z, NoiseLaw law);
  Eigen::VectorXd operator()(std::mt19937_64& rng) const;

 private:
  Zonotoped z_;
  NoiseLaw law_;
  std::vector<Eigen::VectorXd> vertices_;
};

/// Simulates T steps from x0. Throws NotPersistentlyExciting when the data fail the rank test.
DataSet collect_trajectory(const PlantModel& plant, Index T, const Eigen::VectorXd& x0, const InputLaw& input_law,
                           NoiseLaw noise_law, std::mt19937_64& rng);

/// Moore-Penrose pseudo-inverse by SVD with relative cutoff kPinvCutoff.
Eigen::MatrixXd right_pseudo_inverse(const Eigen::MatrixXd& p);

/**
 * M_D = (X+ - M_w) [X-; U-]^+ where M_w repeats the noise zonotope with an
 * independent factor per column, giving gamma_w * T generators. With
 * `reduce` the result is box-reduced to order one.
 */
MatrixZonotoped build_consistent_set(const DataSet& data, const Zonotoped& noise, bool reduce = true);

using BigInt = boost::multiprecision::cpp_int;

BigInt binomial(long long a, long long b);

/// 2 (sum_{i<n(n+m)} C(T g - 1, i) + sum_{i<nN} C(N g - 1, i)).
BigInt minmax_vertex_bound(long long n, long long m, long long T, long long gamma_w, long long N);

/// Header `x1..xn,u1..um,xnext1..xnextn`, then one row per sample.
void write_dataset_csv(std::ostream& out, const DataSet& d);
/// Dimensions are taken from the header.
DataSet read_dataset_csv(std::istream& in);

void to_json(Json& j, const DataSet& d);
void from_json(const Json& j, DataSet& d);

}  // namespace ztube
