#pragma once

/**
 * @file gains.hpp
 * @brief Randomized verification and synthesis of a feedback gain that
 * stabilizes the models of a matrix zonotope.
 *
 * Models are drawn uniformly on the generator-factor cube [-1, 1]^gamma,
 * which is not uniform in matrix volume.
 */

#include "ztube/serialize.hpp"
#include "ztube/setalg.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

namespace ztube {

struct ProbSpec {
  double epsilon = 0.01;  ///< accuracy
  double delta = 1e-5;    ///< confidence

  ProbSpec() = default;
  /// Throws std::invalid_argument unless both lie in (0, 1).
  ProbSpec(double eps, double del);
  void validate() const;
};

/// ceil(ln(1/delta) / ln(1/(1-epsilon))).
std::int64_t verification_sample_size(const ProbSpec& spec);

/// 2 n m log2(2 e n^2 (n+1)).
double synthesis_vc_dimension(Index n, Index m);

/// ceil(5/epsilon (ln(4/delta) + d ln(40/epsilon))).
std::int64_t synthesis_sample_size(const ProbSpec& spec, Index n, Index m);

double spectral_radius(const Eigen::MatrixXd& m);

struct ModelSample {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

/// Splits C + sum b_i G_i into [A B]; the state dimension is the row count.
ModelSample split_model(const Eigen::MatrixXd& ab);
ModelSample sample_model(const MatrixZonotoped& m, std::mt19937_64& rng);

struct GainCertificate {
  Eigen::MatrixXd K;
  std::int64_t num_samples = 0;  ///< verification batch size
  ProbSpec spec;
  double max_spectral_radius = 0.0;
  std::optional<Eigen::MatrixXd> lyapunov_P;
  std::uint64_t batch_seed = 0;
  /// Synthesis only: models drawn, and how many were enforced in the LMI.
  std::int64_t synthesis_samples = 0;
  std::int64_t synthesis_enforced = 0;
  std::uint64_t synthesis_seed = 0;
};

struct GainRejection {
  std::int64_t sample_index = 0;
  ModelSample model;
  double spectral_radius = 0.0;
};

struct VerificationResult {
  std::optional<GainCertificate> certificate;
  std::optional<GainRejection> rejection;
  explicit operator bool() const { return certificate.has_value(); }
};

/// Draws the batch from mt19937_64(batch_seed).
VerificationResult verify_gain_with_seed(const Eigen::MatrixXd& K, const MatrixZonotoped& m, const ProbSpec& spec,
                                         std::uint64_t batch_seed);
/// Takes the batch seed from `rng`.
VerificationResult verify_gain(const Eigen::MatrixXd& K, const MatrixZonotoped& m, const ProbSpec& spec,
                               std::mt19937_64& rng);

/// No (X, Z) satisfies the sampled LMIs.
class SynthesisInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthesisSettings {
  /// Largest number of models enforced in one LMI solve.
  std::int64_t sample_cap = 256;
  /// Violators of the Lyapunov test among the drawn models are added and the LMI re-solved.
  int refinement_rounds = 8;
  /// Bound on |Z_ij|.
  double gain_bound = 1e2;
};

/**
 * Common-Lyapunov synthesis: X > 0, Z with [X, AX+BZ; (AX+BZ)', X] > 0 on the
 * enforced models; K = Z X^-1, P = X^-1. The gain is then verified on a fresh
 * batch. Throws SynthesisInfeasible when the LMIs or the verification fail.
 */
GainCertificate synthesize_gain(const MatrixZonotoped& m, const ProbSpec& spec, std::mt19937_64& rng,
                                const SynthesisSettings& settings = {});

/// Largest eigenvalue of (A+BK)' P (A+BK) - P.
double lyapunov_decrease(const ModelSample& model, const Eigen::MatrixXd& K, const Eigen::MatrixXd& P);

/// Fraction of `count` fresh models (drawn from `seed`) with spectral radius >= 1.
double empirical_violation_rate(const Eigen::MatrixXd& K, const MatrixZonotoped& m, std::int64_t count,
                                std::uint64_t seed);

void to_json(Json& j, const GainCertificate& c);
void from_json(const Json& j, GainCertificate& c);

}  // namespace ztube
