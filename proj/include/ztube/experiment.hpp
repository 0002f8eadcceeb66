#pragma once

/**
 * @file experiment.hpp
 * @brief Config-driven pipeline: collect data, build M_D, certify a gain,
 * analyse the tube and run the closed loop.
 *
 * Seeds: every phase draws from make_rng(master_seed, stream); replicate r of
 * the closed loop uses make_rng(master_seed, Stream::closed_loop, r). Data,
 * M_D and the gain are therefore shared by all replicates.
 */

#include "ztube/gains.hpp"
#include "ztube/ocp.hpp"
#include "ztube/reach.hpp"
#include "ztube/serialize.hpp"
#include "ztube/tube.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ztube {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kSummarySchemaVersion = 1;
inline constexpr int kPlotDataSchemaVersion = 1;

/// Names the offending field with a dotted path, e.g. "plant.B".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class GainMode { verify, synthesize };

struct ExperimentConfig {
  std::string name = "double_integrator";
  std::uint64_t master_seed = 0;
  Index replicates = 1;
  std::string output_dir = "out";

  struct Plant {
    Eigen::MatrixXd A, B;
    Eigen::VectorXd x0;
    Zonotoped noise;
  } plant;

  struct Data {
    Index T = 100;
    InputLaw input{};
    NoiseLaw noise_law = NoiseLaw::uniform;
    /// Overrides the derived data seed.
    std::optional<std::uint64_t> seed;
  } data;

  struct Gain {
    GainMode mode = GainMode::verify;
    Eigen::MatrixXd K;
    double epsilon = 1e-2;
    double delta = 1e-5;
  } gain;

  struct Tube {
    Index order_cap = 0;  ///< 0 means 4n
    Index stability_steps = 500;
    /// Window of the truncated tube reported against the full one; 0 disables it.
    Index k0 = 0;
  } tube;

  struct Ocp {
    Index N = 2;
    Index M = 12;
    Zonotoped state_set;
    Zonotoped input_set;
    Eigen::MatrixXd Q;
    double input_abs_weight = 1e-2;
    Tightening tightening = Tightening::coupled;
    NoiseLaw noise_law = NoiseLaw::vertices;
    /// Scales the generators of Z_x seen by the controller; violations are still counted against Z_x.
    double enlarge_zx_percent = 0.0;
  } ocp;

  /// Double integrator with the reference parameters.
  static ExperimentConfig double_integrator();

  /// Throws ConfigError before any compute.
  void validate() const;

  Index state_dim() const { return plant.A.rows(); }
  Index input_dim() const { return plant.B.cols(); }
  ProbSpec prob_spec() const { return ProbSpec(gain.epsilon, gain.delta); }
  OcpSpec ocp_spec() const;
};

void to_json(Json& j, const ExperimentConfig& c);
/// Missing fields keep their double_integrator values; the result is validated.
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const std::string& path);

enum class ExitCode : int {
  ok = 0,
  usage = 1,
  config = 2,
  data = 3,
  model_set = 4,
  gain = 5,
  tube = 6,
  closed_loop = 7,
  io = 8,
};

std::string_view phase_name(ExitCode c);

class PhaseError : public std::runtime_error {
 public:
  PhaseError(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

// Phases, usable on their own. Each throws PhaseError with its own code.
DataSet collect_phase(const ExperimentConfig& c);
MatrixZonotoped model_set_phase(const ExperimentConfig& c, const DataSet& d);
GainCertificate gain_phase(const ExperimentConfig& c, const MatrixZonotoped& md);
TubeOperators make_operators(const ExperimentConfig& c, const MatrixZonotoped& md, const GainCertificate& cert);
/// Worst-case tube over tube.stability_steps.
std::vector<Zonotoped> tube_phase(const ExperimentConfig& c, const TubeOperators& ops);

struct ReplicateResult {
  Index index = 0;
  TubeTrajectory trajectory;
  FeasibilityReport report;
};

ReplicateResult closed_loop_replicate(const ExperimentConfig& c, const MatrixZonotoped& md, const TubeOperators& ops,
                                      const GainCertificate& cert, Index index);

/// Pipeline phases in execution order.
enum class Phase { data, model_set, gain, tube, closed_loop };

struct PipelineResult {
  ExitCode code = ExitCode::ok;
  Json summary;
};

/**
 * Runs every phase and writes config.json, dataset.csv, m_data.json,
 * gain_certificate.json, tube_bounds.csv, state_set.json, trajectory.csv
 * (replicate 0), replicate_NNN/trajectory.csv when replicates > 1, and
 * summary.json. summary.json is written even when a phase fails. Phases
 * after `last` are skipped along with their artifacts.
 */
PipelineResult run_pipeline(const ExperimentConfig& c, Phase last = Phase::closed_loop);

/// Rows of a trajectory CSV as written by write_trajectory_csv.
struct TrajectoryRow {
  Index t = 0;
  Eigen::VectorXd x, x_bar, tube_lo, tube_hi;
  std::optional<Eigen::VectorXd> u;
  std::optional<double> cost;
};

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in);

/// Missing or unreadable artifacts are reported with their path.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trajectory points, the Z_x polygon (first two coordinates) and tube rectangles per step.
Json emit_plot_data(const std::string& trajectory_csv, const std::string& state_set_json);
Json make_plot_data(const std::vector<TrajectoryRow>& rows, const Zonotoped& state_set);
/// Throws FormatError naming the first schema violation.
void validate_plot_data(const Json& bundle);

struct BoundRow {
  long long N = 0;
  BigInt vertex_bound;
  Index tube_constraints_per_step = 0;
};

std::vector<BoundRow> bound_report(long long n, long long m, long long T, long long gamma_w,
                                   const std::vector<long long>& horizons);
/// Header `N,minmax_vertex_bound,tube_constraints_per_step`.
void write_bound_report_csv(std::ostream& out, const std::vector<BoundRow>& rows);

}  // namespace ztube
