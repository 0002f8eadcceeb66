#include "ztube/experiment.hpp"

#include "ztube/membership.hpp"
#include "ztube/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace ztube {

using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

std::string_view input_law_name(InputLaw::Kind k) {
  switch (k) {
    case InputLaw::Kind::gaussian: return "gaussian";
    case InputLaw::Kind::uniform: return "uniform";
    case InputLaw::Kind::zero: return "zero";
  }
  return "gaussian";
}

InputLaw::Kind input_law_from(const std::string& s) {
  if (s == "gaussian") return InputLaw::Kind::gaussian;
  if (s == "uniform") return InputLaw::Kind::uniform;
  if (s == "zero") return InputLaw::Kind::zero;
  throw std::invalid_argument("expected one of gaussian, uniform, zero");
}

std::string_view noise_law_name(NoiseLaw l) {
  switch (l) {
    case NoiseLaw::uniform: return "uniform";
    case NoiseLaw::vertices: return "vertices";
    case NoiseLaw::none: return "none";
  }
  return "uniform";
}

NoiseLaw noise_law_from(const std::string& s) {
  if (s == "uniform") return NoiseLaw::uniform;
  if (s == "vertices") return NoiseLaw::vertices;
  if (s == "none") return NoiseLaw::none;
  throw std::invalid_argument("expected one of uniform, vertices, none");
}

/// Reads `key` of `obj` into `out` when present; conversion failures name the field.
template <typename T, typename Conv>
void read_field(const Json& obj, const char* key, const std::string& prefix, T& out, Conv conv) {
  if (!obj.contains(key)) return;
  const std::string path = prefix.empty() ? key : prefix + "." + key;
  try {
    out = conv(obj.at(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

const Json& section(const Json& root, const char* key) {
  static const Json empty = Json::object();
  if (!root.contains(key)) return empty;
  if (!root.at(key).is_object()) throw ConfigError(key, "must be an object");
  return root.at(key);
}

auto as_double = [](const Json& j) { return j.get<double>(); };
auto as_index = [](const Json& j) {
  if (!j.is_number_integer()) throw std::invalid_argument("must be an integer");
  return j.get<Index>();
};
auto as_string = [](const Json& j) { return j.get<std::string>(); };
auto as_matrix = [](const Json& j) { return matrix_from_json(j); };
auto as_vector = [](const Json& j) { return vector_from_json(j); };
auto as_zonotope = [](const Json& j) { return j.get<Zonotoped>(); };

void need(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

std::string shape(const MatrixXd& m) { return std::to_string(m.rows()) + " x " + std::to_string(m.cols()); }

using Clock = std::chrono::steady_clock;

constexpr const char* kPhaseNames[] = {"data", "model_set", "gain", "tube", "closed_loop"};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw PhaseError(ExitCode::io, "cannot write " + path.string());
}

template <typename Writer>
void write_with(const fs::path& path, Writer w) {
  std::ostringstream ss;
  w(ss);
  write_text(path, ss.str());
}

Json rank_json(const RankCertificate& r) {
  return Json{{"rank", r.rank}, {"required", r.required}, {"sigma_min", r.sigma_min}, {"sigma_max", r.sigma_max}};
}

std::string replicate_dir(Index r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "replicate_%03lld", static_cast<long long>(r));
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::double_integrator() {
  ExperimentConfig c;
  c.plant.A = (MatrixXd(2, 2) << 1, 1, 0, 1).finished();
  c.plant.B = (MatrixXd(2, 1) << 0.5, 1).finished();
  c.plant.x0 = (VectorXd(2) << -5, -2).finished();
  c.plant.noise = Zonotoped(VectorXd::Zero(2), (MatrixXd(2, 2) << 0.1, 0.05, 0.05, 0.1).finished());
  c.data.input = InputLaw{InputLaw::Kind::gaussian, 1.0};
  c.data.noise_law = NoiseLaw::vertices;
  c.gain.K = (MatrixXd(1, 2) << -0.561, -1.385).finished();
  c.ocp.state_set = Zonotoped((VectorXd(2) << -4, 0).finished(), (MatrixXd(2, 2) << 4, 0, 0, 2).finished());
  c.ocp.input_set = Zonotoped(VectorXd::Zero(1), MatrixXd::Ones(1, 1));
  c.ocp.Q = MatrixXd::Identity(2, 2);
  return c;
}

void ExperimentConfig::validate() const {
  need(replicates >= 1, "replicates", "must be at least 1");
  need(!output_dir.empty(), "output_dir", "must not be empty");

  const Index n = plant.A.rows();
  need(n >= 1 && plant.A.cols() == n, "plant.A", "must be square and nonempty, got " + shape(plant.A));
  need(plant.B.rows() == n && plant.B.cols() >= 1, "plant.B",
       "must have " + std::to_string(n) + " rows and at least one column, got " + shape(plant.B));
  const Index m = plant.B.cols();
  need(plant.x0.size() == n, "plant.x0", "must have " + std::to_string(n) + " entries");
  need(plant.noise.dim() == n, "plant.noise", "dimension must be " + std::to_string(n));
  need(plant.A.allFinite() && plant.B.allFinite() && plant.x0.allFinite(), "plant", "entries must be finite");
  need(contains_point(plant.noise, VectorXd::Zero(n)), "plant.noise", "must contain the origin");

  need(data.T >= n + m, "data.T", "must be at least n + m = " + std::to_string(n + m));
  need(data.input.kind == InputLaw::Kind::zero || data.input.scale > 0.0, "data.input_scale", "must be positive");

  try {
    (void)prob_spec();
  } catch (const std::invalid_argument& e) {
    need(gain.epsilon > 0.0 && gain.epsilon < 1.0, "gain.epsilon", "must lie in (0, 1)");
    throw ConfigError("gain.delta", "must lie in (0, 1)");
  }
  if (gain.mode == GainMode::verify || gain.K.size() > 0)
    need(gain.K.rows() == m && gain.K.cols() == n, "gain.K",
         "must be " + std::to_string(m) + " x " + std::to_string(n) + ", got " + shape(gain.K));

  need(tube.order_cap == 0 || tube.order_cap >= n, "tube.order_cap", "must be 0 or at least n");
  need(tube.stability_steps >= 0, "tube.stability_steps", "must be nonnegative");
  need(tube.k0 >= 0, "tube.k0", "must be nonnegative");

  need(ocp.N >= 1, "ocp.N", "must be at least 1");
  need(ocp.M >= 0, "ocp.M", "must be nonnegative");
  need(ocp.state_set.dim() == n, "ocp.state_set", "dimension must be " + std::to_string(n));
  need(ocp.input_set.dim() == m, "ocp.input_set", "dimension must be " + std::to_string(m));
  need(ocp.Q.rows() == n && ocp.Q.cols() == n, "ocp.Q", "must be " + std::to_string(n) + " x " + std::to_string(n));
  need(ocp.input_abs_weight >= 0.0, "ocp.input_abs_weight", "must be nonnegative");
  need(ocp.enlarge_zx_percent >= 0.0, "ocp.enlarge_zx_percent", "must be nonnegative");
  try {
    ocp_spec().validate(n, m);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("ocp", e.what());
  }
}

OcpSpec ExperimentConfig::ocp_spec() const {
  OcpSpec s;
  s.horizon = ocp.N;
  s.state_set = ocp.enlarge_zx_percent > 0.0 ? enlarge(ocp.state_set, 1.0 + ocp.enlarge_zx_percent / 100.0)
                                             : ocp.state_set;
  s.input_set = ocp.input_set;
  s.cost.Q = ocp.Q;
  s.cost.input_abs_weight = ocp.input_abs_weight;
  s.tightening = ocp.tightening;
  return s;
}

void to_json(Json& j, const ExperimentConfig& c) {
  j = Json{
      {"schema_version", kConfigSchemaVersion},
      {"name", c.name},
      {"master_seed", c.master_seed},
      {"replicates", c.replicates},
      {"output_dir", c.output_dir},
      {"plant",
       {{"A", matrix_to_json(c.plant.A)},
        {"B", matrix_to_json(c.plant.B)},
        {"x0", vector_to_json(c.plant.x0)},
        {"noise", c.plant.noise}}},
      {"data",
       {{"T", c.data.T},
        {"input_law", input_law_name(c.data.input.kind)},
        {"input_scale", c.data.input.scale},
        {"noise_law", noise_law_name(c.data.noise_law)},
        {"seed", c.data.seed ? Json(*c.data.seed) : Json(nullptr)}}},
      {"gain",
       {{"mode", c.gain.mode == GainMode::verify ? "verify" : "synthesize"},
        {"K", matrix_to_json(c.gain.K)},
        {"epsilon", c.gain.epsilon},
        {"delta", c.gain.delta}}},
      {"tube", {{"order_cap", c.tube.order_cap}, {"stability_steps", c.tube.stability_steps}, {"k0", c.tube.k0}}},
      {"ocp",
       {{"N", c.ocp.N},
        {"M", c.ocp.M},
        {"state_set", c.ocp.state_set},
        {"input_set", c.ocp.input_set},
        {"Q", matrix_to_json(c.ocp.Q)},
        {"input_abs_weight", c.ocp.input_abs_weight},
        {"tightening", to_string(c.ocp.tightening)},
        {"noise_law", noise_law_name(c.ocp.noise_law)},
        {"enlarge_zx_percent", c.ocp.enlarge_zx_percent}}},
  };
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  ExperimentConfig c = ExperimentConfig::double_integrator();
  if (j.contains("schema_version")) {
    Index v = 0;
    read_field(j, "schema_version", "", v, as_index);
    need(v == kConfigSchemaVersion, "schema_version", "unsupported version " + std::to_string(v));
  }
  read_field(j, "name", "", c.name, as_string);
  read_field(j, "master_seed", "", c.master_seed, [](const Json& v) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw std::invalid_argument("must be a nonnegative integer");
    return v.get<std::uint64_t>();
  });
  read_field(j, "replicates", "", c.replicates, as_index);
  read_field(j, "output_dir", "", c.output_dir, as_string);

  const Json& p = section(j, "plant");
  read_field(p, "A", "plant", c.plant.A, as_matrix);
  read_field(p, "B", "plant", c.plant.B, as_matrix);
  read_field(p, "x0", "plant", c.plant.x0, as_vector);
  read_field(p, "noise", "plant", c.plant.noise, as_zonotope);

  const Json& d = section(j, "data");
  read_field(d, "T", "data", c.data.T, as_index);
  read_field(d, "input_law", "data", c.data.input.kind, [](const Json& v) { return input_law_from(v.get<std::string>()); });
  read_field(d, "input_scale", "data", c.data.input.scale, as_double);
  read_field(d, "noise_law", "data", c.data.noise_law, [](const Json& v) { return noise_law_from(v.get<std::string>()); });
  read_field(d, "seed", "data", c.data.seed, [](const Json& v) -> std::optional<std::uint64_t> {
    if (v.is_null()) return std::nullopt;
    return v.get<std::uint64_t>();
  });

  const Json& g = section(j, "gain");
  read_field(g, "mode", "gain", c.gain.mode, [](const Json& v) {
    const auto s = v.get<std::string>();
    if (s == "verify") return GainMode::verify;
    if (s == "synthesize") return GainMode::synthesize;
    throw std::invalid_argument("expected verify or synthesize");
  });
  read_field(g, "K", "gain", c.gain.K, as_matrix);
  read_field(g, "epsilon", "gain", c.gain.epsilon, as_double);
  read_field(g, "delta", "gain", c.gain.delta, as_double);

  const Json& t = section(j, "tube");
  read_field(t, "order_cap", "tube", c.tube.order_cap, as_index);
  read_field(t, "stability_steps", "tube", c.tube.stability_steps, as_index);
  read_field(t, "k0", "tube", c.tube.k0, as_index);

  const Json& o = section(j, "ocp");
  read_field(o, "N", "ocp", c.ocp.N, as_index);
  read_field(o, "M", "ocp", c.ocp.M, as_index);
  read_field(o, "state_set", "ocp", c.ocp.state_set, as_zonotope);
  read_field(o, "input_set", "ocp", c.ocp.input_set, as_zonotope);
  read_field(o, "Q", "ocp", c.ocp.Q, as_matrix);
  read_field(o, "input_abs_weight", "ocp", c.ocp.input_abs_weight, as_double);
  read_field(o, "tightening", "ocp", c.ocp.tightening,
             [](const Json& v) { return tightening_from_string(v.get<std::string>()); });
  read_field(o, "noise_law", "ocp", c.ocp.noise_law, [](const Json& v) { return noise_law_from(v.get<std::string>()); });
  read_field(o, "enlarge_zx_percent", "ocp", c.ocp.enlarge_zx_percent, as_double);

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("config", e.what());
  }
  return config_from_json(j);
}

std::string_view phase_name(ExitCode c) {
  switch (c) {
    case ExitCode::ok: return "none";
    case ExitCode::usage: return "usage";
    case ExitCode::config: return "config";
    case ExitCode::data: return "data";
    case ExitCode::model_set: return "model_set";
    case ExitCode::gain: return "gain";
    case ExitCode::tube: return "tube";
    case ExitCode::closed_loop: return "closed_loop";
    case ExitCode::io: return "io";
  }
  return "unknown";
}

DataSet collect_phase(const ExperimentConfig& c) {
  std::mt19937_64 rng = c.data.seed ? std::mt19937_64(*c.data.seed) : make_rng(c.master_seed, Stream::data);
  const PlantModel plant(c.plant.A, c.plant.B, c.plant.noise);
  try {
    return collect_trajectory(plant, c.data.T, c.plant.x0, c.data.input, c.data.noise_law, rng);
  } catch (const std::exception& e) {
    throw PhaseError(ExitCode::data, e.what());
  }
}

MatrixZonotoped model_set_phase(const ExperimentConfig& c, const DataSet& d) {
  try {
    return build_consistent_set(d, c.plant.noise);
  } catch (const std::exception& e) {
    throw PhaseError(ExitCode::model_set, e.what());
  }
}

GainCertificate gain_phase(const ExperimentConfig& c, const MatrixZonotoped& md) {
  const ProbSpec spec = c.prob_spec();
  if (c.gain.mode == GainMode::synthesize) {
    auto rng = make_rng(c.master_seed, Stream::synthesis);
    try {
      return synthesize_gain(md, spec, rng);
    } catch (const std::exception& e) {
      throw PhaseError(ExitCode::gain, std::string("synthesis failed: ") + e.what());
    }
  }
  auto rng = make_rng(c.master_seed, Stream::gain);
  auto res = verify_gain(c.gain.K, md, spec, rng);
  if (!res)
    throw PhaseError(ExitCode::gain, "gain rejected: sample " + std::to_string(res.rejection->sample_index) +
                                         " has spectral radius " + format_number(res.rejection->spectral_radius));
  return *res.certificate;
}

TubeOperators make_operators(const ExperimentConfig& c, const MatrixZonotoped& md, const GainCertificate& cert) {
  return TubeOperators::make(md, NominalModel::center_of(md), cert.K, c.plant.noise);
}

std::vector<Zonotoped> tube_phase(const ExperimentConfig& c, const TubeOperators& ops) {
  TubeConfig cfg;
  cfg.order_cap = c.tube.order_cap;
  try {
    return worst_case_tube_sequence(ops, c.ocp.state_set, c.ocp.input_set, c.tube.stability_steps, cfg);
  } catch (const TubeDivergent& e) {
    throw PhaseError(ExitCode::tube, e.what());
  }
}

ReplicateResult closed_loop_replicate(const ExperimentConfig& c, const MatrixZonotoped& md, const TubeOperators& ops,
                                      const GainCertificate& cert, Index index) {
  auto rng = make_rng(c.master_seed, Stream::closed_loop, static_cast<std::uint64_t>(index));
  const PlantModel plant(c.plant.A, c.plant.B, c.plant.noise);
  ReplicateResult r;
  r.index = index;
  r.trajectory = run_receding_horizon(plant, NominalModel::center_of(md), ops, cert, c.ocp_spec(), c.ocp.M,
                                      c.plant.x0, c.ocp.noise_law, rng);
  r.report = check_recursive_feasibility(r.trajectory, c.ocp.state_set, c.ocp.input_set);
  return r;
}

namespace {

/// Max over t >= k0 of the ratio of truncated to full tube radius along the applied nominal pairs.
std::optional<double> truncation_ratio(const ExperimentConfig& c, const TubeOperators& ops, const TubeTrajectory& tr) {
  const Index k0 = c.tube.k0;
  if (k0 <= 0 || static_cast<Index>(tr.steps.size()) < k0) return std::nullopt;
  std::vector<NominalPair> pairs;
  for (const auto& s : tr.steps) pairs.emplace_back(s.x_bar, s.u_bar);
  TubeConfig cfg;
  cfg.order_cap = c.tube.order_cap;
  const auto full = propagate_along(ops, Zonotoped::origin(ops.state_dim()), pairs, cfg);
  double worst = 0.0;
  for (Index t = k0; t <= static_cast<Index>(pairs.size()); ++t) {
    std::vector<NominalPair> window(pairs.begin() + (t - k0), pairs.begin() + t);
    const double rt = interval_radius(truncated_tube(ops, window, k0, cfg)).maxCoeff();
    const double rf = interval_radius(full[static_cast<std::size_t>(t)]).maxCoeff();
    if (rf > 0.0) worst = std::max(worst, rt / rf);
  }
  return worst;
}

Json replicate_json(const ExperimentConfig& c, const ReplicateResult& r, const std::optional<double>& ratio) {
  const auto& tr = r.trajectory;
  Json objective = Json::array(), stage = Json::array();
  for (const auto& s : tr.steps) {
    objective.push_back(s.objective);
    stage.push_back(s.cost);
  }
  const double final_norm = tr.terminal ? tr.terminal->x.norm() : std::nan("");
  Json j{{"index", r.index},
         {"status", to_string(tr.status)},
         {"message", tr.message},
         {"steps_completed", tr.steps.size()},
         {"all_steps_feasible", tr.complete()},
         {"constraints_satisfied", r.report.state_violations == 0 && r.report.input_violations == 0},
         {"feasibility", r.report},
         {"initial_norm", c.plant.x0.norm()},
         {"final_norm", final_norm},
         {"norm_decreased", final_norm < c.plant.x0.norm()},
         {"objective_per_step", objective},
         {"stage_cost_per_step", stage}};
  j["failed_step"] = tr.failed_step ? Json(*tr.failed_step) : Json(nullptr);
  j["truncation_radius_ratio"] = ratio ? Json(*ratio) : Json(nullptr);
  return j;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& c, Phase last) {
  PipelineResult result;
  Json& s = result.summary;
  s = Json{{"schema_version", kSummarySchemaVersion}, {"name", c.name}, {"master_seed", c.master_seed},
           {"last_phase", kPhaseNames[static_cast<int>(last)]}, {"phases", Json::object()}, {"error", nullptr}};
  Json& phases = s["phases"];
  const fs::path out(c.output_dir);
  auto fail = [&](ExitCode code, const std::string& msg) {
    result.code = code;
    s["error"] = Json{{"phase", phase_name(code)}, {"exit_code", static_cast<int>(code)}, {"message", msg}};
  };

  bool out_ready = false;
  auto body = [&] {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw PhaseError(ExitCode::config, e.what());
    }
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw PhaseError(ExitCode::io, "cannot create " + out.string() + ": " + ec.message());
    out_ready = true;
    write_text(out / "config.json", Json(c).dump(2) + "\n");
    write_text(out / "state_set.json", Json(c.ocp.state_set).dump(2) + "\n");

    auto t0 = Clock::now();
    const DataSet data = collect_phase(c);
    write_with(out / "dataset.csv", [&](std::ostream& o) { write_dataset_csv(o, data); });
    phases["data"] = Json{{"samples", data.samples()}, {"rank", rank_json(data.rank)}, {"seconds", seconds_since(t0)}};
    if (last == Phase::data) return;

    t0 = Clock::now();
    const MatrixZonotoped md = model_set_phase(c, data);
    MatrixXd truth(c.state_dim(), c.state_dim() + c.input_dim());
    truth << c.plant.A, c.plant.B;
    const bool contains_truth = mz_contains(md, truth);
    write_text(out / "m_data.json", Json{{"M_D", md}, {"rank", rank_json(data.rank)}, {"samples", data.samples()},
                                         {"contains_true_model", contains_truth}}
                                            .dump(2) +
                                        "\n");
    phases["model_set"] = Json{{"generators", md.num_generators()},
                               {"contains_true_model", contains_truth},
                               {"seconds", seconds_since(t0)}};
    if (last == Phase::model_set) return;

    t0 = Clock::now();
    GainCertificate cert;
    try {
      cert = gain_phase(c, md);
    } catch (const PhaseError& e) {
      phases["gain"] = Json{{"passed", false}, {"mode", c.gain.mode == GainMode::verify ? "verify" : "synthesize"},
                            {"seconds", seconds_since(t0)}};
      throw;
    }
    write_text(out / "gain_certificate.json", Json(cert).dump(2) + "\n");
    phases["gain"] = Json{{"passed", true},
                          {"mode", c.gain.mode == GainMode::verify ? "verify" : "synthesize"},
                          {"K", matrix_to_json(cert.K)},
                          {"num_samples", cert.num_samples},
                          {"max_spectral_radius", cert.max_spectral_radius},
                          {"seconds", seconds_since(t0)}};
    if (last == Phase::gain) return;

    t0 = Clock::now();
    const TubeOperators ops = make_operators(c, md, cert);
    std::vector<Zonotoped> tube;
    try {
      tube = tube_phase(c, ops);
    } catch (const PhaseError& e) {
      phases["tube"] = Json{{"diverged", true}, {"seconds", seconds_since(t0)}};
      throw;
    }
    write_with(out / "tube_bounds.csv", [&](std::ostream& o) { write_tube_bounds_csv(o, tube); });
    double sup = 0.0, inc = 0.0;
    for (std::size_t k = 0; k < tube.size(); ++k) {
      sup = std::max(sup, interval_radius(tube[k]).maxCoeff());
      if (k > 0) inc = (interval_radius(tube[k]) - interval_radius(tube[k - 1])).lpNorm<Eigen::Infinity>();
    }
    phases["tube"] = Json{{"diverged", false},
                          {"steps", c.tube.stability_steps},
                          {"sup_radius", sup},
                          {"final_increment", inc},
                          {"seconds", seconds_since(t0)}};
    if (last == Phase::tube) return;

    t0 = Clock::now();
    std::vector<ReplicateResult> reps(static_cast<std::size_t>(c.replicates));
    const Index workers = std::max<Index>(1, std::min<Index>(c.replicates, std::thread::hardware_concurrency()));
    for (Index base = 0; base < c.replicates; base += workers) {
      std::vector<std::future<ReplicateResult>> jobs;
      for (Index r = base; r < std::min(c.replicates, base + workers); ++r)
        jobs.push_back(std::async(std::launch::async, [&, r] {
          auto res = closed_loop_replicate(c, md, ops, cert, r);
          if (c.replicates > 1) {
            const fs::path dir = out / replicate_dir(r);
            fs::create_directories(dir);
            write_with(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, res.trajectory); });
          }
          return res;
        }));
      for (auto& f : jobs) {
        auto res = f.get();
        reps[static_cast<std::size_t>(res.index)] = std::move(res);
      }
    }
    write_with(out / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, reps.front().trajectory); });

    Json runs = Json::array();
    Index feasible = 0, violating = 0, decreased = 0;
    for (const auto& r : reps) {
      const auto ratio = r.index == 0 ? truncation_ratio(c, ops, r.trajectory) : std::nullopt;
      runs.push_back(replicate_json(c, r, ratio));
      if (r.trajectory.complete()) ++feasible;
      if (r.report.state_violations + r.report.input_violations > 0) ++violating;
      if (r.trajectory.terminal && r.trajectory.terminal->x.norm() < c.plant.x0.norm()) ++decreased;
    }
    phases["closed_loop"] = Json{{"replicates", c.replicates},
                                 {"steps", c.ocp.M},
                                 {"tightening", to_string(c.ocp.tightening)},
                                 {"enlarge_zx_percent", c.ocp.enlarge_zx_percent},
                                 {"all_steps_feasible_runs", feasible},
                                 {"runs_with_violations", violating},
                                 {"norm_decreased_runs", decreased},
                                 {"runs", runs},
                                 {"seconds", seconds_since(t0)}};
    if (feasible < c.replicates || violating > 0)
      fail(ExitCode::closed_loop, std::to_string(c.replicates - feasible) + " infeasible run(s), " +
                                      std::to_string(violating) + " run(s) with constraint violations");
  };
  try {
    body();
  } catch (const PhaseError& e) {
    fail(e.code(), e.what());
  } catch (const std::exception& e) {
    fail(ExitCode::io, e.what());
  }
  s["exit_code"] = static_cast<int>(result.code);
  s["status"] = result.code == ExitCode::ok ? "ok" : "failed";
  if (out_ready) {
    try {
      write_text(out / "summary.json", s.dump(2) + "\n");
    } catch (const PhaseError& e) {
      if (result.code == ExitCode::ok) fail(ExitCode::io, e.what());
    }
  }
  return result;
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trajectory csv: missing header");
  const auto header = split_csv_line(line);
  Index n = 0, m = 0;
  for (const auto& h : header) {
    if (h.size() > 1 && h[0] == 'x' && std::isdigit(static_cast<unsigned char>(h[1]))) ++n;
    if (h == "u" || (h.size() > 1 && h[0] == 'u' && std::isdigit(static_cast<unsigned char>(h[1])))) ++m;
  }
  const std::size_t expected = static_cast<std::size_t>(1 + 2 * n + m + 2 * n + 1);
  if (header.empty() || header.front() != "t" || header.back() != "cost" || n == 0 || header.size() != expected)
    throw FormatError("trajectory csv: unexpected header '" + line + "'");
  std::vector<TrajectoryRow> rows;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != expected)
      throw FormatError("trajectory csv line " + std::to_string(lineno) + ": expected " + std::to_string(expected) +
                        " fields");
    TrajectoryRow r;
    std::size_t k = 0;
    r.t = static_cast<Index>(parse_number(f[k++]));
    r.x.resize(n);
    r.x_bar.resize(n);
    r.tube_lo.resize(n);
    r.tube_hi.resize(n);
    for (Index i = 0; i < n; ++i) r.x(i) = parse_number(f[k++]);
    for (Index i = 0; i < n; ++i) r.x_bar(i) = parse_number(f[k++]);
    if (!f[k].empty()) {
      VectorXd u(m);
      for (Index i = 0; i < m; ++i) u(i) = parse_number(f[k + static_cast<std::size_t>(i)]);
      r.u = u;
    }
    k += static_cast<std::size_t>(m);
    for (Index i = 0; i < n; ++i) {
      r.tube_lo(i) = parse_number(f[k++]);
      r.tube_hi(i) = parse_number(f[k++]);
    }
    if (!f[k].empty()) r.cost = parse_number(f[k]);
    rows.push_back(std::move(r));
  }
  return rows;
}

Json make_plot_data(const std::vector<TrajectoryRow>& rows, const Zonotoped& state_set) {
  const Index n = state_set.dim();
  Json polygon = Json::array();
  if (n >= 2) {
    MatrixXd proj = MatrixXd::Zero(2, n);
    proj.leftCols(2).setIdentity();
    for (const auto& v : zonotope_vertices(proj * state_set)) polygon.push_back(vector_to_json(v));
  }
  Json traj = Json::array(), rects = Json::array();
  for (const auto& r : rows) {
    if (r.x.size() != n) throw FormatError("plot data: trajectory dimension differs from the state set");
    Json p{{"t", r.t}, {"x", vector_to_json(r.x)}, {"x_bar", vector_to_json(r.x_bar)}};
    p["u"] = r.u ? vector_to_json(*r.u) : Json(nullptr);
    traj.push_back(std::move(p));
    rects.push_back(Json{{"t", r.t}, {"lower", vector_to_json(r.tube_lo)}, {"upper", vector_to_json(r.tube_hi)}});
  }
  return Json{{"schema", "ztube.plot_data"},
              {"version", kPlotDataSchemaVersion},
              {"state_dim", n},
              {"state_set_polygon", polygon},
              {"trajectory", traj},
              {"tube_rectangles", rects}};
}

Json emit_plot_data(const std::string& trajectory_csv, const std::string& state_set_json) {
  std::ifstream in(trajectory_csv);
  if (!in) throw ArtifactError("missing artifact: " + trajectory_csv);
  std::vector<TrajectoryRow> rows;
  try {
    rows = read_trajectory_csv(in);
  } catch (const FormatError& e) {
    throw ArtifactError(trajectory_csv + ": " + e.what());
  }
  if (!fs::exists(state_set_json)) throw ArtifactError("missing artifact: " + state_set_json);
  Zonotoped zx;
  try {
    zx = read_json_file(state_set_json).get<Zonotoped>();
  } catch (const std::exception& e) {
    throw ArtifactError(state_set_json + ": " + e.what());
  }
  Json bundle = make_plot_data(rows, zx);
  validate_plot_data(bundle);
  return bundle;
}

void validate_plot_data(const Json& b) {
  auto fail = [](const std::string& what) { throw FormatError("plot data: " + what); };
  auto numeric_list = [](const Json& v, std::size_t len) {
    if (!v.is_array() || v.size() != len) return false;
    return std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number(); });
  };
  if (!b.is_object()) fail("bundle must be an object");
  for (const char* key : {"schema", "version", "state_dim", "state_set_polygon", "trajectory", "tube_rectangles"})
    if (!b.contains(key)) fail(std::string("missing '") + key + "'");
  if (b["schema"] != "ztube.plot_data") fail("unknown schema");
  if (!b["version"].is_number_integer() || b["version"].get<int>() != kPlotDataSchemaVersion) fail("unsupported version");
  if (!b["state_dim"].is_number_integer() || b["state_dim"].get<long long>() < 1) fail("'state_dim' must be positive");
  const auto n = b["state_dim"].get<std::size_t>();
  const Json& poly = b["state_set_polygon"];
  if (!poly.is_array() || (n >= 2 && poly.size() < 3) || (n < 2 && !poly.empty()))
    fail("'state_set_polygon' must list at least three vertices for n >= 2");
  for (const auto& v : poly)
    if (!numeric_list(v, 2)) fail("polygon vertices must be pairs of numbers");
  const Json& traj = b["trajectory"];
  const Json& rects = b["tube_rectangles"];
  if (!traj.is_array() || !rects.is_array() || traj.size() != rects.size())
    fail("'trajectory' and 'tube_rectangles' must be lists of equal length");
  long long prev = -1;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Json& p = traj[i];
    if (!p.is_object() || !p.contains("t") || !p["t"].is_number_integer()) fail("trajectory point without integer 't'");
    const long long t = p["t"].get<long long>();
    if (t <= prev) fail("trajectory steps must increase");
    prev = t;
    if (!p.contains("x") || !numeric_list(p["x"], n) || !p.contains("x_bar") || !numeric_list(p["x_bar"], n))
      fail("trajectory point " + std::to_string(t) + ": 'x' and 'x_bar' need state_dim numbers");
    if (!p.contains("u") || !(p["u"].is_null() || (p["u"].is_array() && !p["u"].empty())))
      fail("trajectory point " + std::to_string(t) + ": 'u' must be a list or null");
    const Json& r = rects[i];
    if (!r.is_object() || r.value("t", -1LL) != t) fail("tube rectangle " + std::to_string(i) + " does not match its step");
    if (!r.contains("lower") || !numeric_list(r["lower"], n) || !r.contains("upper") || !numeric_list(r["upper"], n))
      fail("tube rectangle " + std::to_string(t) + ": bounds need state_dim numbers");
    for (std::size_t k = 0; k < n; ++k)
      if (r["lower"][k].get<double>() > r["upper"][k].get<double>())
        fail("tube rectangle " + std::to_string(t) + ": lower exceeds upper");
  }
}

std::vector<BoundRow> bound_report(long long n, long long m, long long T, long long gamma_w,
                                   const std::vector<long long>& horizons) {
  if (n < 1 || m < 1 || T < 1 || gamma_w < 1) throw std::invalid_argument("bound_report: arguments must be positive");
  std::vector<BoundRow> rows;
  for (long long N : horizons) {
    if (N < 1) throw std::invalid_argument("bound_report: horizons must be positive");
    rows.push_back({N, minmax_vertex_bound(n, m, T, gamma_w, N), constraints_per_step(n, m, true)});
  }
  return rows;
}

void write_bound_report_csv(std::ostream& out, const std::vector<BoundRow>& rows) {
  out << "N,minmax_vertex_bound,tube_constraints_per_step\n";
  for (const auto& r : rows) out << r.N << ',' << r.vertex_bound.str() << ',' << r.tube_constraints_per_step << '\n';
}

}  // namespace ztube
