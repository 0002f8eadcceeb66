// ztube: command-line front end for the data-driven tube MPC pipeline.

#include "ztube/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace ztube;

namespace {

struct CommonOptions {
  std::string config;
  std::string preset = "double_integrator";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> enlarge_zx;
  std::optional<Index> replicates;
  std::string tightening;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON); unset fields keep the preset values")
      ->check(CLI::ExistingFile);
  cmd->add_option("--preset", o.preset, "base configuration")->check(CLI::IsMember({"double_integrator"}));
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--enlarge-zx", o.enlarge_zx, "enlarge Z_x seen by the controller by this percentage");
  cmd->add_option("--replicates", o.replicates, "closed-loop replicates");
  cmd->add_option("--tightening", o.tightening, "coupled or worst_case")
      ->check(CLI::IsMember({"coupled", "worst_case"}));
}

ExperimentConfig resolve(const CommonOptions& o) {
  Json j = o.config.empty() ? Json::object() : read_json_file(o.config);
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  if (o.seed) j["master_seed"] = *o.seed;
  if (!o.out.empty()) j["output_dir"] = o.out;
  if (o.replicates) j["replicates"] = *o.replicates;
  if (o.enlarge_zx) j["ocp"]["enlarge_zx_percent"] = *o.enlarge_zx;
  if (!o.tightening.empty()) j["ocp"]["tightening"] = o.tightening;
  return config_from_json(j);
}

int run_phases(const CommonOptions& o, Phase last, std::optional<GainMode> mode = std::nullopt) {
  ExperimentConfig c;
  try {
    c = resolve(o);
    if (mode) {
      c.gain.mode = *mode;
      c.validate();
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::config);
  }
  const PipelineResult r = run_pipeline(c, last);
  const Json& err = r.summary["error"];
  if (!err.is_null())
    std::cerr << "ztube: " << err["phase"].get<std::string>() << " phase failed: " << err["message"].get<std::string>()
              << '\n';
  std::cout << "wrote artifacts to " << c.output_dir << " (exit " << static_cast<int>(r.code) << ")\n";
  return static_cast<int>(r.code);
}

std::vector<long long> parse_horizons(const std::string& s) {
  std::vector<long long> out;
  for (const auto& f : split_csv_line(s)) out.push_back(static_cast<long long>(parse_number(f)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven zonotopic tube MPC"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ztube 0.1.0");

  CommonOptions common;
  auto* collect = app.add_subcommand("collect", "collect the input-state dataset");
  auto* mdata = app.add_subcommand("mdata", "collect data and build the consistent model set");
  auto* gain = app.add_subcommand("gain", "certify a stabilizing gain");
  gain->require_subcommand(1);
  auto* verify = gain->add_subcommand("verify", "verify the configured gain");
  auto* synth = gain->add_subcommand("synth", "synthesize a gain");
  auto* tube = app.add_subcommand("tube", "worst-case tube stability analysis");
  auto* run = app.add_subcommand("run", "full pipeline including the closed loop");
  for (auto* cmd : {collect, mdata, verify, synth, tube, run}) add_common(cmd, common);

  auto* config = app.add_subcommand("config", "print the resolved configuration");
  add_common(config, common);

  std::string traj_csv, state_set, plot_out;
  auto* plot = app.add_subcommand("plotdata", "bundle a trajectory and Z_x into plot-ready JSON");
  plot->add_option("--trajectory", traj_csv, "trajectory.csv")->required();
  plot->add_option("--state-set", state_set, "state_set.json")->required();
  plot->add_option("--out", plot_out, "output file (default stdout)");

  long long bn = 2, bm = 1, bT = 100, bgamma = 2;
  std::string horizons = "1,2,3,4,5,6,7,8";
  std::string bounds_out;
  auto* bounds = app.add_subcommand("bounds", "vertex-enumeration bound against the tube constraint count");
  bounds->add_option("--n", bn, "state dimension")->check(CLI::PositiveNumber);
  bounds->add_option("--m", bm, "input dimension")->check(CLI::PositiveNumber);
  bounds->add_option("--T", bT, "data length")->check(CLI::PositiveNumber);
  bounds->add_option("--gamma-w", bgamma, "noise generators")->check(CLI::PositiveNumber);
  bounds->add_option("--horizons", horizons, "comma-separated horizons");
  bounds->add_option("--out", bounds_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    if (*collect) return run_phases(common, Phase::data);
    if (*mdata) return run_phases(common, Phase::model_set);
    if (*verify) return run_phases(common, Phase::gain, GainMode::verify);
    if (*synth) return run_phases(common, Phase::gain, GainMode::synthesize);
    if (*tube) return run_phases(common, Phase::tube);
    if (*run) return run_phases(common, Phase::closed_loop);
    if (*config) {
      try {
        std::cout << Json(resolve(common)).dump(2) << '\n';
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::config);
      }
      return 0;
    }
    if (*plot) {
      const Json bundle = emit_plot_data(traj_csv, state_set);
      if (plot_out.empty()) {
        std::cout << bundle.dump(2) << '\n';
      } else {
        write_json_file(plot_out, bundle);
      }
      return 0;
    }
    if (*bounds) {
      const auto rows = bound_report(bn, bm, bT, bgamma, parse_horizons(horizons));
      if (bounds_out.empty()) {
        write_bound_report_csv(std::cout, rows);
      } else {
        std::ofstream f(bounds_out);
        write_bound_report_csv(f, rows);
        if (!f) throw std::runtime_error("cannot write " + bounds_out);
      }
      return 0;
    }
  } catch (const ArtifactError& e) {
    std::cerr << "ztube: " << e.what() << '\n';
    return static_cast<int>(ExitCode::io);
  } catch (const FormatError& e) {
    std::cerr << "ztube: " << e.what() << '\n';
    return static_cast<int>(ExitCode::io);
  } catch (const std::invalid_argument& e) {
    std::cerr << "ztube: " << e.what() << '\n';
    return static_cast<int>(ExitCode::usage);
  } catch (const std::exception& e) {
    std::cerr << "ztube: " << e.what() << '\n';
    return static_cast<int>(ExitCode::io);
  }
  return static_cast<int>(ExitCode::usage);
}
