// certhe: generate synthetic hand-eye datasets, calibrate them with the
// certified dual-SDP solver or the linear baseline, check observability, and
// run Monte-Carlo experiments.
//
// Exit codes: 0 success / certified, 2 uncertified (or failed check), 1 error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "certhe/baseline.hpp"
#include "certhe/experiment.hpp"
#include "certhe/io.hpp"
#include "certhe/sdp.hpp"
#include "certhe/synth.hpp"

namespace {

using certhe::io::json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUncertified = 2;

void emit(const std::string& out, const json& j) {
  if (out.empty() || out == "-") {
    std::cout << certhe::io::dump(j);
  } else {
    certhe::io::write_text(out, certhe::io::dump(j));
  }
}

std::string sibling_path(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + suffix)).string();
}

struct SolverFlags {
  std::string constraints = "R";
  bool known_scale = false;
  std::optional<double> solver_tol;
  std::optional<int> max_iter;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--constraints", f.constraints, "Constraint set: R, RC, RH or RCH")
      ->check(CLI::IsMember({"R", "RC", "RH", "RCH", "R+C", "R+H", "R+C+H"}));
  cmd->add_flag("--known-scale", f.known_scale, "Treat both sensors as metric (no α)");
  cmd->add_option("--solver-tol", f.solver_tol, "Relative objective tolerance of the SDP solver")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", f.max_iter, "Interior-point iteration cap")
      ->check(CLI::PositiveNumber);
}

certhe::CalibrateOptions calibrate_options(const SolverFlags& f) {
  certhe::CalibrateOptions o;
  if (f.solver_tol) o.solver.objective_tolerance = *f.solver_tol;
  if (f.max_iter) o.solver.max_iterations = *f.max_iter;
  return o;
}

struct Loaded {
  certhe::io::DatasetFile file;
  certhe::EgomotionDataset data;
};

Loaded load(const std::string& path, bool force_known_scale) {
  Loaded l;
  l.file = certhe::io::read_dataset_file(path);
  l.data = certhe::io::to_dataset(l.file);
  if (force_known_scale) l.data.scale_known = true;
  return l;
}

void attach_ground_truth_error(json& out, const Loaded& l, const certhe::ExtrinsicEstimate& est) {
  if (!l.file.ground_truth) return;
  const certhe::RigidTransform gt = certhe::io::to_transform(l.file.ground_truth->extrinsic);
  const certhe::ErrorMetrics err = certhe::estimate_error(
      est, {gt.rotation, gt.translation, l.data.scale_known ? 1.0 : l.file.ground_truth->alpha});
  out["ground_truth_error"] = {
      {"rot_err_rad", err.rotation}, {"trans_err", err.translation}, {"scale_err", err.scale}};
}

int run_gen(const std::string& config_path, const std::string& out,
            const std::string& trajectory_out, std::optional<std::uint64_t> seed) {
  certhe::io::GenerateConfig cfg;
  if (!config_path.empty()) {
    cfg = certhe::io::generate_config_from_json(
        certhe::io::parse_json(certhe::io::read_text(config_path), config_path));
  }
  const std::uint64_t s = seed.value_or(0);
  if (seed) cfg.noise.seed = certhe::detail::splitmix64(s);
  if (cfg.scale_known) cfg.trajectory.gt_scale = 1.0;

  const certhe::SyntheticInstance inst = certhe::make_instance(cfg.trajectory, cfg.noise, s);
  certhe::EgomotionDataset noisy = inst.noisy;
  noisy.scale_known = cfg.scale_known;

  certhe::io::DatasetFile file = certhe::io::from_dataset(noisy);
  file.ground_truth = certhe::io::GroundTruthRecord{certhe::io::to_record(inst.extrinsic),
                                                    inst.scale};
  json gen = certhe::io::to_json(cfg);
  gen["seed"] = s;
  file.generator = gen;
  certhe::io::write_dataset_file(out, file);

  const std::string traj = trajectory_out.empty() ? sibling_path(out, "_trajectory.json")
                                                  : trajectory_out;
  certhe::io::write_text(traj, certhe::io::dump(certhe::io::trajectory_to_json(inst.poses_a,
                                                                               inst.extrinsic)));
  std::cerr << "wrote " << noisy.size() << " motions to " << out << " and trajectory to " << traj
            << "\n";
  return kExitOk;
}

int run_calibrate(const std::string& input, const std::string& out, const SolverFlags& flags) {
  const Loaded l = load(input, flags.known_scale);
  const certhe::ExtrinsicEstimate est = certhe::calibrate(
      l.data, certhe::ConstraintConfig::parse(flags.constraints), calibrate_options(flags));
  json j = certhe::io::to_json(est);
  j["constraints"] = certhe::ConstraintConfig::parse(flags.constraints).label();
  j["scale_known"] = l.data.scale_known;
  attach_ground_truth_error(j, l, est);
  emit(out, j);
  if (!est.certified()) {
    std::cerr << "solution NOT certified:";
    for (const auto& r : est.certificate->reasons) std::cerr << "\n  " << r;
    std::cerr << "\n";
    return kExitUncertified;
  }
  return kExitOk;
}

int run_baseline(const std::string& input, const std::string& out, bool known_scale) {
  const Loaded l = load(input, known_scale);
  const certhe::ExtrinsicEstimate est = certhe::calibrate_linear(l.data);
  json j = certhe::io::to_json(est);
  j["scale_known"] = l.data.scale_known;
  attach_ground_truth_error(j, l, est);
  emit(out, j);
  return kExitOk;
}

int run_check(const std::string& input, const std::string& out, const std::string& reference) {
  const Loaded l = load(input, false);
  certhe::Rotation ref = certhe::Rotation::identity();
  std::string used = "identity";
  if (reference == "ground-truth") {
    if (!l.file.ground_truth) {
      throw certhe::Error(certhe::Stage::config, "dataset has no ground truth");
    }
    ref = certhe::io::to_transform(l.file.ground_truth->extrinsic).rotation;
    used = "ground-truth";
  } else if (reference == "estimate") {
    try {
      ref = certhe::calibrate_linear(l.data).rotation;
      used = "estimate";
    } catch (const certhe::Error& e) {
      std::cerr << "no estimate available (" << e.what() << "); using identity reference\n";
    }
  }
  const certhe::ObservabilityReport report = certhe::observability_check(l.data, ref);
  json j = certhe::io::to_json(report);
  j["reference"] = used;
  emit(out, j);
  return report.ok ? kExitOk : kExitUncertified;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out,
                       const std::string& summary_out, std::optional<std::uint64_t> seed,
                       std::optional<int> threads) {
  certhe::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = certhe::experiment_config_from_json(
        certhe::io::parse_json(certhe::io::read_text(config_path), config_path));
  }
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  const auto rows = certhe::run_experiment(cfg);
  certhe::io::write_text(out, certhe::to_csv(rows));
  const std::string summary =
      summary_out.empty() ? sibling_path(out, "_summary.json") : summary_out;
  certhe::io::write_text(summary, certhe::io::dump(certhe::summarize(cfg, rows)));
  std::cerr << "wrote " << rows.size() << " rows to " << out << " and summary to " << summary
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certifiably optimal hand-eye calibration with unknown scale"};
  app.require_subcommand(1);

  std::string config_path, out, input, trajectory_out, summary_out;
  std::string reference = "estimate";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  SolverFlags solver_flags;
  bool baseline_known_scale = false;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--config", config_path, "Generator config JSON")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Dataset output path")->required();
  gen->add_option("--trajectory-out", trajectory_out,
                  "Trajectory output path (default: <out>_trajectory.json)");
  gen->add_option("--seed", seed, "Seed for the extrinsic and the noise");

  auto* cal = app.add_subcommand("calibrate", "Certified dual-SDP calibration");
  cal->add_option("input", input, "Dataset JSON")->required()->check(CLI::ExistingFile);
  cal->add_option("--out", out, "Result JSON path (default: stdout)");
  add_solver_flags(cal, solver_flags);

  auto* base = app.add_subcommand("baseline", "Linear least-squares baseline");
  base->add_option("input", input, "Dataset JSON")->required()->check(CLI::ExistingFile);
  base->add_option("--out", out, "Result JSON path (default: stdout)");
  base->add_flag("--known-scale", baseline_known_scale, "Treat both sensors as metric (no α)");

  auto* check = app.add_subcommand("check", "Rotation-axis and span observability check");
  check->add_option("input", input, "Dataset JSON")->required()->check(CLI::ExistingFile);
  check->add_option("--out", out, "Report JSON path (default: stdout)");
  check->add_option("--reference", reference, "Rotation used for the span condition")
      ->check(CLI::IsMember({"estimate", "identity", "ground-truth"}));

  auto* exp = app.add_subcommand("experiment", "Monte-Carlo experiment grid");
  exp->add_option("--config", config_path, "Experiment config JSON")->check(CLI::ExistingFile);
  exp->add_option("--out", out, "Trial CSV path")->required();
  exp->add_option("--summary", summary_out, "Summary JSON path (default: <out>_summary.json)");
  exp->add_option("--seed", seed, "Override the config seed");
  exp->add_option("--threads", threads, "Worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*gen) return run_gen(config_path, out, trajectory_out, seed);
    if (*cal) return run_calibrate(input, out, solver_flags);
    if (*base) return run_baseline(input, out, baseline_known_scale);
    if (*check) return run_check(input, out, reference);
    if (*exp) return run_experiment_cmd(config_path, out, summary_out, seed, threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
