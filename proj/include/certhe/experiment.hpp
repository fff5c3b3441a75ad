#pragma once

// Monte-Carlo harness: trials × translation-noise levels × rotation-noise
// levels × constraint configurations × methods, with per-cell certification
// rates, error quantiles and histograms.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "certhe/baseline.hpp"
#include "certhe/io.hpp"
#include "certhe/sdp.hpp"
#include "certhe/synth.hpp"

namespace certhe {

struct GroundTruth {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;
};

struct ErrorMetrics {
  double rotation = 0.0;     // rad
  double translation = 0.0;  // length
  double scale = 0.0;        // |α − α_gt|
};

inline ErrorMetrics estimate_error(const ExtrinsicEstimate& est, const GroundTruth& gt) {
  return {rotation_geodesic_error(est.rotation, gt.rotation),
          (est.translation - gt.translation).norm(),
          std::abs(est.scale.value_or(1.0) - gt.scale)};
}

struct ExperimentConfig {
  int trials = 100;
  std::vector<double> noise_levels{0.0, 1.0};  // translation σ, percent of ‖t‖
  std::vector<double> rotation_sigmas{0.01};   // rad
  std::vector<ConstraintConfig> constraint_configs{ConstraintConfig::row_only()};
  std::vector<Method> methods{Method::dual_sdp};
  TrajectoryConfig trajectory;
  /// Per-trial α drawn uniformly from this range; trajectory.gt_scale otherwise.
  std::optional<std::pair<double, double>> scale_range;
  bool scale_known = false;
  std::uint64_t seed = 0;
  /// Write measured solve times; disable for bit-reproducible CSV output.
  bool record_timing = true;
  int threads = 0;  // 0: hardware concurrency
  CalibrateOptions calibrate;

  void validate() const {
    if (trials < 1) throw Error(Stage::config, "trials must be at least 1");
    for (double n : noise_levels) {
      if (n < 0.0) throw Error(Stage::config, "noise levels must be non-negative");
    }
    for (double s : rotation_sigmas) {
      if (s < 0.0) throw Error(Stage::config, "rotation sigmas must be non-negative");
    }
    if (noise_levels.empty() || rotation_sigmas.empty() || constraint_configs.empty() ||
        methods.empty()) {
      throw Error(Stage::config, "experiment grid has an empty axis");
    }
    if (scale_range && !(scale_range->first > 0.0 && scale_range->second >= scale_range->first)) {
      throw Error(Stage::config, "scale_range must satisfy 0 < lo <= hi");
    }
    trajectory.validate();
  }
};

struct TrialRecord {
  int trial = 0;
  double noise_pct = 0.0;
  double rot_sigma = 0.0;
  std::string constraints;
  Method method = Method::dual_sdp;
  bool certified = false;
  double gap = std::numeric_limits<double>::quiet_NaN();
  double rot_err = std::numeric_limits<double>::quiet_NaN();
  double trans_err = std::numeric_limits<double>::quiet_NaN();
  double scale_err = std::numeric_limits<double>::quiet_NaN();
  double cost = std::numeric_limits<double>::quiet_NaN();
  double time_s = 0.0;
  std::string error;  // empty on success
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t noise_seed(std::uint64_t seed, int trial, std::size_t noise_idx,
                                std::size_t rot_idx) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(trial));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(noise_idx) << 20));
  return splitmix64(h ^ (static_cast<std::uint64_t>(rot_idx) << 40));
}

}  // namespace detail

/// Ground truth and clean data of one trial; shared by all cells.
struct TrialSetup {
  std::vector<RigidTransform> poses_a;
  GroundTruth truth;
  EgomotionDataset clean;
};

inline TrialSetup make_trial(const ExperimentConfig& cfg, int trial) {
  const std::uint64_t s = cfg.seed + static_cast<std::uint64_t>(trial);
  std::mt19937_64 rng(s);
  TrialSetup setup;
  setup.poses_a = generate_trajectory(cfg.trajectory);
  const RigidTransform extrinsic = cfg.trajectory.gt_extrinsic ? *cfg.trajectory.gt_extrinsic
                                                               : random_extrinsic(rng);
  double scale = cfg.trajectory.gt_scale;
  if (cfg.scale_known) {
    scale = 1.0;
  } else if (cfg.scale_range) {
    std::uniform_real_distribution<double> u(cfg.scale_range->first, cfg.scale_range->second);
    scale = u(rng);
  }
  setup.truth = {extrinsic.rotation, extrinsic.translation, scale};
  setup.clean = derive_egomotion(setup.poses_a, extrinsic, scale);
  setup.clean.scale_known = cfg.scale_known;
  return setup;
}

/// Rows ordered by (noise level, rotation sigma, constraints, trial, method),
/// independent of thread scheduling.
inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n_noise = cfg.noise_levels.size();
  const std::size_t n_rot = cfg.rotation_sigmas.size();
  const std::size_t n_cons = cfg.constraint_configs.size();
  const std::size_t n_meth = cfg.methods.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);

  auto row_index = [&](std::size_t ni, std::size_t ri, std::size_t ci, std::size_t t,
                       std::size_t mi) {
    return (((ni * n_rot + ri) * n_cons + ci) * trials + t) * n_meth + mi;
  };
  std::vector<TrialRecord> rows(n_noise * n_rot * n_cons * trials * n_meth);

  auto run_trial = [&](std::size_t t) {
    const int trial = static_cast<int>(t);
    TrialSetup setup;
    std::string setup_error;
    try {
      setup = make_trial(cfg, trial);
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (std::size_t ni = 0; ni < n_noise; ++ni) {
      for (std::size_t ri = 0; ri < n_rot; ++ri) {
        EgomotionDataset noisy;
        if (setup_error.empty()) {
          NoiseConfig noise;
          noise.translation_sigma = cfg.noise_levels[ni];
          noise.rotation_sigma = cfg.rotation_sigmas[ri];
          noise.seed = detail::noise_seed(cfg.seed, trial, ni, ri);
          noisy = add_noise(setup.clean, noise);
        }
        std::optional<TrialRecord> linear_cache;
        for (std::size_t ci = 0; ci < n_cons; ++ci) {
          for (std::size_t mi = 0; mi < n_meth; ++mi) {
            TrialRecord rec;
            rec.trial = trial;
            rec.noise_pct = cfg.noise_levels[ni];
            rec.rot_sigma = cfg.rotation_sigmas[ri];
            rec.constraints = cfg.constraint_configs[ci].label();
            rec.method = cfg.methods[mi];
            if (!setup_error.empty()) {
              rec.error = setup_error;
            } else if (rec.method == Method::linear && linear_cache) {
              rec = *linear_cache;
              rec.constraints = cfg.constraint_configs[ci].label();
            } else {
              const auto start = std::chrono::steady_clock::now();
              try {
                const ExtrinsicEstimate est =
                    rec.method == Method::dual_sdp
                        ? calibrate(noisy, cfg.constraint_configs[ci], cfg.calibrate)
                        : calibrate_linear(noisy, cfg.calibrate.cost);
                const ErrorMetrics err = estimate_error(est, setup.truth);
                rec.certified = est.certified();
                if (est.certificate) rec.gap = est.certificate->relative_gap;
                rec.rot_err = err.rotation;
                rec.trans_err = err.translation;
                rec.scale_err = err.scale;
                rec.cost = est.primal_cost;
              } catch (const std::exception& e) {
                rec.error = e.what();
              }
              if (cfg.record_timing) {
                rec.time_s =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
              }
              if (rec.method == Method::linear) linear_cache = rec;
            }
            rows[row_index(ni, ri, ci, t, mi)] = rec;
          }
        }
      }
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(trials, cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw);
  if (workers <= 1) {
    for (std::size_t t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < trials; t += workers) run_trial(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output

inline const char* kTrialCsvHeader =
    "trial,noise_pct,rot_sigma,constraints,method,certified,gap,rot_err_rad,trans_err,"
    "scale_err,cost,time_s";

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string to_csv(const std::vector<TrialRecord>& rows) {
  std::ostringstream os;
  os << kTrialCsvHeader << "\n";
  for (const auto& r : rows) {
    os << r.trial << ',' << format_double(r.noise_pct) << ',' << format_double(r.rot_sigma) << ','
       << r.constraints << ',' << to_string(r.method) << ',' << (r.certified ? 1 : 0) << ','
       << format_double(r.gap) << ',' << format_double(r.rot_err) << ','
       << format_double(r.trans_err) << ',' << format_double(r.scale_err) << ','
       << format_double(r.cost) << ',' << format_double(r.time_s) << "\n";
  }
  return os.str();
}

/// Linear-interpolated quantile of the finite values; NaN when there are none.
inline double quantile(std::vector<double> values, double q) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return !std::isfinite(v); }),
               values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Histogram {
  std::vector<double> edges;
  std::vector<int> counts;
};

inline Histogram histogram(const std::vector<double>& values, double upper, int bins) {
  Histogram h;
  const double top = upper > 0.0 ? upper : 1.0;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(top * i / bins);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    auto b = static_cast<int>(std::floor(v / top * bins));
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

inline io::json experiment_config_to_json(const ExperimentConfig& c);

/// Per-cell certification rates, error quantiles and histogram counts. Bins
/// are shared across cells per metric (20 equal bins from 0 to the largest
/// finite error observed) so that cells are directly comparable.
inline io::json summarize(const ExperimentConfig& cfg, const std::vector<TrialRecord>& rows) {
  using io::json;
  using Key = std::tuple<double, double, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<const TrialRecord*>> cells;
  for (const auto& r : rows) {
    const Key k{r.noise_pct, r.rot_sigma, r.constraints, to_string(r.method)};
    if (!cells.count(k)) order.push_back(k);
    cells[k].push_back(&r);
  }
  constexpr int kBins = 20;
  double max_rot = 0.0, max_trans = 0.0, max_scale = 0.0;
  for (const auto& r : rows) {
    if (std::isfinite(r.rot_err)) max_rot = std::max(max_rot, r.rot_err);
    if (std::isfinite(r.trans_err)) max_trans = std::max(max_trans, r.trans_err);
    if (std::isfinite(r.scale_err)) max_scale = std::max(max_scale, r.scale_err);
  }

  json out;
  out["config"] = experiment_config_to_json(cfg);
  out["cells"] = json::array();
  for (const Key& k : order) {
    const auto& recs = cells[k];
    std::vector<double> rot, trans, scale;
    int certified = 0;
    int failures = 0;
    for (const TrialRecord* r : recs) {
      certified += r->certified ? 1 : 0;
      failures += r->error.empty() ? 0 : 1;
      rot.push_back(r->rot_err);
      trans.push_back(r->trans_err);
      scale.push_back(r->scale_err);
    }
    auto quantiles = [](const std::vector<double>& v) {
      return json{{"p05", quantile(v, 0.05)}, {"p25", quantile(v, 0.25)},
                  {"p50", quantile(v, 0.5)},  {"p75", quantile(v, 0.75)},
                  {"p95", quantile(v, 0.95)}};
    };
    auto hist = [](const std::vector<double>& v, double upper) {
      const Histogram h = histogram(v, upper, kBins);
      return json{{"edges", h.edges}, {"counts", h.counts}};
    };
    json cell;
    cell["noise_pct"] = std::get<0>(k);
    cell["rot_sigma"] = std::get<1>(k);
    cell["constraints"] = std::get<2>(k);
    cell["method"] = std::get<3>(k);
    cell["trials"] = recs.size();
    cell["certified_rate"] = static_cast<double>(certified) / static_cast<double>(recs.size());
    cell["failures"] = failures;
    cell["quantiles"] = {{"rot_err_rad", quantiles(rot)},
                         {"trans_err", quantiles(trans)},
                         {"scale_err", quantiles(scale)}};
    cell["histograms"] = {{"rot_err_rad", hist(rot, max_rot)},
                          {"trans_err", hist(trans, max_trans)},
                          {"scale_err", hist(scale, max_scale)}};
    out["cells"].push_back(cell);
  }
  return out;
}

inline Method parse_method(const std::string& s) {
  if (s == "dual_sdp") return Method::dual_sdp;
  if (s == "linear") return Method::linear;
  throw Error(Stage::config, "unknown method \"" + s + "\"");
}

inline ExperimentConfig experiment_config_from_json(const io::json& j) {
  io::detail::reject_unknown(j,
                             {"trials", "noise_levels", "rotation_sigma", "rotation_sigmas",
                              "constraint_configs", "methods", "trajectory", "scale_range",
                              "scale_known", "seed", "record_timing", "threads", "solver"},
                             "experiment config");
  try {
    ExperimentConfig c;
    c.trials = j.value("trials", c.trials);
    if (j.contains("noise_levels")) c.noise_levels = j.at("noise_levels").get<std::vector<double>>();
    if (j.contains("rotation_sigma")) c.rotation_sigmas = {j.at("rotation_sigma").get<double>()};
    if (j.contains("rotation_sigmas")) {
      c.rotation_sigmas = j.at("rotation_sigmas").get<std::vector<double>>();
    }
    if (j.contains("constraint_configs")) {
      c.constraint_configs.clear();
      for (const auto& s : j.at("constraint_configs")) {
        c.constraint_configs.push_back(ConstraintConfig::parse(s.get<std::string>()));
      }
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& s : j.at("methods")) c.methods.push_back(parse_method(s.get<std::string>()));
    }
    if (j.contains("trajectory")) c.trajectory = io::trajectory_from_json(j.at("trajectory"));
    if (j.contains("scale_range")) {
      const auto r = j.at("scale_range").get<std::vector<double>>();
      if (r.size() != 2) throw Error(Stage::config, "scale_range must have two entries");
      c.scale_range = std::make_pair(r[0], r[1]);
    }
    c.scale_known = j.value("scale_known", c.scale_known);
    c.seed = j.value("seed", c.seed);
    c.record_timing = j.value("record_timing", c.record_timing);
    c.threads = j.value("threads", c.threads);
    if (j.contains("solver")) {
      const io::json& s = j.at("solver");
      io::detail::reject_unknown(
          s, {"max_iterations", "psd_tolerance", "objective_tolerance"}, "solver options");
      c.calibrate.solver.max_iterations = s.value("max_iterations", c.calibrate.solver.max_iterations);
      c.calibrate.solver.psd_tolerance = s.value("psd_tolerance", c.calibrate.solver.psd_tolerance);
      c.calibrate.solver.objective_tolerance =
          s.value("objective_tolerance", c.calibrate.solver.objective_tolerance);
    }
    c.validate();
    return c;
  } catch (const io::json::exception& e) {
    throw Error(Stage::config, std::string("bad experiment config: ") + e.what());
  }
}

inline io::json experiment_config_to_json(const ExperimentConfig& c) {
  io::json j;
  j["trials"] = c.trials;
  j["noise_levels"] = c.noise_levels;
  j["rotation_sigmas"] = c.rotation_sigmas;
  std::vector<std::string> cons;
  for (const auto& cc : c.constraint_configs) cons.push_back(cc.label());
  j["constraint_configs"] = cons;
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["trajectory"] = io::to_json(c.trajectory);
  if (c.scale_range) j["scale_range"] = {c.scale_range->first, c.scale_range->second};
  j["scale_known"] = c.scale_known;
  j["seed"] = c.seed;
  j["record_timing"] = c.record_timing;
  j["solver"] = {{"max_iterations", c.calibrate.solver.max_iterations},
                 {"psd_tolerance", c.calibrate.solver.psd_tolerance},
                 {"objective_tolerance", c.calibrate.solver.objective_tolerance}};
  return j;
}

}  // namespace certhe
