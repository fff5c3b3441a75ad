#pragma once

// JSON file formats: dataset files (relative motions as unit quaternions),
// trajectory files (absolute poses), generator configuration and results.
//
// Dataset files are written with a fixed key order and shortest round-trip
// float formatting, so write → read → write is byte-identical.

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "certhe/errors.hpp"
#include "certhe/geometry.hpp"
#include "certhe/problem.hpp"
#include "certhe/sdp.hpp"
#include "certhe/synth.hpp"

namespace certhe::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct PoseRecord {
  std::array<double, 4> q{1.0, 0.0, 0.0, 0.0};  // w, x, y, z with w ≥ 0
  std::array<double, 3> t{0.0, 0.0, 0.0};
};

struct GroundTruthRecord {
  PoseRecord extrinsic;
  double alpha = 1.0;
};

struct DatasetFile {
  int schema_version = kSchemaVersion;
  std::vector<PoseRecord> sensor_a;
  std::vector<PoseRecord> sensor_b;
  bool scale_known = false;
  std::optional<GroundTruthRecord> ground_truth;
  std::optional<json> generator;
};

// ---------------------------------------------------------------------------
// Conversions

inline PoseRecord to_record(const RigidTransform& t) {
  Eigen::Quaterniond q(t.rotation.matrix());
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {{q.w(), q.x(), q.y(), q.z()}, {t.translation.x(), t.translation.y(), t.translation.z()}};
}

inline RigidTransform to_transform(const PoseRecord& r) {
  const Eigen::Quaterniond q = Eigen::Quaterniond(r.q[0], r.q[1], r.q[2], r.q[3]).normalized();
  return {nearest_rotation(q.toRotationMatrix()), Vec3(r.t[0], r.t[1], r.t[2])};
}

inline void validate(const DatasetFile& f) {
  if (f.schema_version != kSchemaVersion) {
    throw Error(Stage::io, "unsupported schema_version " + std::to_string(f.schema_version));
  }
  if (f.sensor_a.size() != f.sensor_b.size()) {
    throw Error(Stage::io, "sensor_a and sensor_b have different lengths");
  }
  auto check = [](const PoseRecord& p, const char* where, std::size_t i) {
    const double n = std::sqrt(p.q[0] * p.q[0] + p.q[1] * p.q[1] + p.q[2] * p.q[2] + p.q[3] * p.q[3]);
    if (std::abs(n - 1.0) > 1e-9) {
      std::ostringstream os;
      os << where << "[" << i << "]: quaternion norm " << n << " is not 1";
      throw Error(Stage::io, os.str());
    }
  };
  for (std::size_t i = 0; i < f.sensor_a.size(); ++i) check(f.sensor_a[i], "sensor_a", i);
  for (std::size_t i = 0; i < f.sensor_b.size(); ++i) check(f.sensor_b[i], "sensor_b", i);
  if (f.ground_truth) check(f.ground_truth->extrinsic, "ground_truth", 0);
}

inline EgomotionDataset to_dataset(const DatasetFile& f) {
  validate(f);
  EgomotionDataset d;
  d.scale_known = f.scale_known;
  for (const auto& p : f.sensor_a) d.motions_a.push_back(to_transform(p));
  for (const auto& p : f.sensor_b) d.motions_b.push_back(to_transform(p));
  return d;
}

inline DatasetFile from_dataset(const EgomotionDataset& d) {
  DatasetFile f;
  f.scale_known = d.scale_known;
  for (const auto& m : d.motions_a) f.sensor_a.push_back(to_record(m));
  for (const auto& m : d.motions_b) f.sensor_b.push_back(to_record(m));
  return f;
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const PoseRecord& p) {
  json j;
  j["q"] = p.q;
  j["t"] = p.t;
  return j;
}

template <std::size_t N>
std::array<double, N> read_array(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != N) {
    throw Error(Stage::io, std::string("expected \"") + key + "\" to be an array of " +
                               std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j.at(key)[i].is_number()) throw Error(Stage::io, std::string("non-numeric entry in ") + key);
    out[i] = j.at(key)[i].template get<double>();
  }
  return out;
}

inline PoseRecord pose_from_json(const json& j) {
  if (!j.is_object()) throw Error(Stage::io, "pose entry must be an object with q and t");
  return {read_array<4>(j, "q"), read_array<3>(j, "t")};
}

inline json to_json(const DatasetFile& f) {
  json j;
  j["schema_version"] = f.schema_version;
  j["sensor_a"] = json::array();
  for (const auto& p : f.sensor_a) j["sensor_a"].push_back(to_json(p));
  j["sensor_b"] = json::array();
  for (const auto& p : f.sensor_b) j["sensor_b"].push_back(to_json(p));
  json meta;
  meta["scale_known"] = f.scale_known;
  if (f.ground_truth) {
    json gt = to_json(f.ground_truth->extrinsic);
    gt["alpha"] = f.ground_truth->alpha;
    meta["ground_truth"] = gt;
  }
  if (f.generator) meta["generator"] = *f.generator;
  j["meta"] = meta;
  return j;
}

inline DatasetFile dataset_from_json(const json& j) {
  try {
    DatasetFile f;
    f.schema_version = j.at("schema_version").get<int>();
    for (const auto& p : j.at("sensor_a")) f.sensor_a.push_back(pose_from_json(p));
    for (const auto& p : j.at("sensor_b")) f.sensor_b.push_back(pose_from_json(p));
    if (j.contains("meta")) {
      const json& meta = j.at("meta");
      f.scale_known = meta.value("scale_known", false);
      if (meta.contains("ground_truth")) {
        const json& gt = meta.at("ground_truth");
        f.ground_truth = GroundTruthRecord{pose_from_json(gt), gt.at("alpha").get<double>()};
      }
      if (meta.contains("generator")) f.generator = meta.at("generator");
    }
    validate(f);
    return f;
  } catch (const json::exception& e) {
    throw Error(Stage::io, std::string("malformed dataset file: ") + e.what());
  }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Stage::io, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Stage::io, "cannot write " + path);
  out << text;
  if (!out) throw Error(Stage::io, "write failed for " + path);
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Stage::io, what + " is not valid JSON: " + e.what());
  }
}

inline DatasetFile read_dataset_file(const std::string& path) {
  return dataset_from_json(parse_json(read_text(path), path));
}

inline void write_dataset_file(const std::string& path, const DatasetFile& f) {
  validate(f);
  write_text(path, dump(to_json(f)));
}

inline json trajectory_to_json(const std::vector<RigidTransform>& poses_a,
                               const RigidTransform& extrinsic) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["poses_a"] = json::array();
  j["poses_b"] = json::array();
  const RigidTransform theta_inv = extrinsic.inverse();
  for (const auto& p : poses_a) {
    j["poses_a"].push_back(to_json(to_record(p)));
    j["poses_b"].push_back(to_json(to_record(p * theta_inv)));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                           const std::string& where) {
  if (!j.is_object()) throw Error(Stage::config, where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw Error(Stage::config, "unknown key \"" + item.key() + "\" in " + where);
  }
}

}  // namespace detail

inline TrajectoryConfig trajectory_from_json(const json& j) {
  detail::reject_unknown(j,
                         {"num_steps", "path", "path_radius", "lissajous_freq_x",
                          "lissajous_freq_y", "lissajous_phase", "step_length",
                          "surface_amplitude", "surface_freq_x", "surface_freq_y",
                          "gt_extrinsic", "gt_scale", "min_rotation", "max_rotation",
                          "enforce_rotation_range"},
                         "trajectory config");
  try {
    TrajectoryConfig c;
    c.num_steps = j.value("num_steps", c.num_steps);
    c.path = parse_path_shape(j.value("path", std::string(to_string(c.path))));
    c.path_radius = j.value("path_radius", c.path_radius);
    c.lissajous_freq_x = j.value("lissajous_freq_x", c.lissajous_freq_x);
    c.lissajous_freq_y = j.value("lissajous_freq_y", c.lissajous_freq_y);
    c.lissajous_phase = j.value("lissajous_phase", c.lissajous_phase);
    c.step_length = j.value("step_length", c.step_length);
    c.surface_amplitude = j.value("surface_amplitude", c.surface_amplitude);
    c.surface_freq_x = j.value("surface_freq_x", c.surface_freq_x);
    c.surface_freq_y = j.value("surface_freq_y", c.surface_freq_y);
    if (j.contains("gt_extrinsic")) c.gt_extrinsic = to_transform(pose_from_json(j.at("gt_extrinsic")));
    c.gt_scale = j.value("gt_scale", c.gt_scale);
    c.min_rotation = j.value("min_rotation", c.min_rotation);
    c.max_rotation = j.value("max_rotation", c.max_rotation);
    c.enforce_rotation_range = j.value("enforce_rotation_range", c.enforce_rotation_range);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(Stage::config, std::string("bad trajectory config: ") + e.what());
  }
}

inline json to_json(const TrajectoryConfig& c) {
  json j;
  j["num_steps"] = c.num_steps;
  j["path"] = to_string(c.path);
  j["path_radius"] = c.path_radius;
  j["lissajous_freq_x"] = c.lissajous_freq_x;
  j["lissajous_freq_y"] = c.lissajous_freq_y;
  j["lissajous_phase"] = c.lissajous_phase;
  j["step_length"] = c.step_length;
  j["surface_amplitude"] = c.surface_amplitude;
  j["surface_freq_x"] = c.surface_freq_x;
  j["surface_freq_y"] = c.surface_freq_y;
  if (c.gt_extrinsic) j["gt_extrinsic"] = to_json(to_record(*c.gt_extrinsic));
  j["gt_scale"] = c.gt_scale;
  j["min_rotation"] = c.min_rotation;
  j["max_rotation"] = c.max_rotation;
  j["enforce_rotation_range"] = c.enforce_rotation_range;
  return j;
}

inline NoiseConfig noise_from_json(const json& j) {
  detail::reject_unknown(j, {"translation_mode", "translation_sigma", "rotation_sigma", "seed"},
                         "noise config");
  try {
    NoiseConfig n;
    const std::string mode = j.value("translation_mode", std::string("relative_percent"));
    if (mode == "relative_percent") {
      n.translation_mode = TranslationNoise::relative_percent;
    } else if (mode == "absolute") {
      n.translation_mode = TranslationNoise::absolute;
    } else {
      throw Error(Stage::config, "unknown translation_mode \"" + mode + "\"");
    }
    n.translation_sigma = j.value("translation_sigma", n.translation_sigma);
    n.rotation_sigma = j.value("rotation_sigma", n.rotation_sigma);
    n.seed = j.value("seed", n.seed);
    n.validate();
    return n;
  } catch (const json::exception& e) {
    throw Error(Stage::config, std::string("bad noise config: ") + e.what());
  }
}

inline json to_json(const NoiseConfig& n) {
  json j;
  j["translation_mode"] =
      n.translation_mode == TranslationNoise::relative_percent ? "relative_percent" : "absolute";
  j["translation_sigma"] = n.translation_sigma;
  j["rotation_sigma"] = n.rotation_sigma;
  j["seed"] = n.seed;
  return j;
}

/// Input of the `gen` subcommand.
struct GenerateConfig {
  TrajectoryConfig trajectory;
  NoiseConfig noise;
  bool scale_known = false;
};

inline GenerateConfig generate_config_from_json(const json& j) {
  detail::reject_unknown(j, {"trajectory", "noise", "scale_known"}, "generator config");
  GenerateConfig g;
  if (j.contains("trajectory")) g.trajectory = trajectory_from_json(j.at("trajectory"));
  if (j.contains("noise")) g.noise = noise_from_json(j.at("noise"));
  if (j.contains("scale_known")) {
    if (!j.at("scale_known").is_boolean()) throw Error(Stage::config, "scale_known must be boolean");
    g.scale_known = j.at("scale_known").get<bool>();
  }
  if (g.scale_known && g.trajectory.gt_scale != 1.0) {
    throw Error(Stage::config, "scale_known requires trajectory.gt_scale = 1");
  }
  return g;
}

inline json to_json(const GenerateConfig& g) {
  json j;
  j["trajectory"] = to_json(g.trajectory);
  j["noise"] = to_json(g.noise);
  j["scale_known"] = g.scale_known;
  return j;
}

// ---------------------------------------------------------------------------
// Results

inline json matrix_to_json(const Mat3& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
  return rows;
}

inline json to_json(const Certificate& c) {
  json j;
  j["certified"] = c.certified;
  j["relative_gap"] = c.relative_gap;
  j["nullspace_dim"] = c.nullspace_dim;
  j["min_singular_value"] = c.min_singular_value;
  j["orthogonality_residual"] = c.orthogonality_residual;
  j["reasons"] = c.reasons;
  return j;
}

inline json to_json(const ExtrinsicEstimate& e) {
  json j;
  j["method"] = to_string(e.method);
  const PoseRecord rec = to_record({e.rotation, e.translation});
  j["rotation"] = {{"q", rec.q}, {"matrix", matrix_to_json(e.rotation.matrix())}};
  j["translation"] = rec.t;
  j["scale"] = e.scale ? json(*e.scale) : json(nullptr);
  j["primal_cost"] = e.primal_cost;
  if (e.dual_objective) j["dual_objective"] = *e.dual_objective;
  if (e.certificate) j["certificate"] = to_json(*e.certificate);
  if (e.solver_stats) {
    j["solver"] = {{"iterations", e.solver_stats->iterations},
                   {"runtime_seconds", e.solver_stats->runtime_seconds},
                   {"termination", e.solver_stats->termination}};
  }
  return j;
}

inline json to_json(const ObservabilityReport& r) {
  json j;
  j["ok"] = r.ok;
  if (r.best_pair) {
    j["best_pair"] = {r.best_pair->first, r.best_pair->second};
  } else {
    j["best_pair"] = nullptr;
  }
  j["axis_angle_between"] = r.axis_angle_between;
  j["span_margin"] = r.span_margin;
  j["messages"] = r.messages;
  return j;
}

}  // namespace certhe::io
