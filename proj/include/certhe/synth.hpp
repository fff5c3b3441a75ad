#pragma once

// Synthetic ground truth: a platform driving over an undulating height field
// z = A·sin(ω_x x)·sin(ω_y y) along a planar curve, sampled at constant arc
// length. Frame a has its x-axis along the direction of travel and its z-axis
// along the surface normal; frame b is attached through the extrinsic Θ.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "certhe/errors.hpp"
#include "certhe/geometry.hpp"
#include "certhe/problem.hpp"

namespace certhe {

enum class PathShape { line, circle, lissajous };

inline const char* to_string(PathShape p) {
  switch (p) {
    case PathShape::line: return "line";
    case PathShape::circle: return "circle";
    case PathShape::lissajous: return "lissajous";
  }
  return "unknown";
}

inline PathShape parse_path_shape(const std::string& s) {
  if (s == "line") return PathShape::line;
  if (s == "circle") return PathShape::circle;
  if (s == "lissajous") return PathShape::lissajous;
  throw Error(Stage::config, "unknown path shape \"" + s + "\"");
}

struct TrajectoryConfig {
  int num_steps = 51;  // poses; the dataset has num_steps − 1 motions
  PathShape path = PathShape::circle;
  double path_radius = 5.0;  // circle radius, or lissajous amplitude
  double lissajous_freq_x = 1.0;
  double lissajous_freq_y = 2.0;
  double lissajous_phase = std::numbers::pi / 2.0;
  double step_length = 0.4;  // arc length between consecutive poses
  double surface_amplitude = 0.5;
  double surface_freq_x = 1.2;
  double surface_freq_y = 0.96;
  /// Pinned ground-truth extrinsic Θ = T_ba; random per seed when absent.
  std::optional<RigidTransform> gt_extrinsic;
  double gt_scale = 1.0;
  /// Expected per-step relative rotation magnitudes (rad). Checked only when
  /// enforce_rotation_range is set.
  double min_rotation = 0.05;
  double max_rotation = 0.3;
  bool enforce_rotation_range = false;

  void validate() const {
    if (num_steps < 3) throw Error(Stage::config, "num_steps must be at least 3");
    if (!(gt_scale > 0.0)) throw Error(Stage::config, "gt_scale must be positive");
    if (!(step_length > 0.0)) throw Error(Stage::config, "step_length must be positive");
    if (path != PathShape::line && !(path_radius > 0.0)) {
      throw Error(Stage::config, "path_radius must be positive");
    }
  }
};

enum class TranslationNoise { relative_percent, absolute };

struct NoiseConfig {
  TranslationNoise translation_mode = TranslationNoise::relative_percent;
  double translation_sigma = 0.0;  // percent of ‖t‖, or length units
  double rotation_sigma = 0.0;     // rad, per axis
  std::uint64_t seed = 0;

  void validate() const {
    if (translation_sigma < 0.0 || rotation_sigma < 0.0) {
      throw Error(Stage::config, "noise sigmas must be non-negative");
    }
  }
};

namespace detail {

struct PlanarPoint {
  Eigen::Vector2d p;
  Eigen::Vector2d dp;  // derivative w.r.t. the curve parameter
};

inline PlanarPoint planar_curve(const TrajectoryConfig& cfg, double u) {
  switch (cfg.path) {
    case PathShape::line:
      return {{u, 0.3 * u}, {1.0, 0.3}};
    case PathShape::circle:
      return {{cfg.path_radius * std::cos(u), cfg.path_radius * std::sin(u)},
              {-cfg.path_radius * std::sin(u), cfg.path_radius * std::cos(u)}};
    case PathShape::lissajous: {
      const double ax = cfg.lissajous_freq_x;
      const double ay = cfg.lissajous_freq_y;
      const double ph = cfg.lissajous_phase;
      return {{cfg.path_radius * std::sin(ax * u + ph), cfg.path_radius * std::sin(ay * u)},
              {cfg.path_radius * ax * std::cos(ax * u + ph),
               cfg.path_radius * ay * std::cos(ay * u)}};
    }
  }
  return {};
}

struct Height {
  double h;
  double hx;
  double hy;
};

inline Height surface(const TrajectoryConfig& cfg, double x, double y) {
  const double a = cfg.surface_amplitude;
  const double wx = cfg.surface_freq_x;
  const double wy = cfg.surface_freq_y;
  return {a * std::sin(wx * x) * std::sin(wy * y), a * wx * std::cos(wx * x) * std::sin(wy * y),
          a * wy * std::sin(wx * x) * std::cos(wy * y)};
}

inline double space_speed(const TrajectoryConfig& cfg, double u) {
  const PlanarPoint c = planar_curve(cfg, u);
  const Height s = surface(cfg, c.p.x(), c.p.y());
  const double dz = s.hx * c.dp.x() + s.hy * c.dp.y();
  return std::sqrt(c.dp.squaredNorm() + dz * dz);
}

/// Curve parameters at arc lengths 0, ds, 2ds, ... along the 3D path
/// (RK4 on du/ds = 1/|dp/du|).
inline std::vector<double> arc_length_parameters(const TrajectoryConfig& cfg) {
  std::vector<double> us(static_cast<std::size_t>(cfg.num_steps));
  constexpr int kSubsteps = 64;
  const double h = cfg.step_length / kSubsteps;
  double u = 0.0;
  for (int i = 0; i < cfg.num_steps; ++i) {
    us[static_cast<std::size_t>(i)] = u;
    for (int k = 0; k < kSubsteps; ++k) {
      auto f = [&](double uu) {
        const double v = space_speed(cfg, uu);
        if (v < 1e-12) throw Error(Stage::config, "trajectory has a stationary point");
        return 1.0 / v;
      };
      const double k1 = f(u);
      const double k2 = f(u + 0.5 * h * k1);
      const double k3 = f(u + 0.5 * h * k2);
      const double k4 = f(u + h * k3);
      u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return us;
}

}  // namespace detail

/// Absolute poses T_{w a_t}.
inline std::vector<RigidTransform> generate_trajectory(const TrajectoryConfig& cfg) {
  cfg.validate();
  const std::vector<double> us = detail::arc_length_parameters(cfg);
  std::vector<RigidTransform> poses;
  poses.reserve(us.size());
  for (double u : us) {
    const detail::PlanarPoint c = detail::planar_curve(cfg, u);
    const detail::Height s = detail::surface(cfg, c.p.x(), c.p.y());
    const Vec3 position(c.p.x(), c.p.y(), s.h);
    const Vec3 tangent(c.dp.x(), c.dp.y(), s.hx * c.dp.x() + s.hy * c.dp.y());
    const Vec3 normal = Vec3(-s.hx, -s.hy, 1.0).normalized();
    if (tangent.norm() < 1e-12 || tangent.normalized().cross(normal).norm() < 1e-9) {
      throw Error(Stage::config, "degenerate frame: tangent parallel to surface normal");
    }
    const Vec3 z = normal;
    const Vec3 y = z.cross(tangent).normalized();
    const Vec3 x = y.cross(z);
    Mat3 r;
    r << x, y, z;
    poses.push_back({nearest_rotation(r), position});
  }
  if (cfg.enforce_rotation_range) {
    for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
      const double ang = rotation_geodesic_error(poses[i].rotation, poses[i + 1].rotation);
      if (ang < cfg.min_rotation || ang > cfg.max_rotation) {
        throw Error(Stage::config, "relative rotation " + std::to_string(ang) +
                                       " rad at step " + std::to_string(i) +
                                       " is outside the configured range");
      }
    }
  }
  return poses;
}

/// Relative rotation angles between consecutive poses.
inline std::vector<double> relative_rotation_angles(const std::vector<RigidTransform>& poses) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    out.push_back(rotation_geodesic_error(poses[i].rotation, poses[i + 1].rotation));
  }
  return out;
}

/// Noise-free egomotion of both sensors. The camera (b) translations are
/// divided by α so that α·t_b is metric, i.e. the returned dataset has zero
/// cost at (R_Θ, t_Θ, α).
inline EgomotionDataset derive_egomotion(const std::vector<RigidTransform>& poses_a,
                                         const RigidTransform& extrinsic, double scale) {
  if (!(scale > 0.0)) throw Error(Stage::config, "scale must be positive");
  if (poses_a.size() < 2) throw Error(Stage::config, "need at least two poses");
  const RigidTransform theta_inv = extrinsic.inverse();
  EgomotionDataset data;
  for (std::size_t i = 0; i + 1 < poses_a.size(); ++i) {
    const RigidTransform rel_a = poses_a[i].inverse() * poses_a[i + 1];
    const RigidTransform wb0 = poses_a[i] * theta_inv;
    const RigidTransform wb1 = poses_a[i + 1] * theta_inv;
    RigidTransform rel_b = wb0.inverse() * wb1;
    rel_b.translation /= scale;
    data.motions_a.push_back(rel_a);
    data.motions_b.push_back(rel_b);
  }
  return data;
}

/// Gaussian translation offsets and left-perturbed rotations exp(φ)·R,
/// φ ~ N(0, σ_R² I), applied independently to every motion of both sensors.
inline EgomotionDataset add_noise(const EgomotionDataset& data, const NoiseConfig& noise) {
  noise.validate();
  EgomotionDataset out = data;
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw3 = [&]() {
    const double x = normal(rng);
    const double y = normal(rng);
    const double z = normal(rng);
    return Vec3(x, y, z);
  };
  auto perturb = [&](RigidTransform& m) {
    const double sigma_t = noise.translation_mode == TranslationNoise::relative_percent
                               ? 0.01 * noise.translation_sigma * m.translation.norm()
                               : noise.translation_sigma;
    const Vec3 dt = draw3();
    const Vec3 phi = draw3();
    if (sigma_t > 0.0) m.translation += sigma_t * dt;
    if (noise.rotation_sigma > 0.0) {
      m.rotation = exp_so3(noise.rotation_sigma * phi) * m.rotation;
    }
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    perturb(out.motions_a[i]);
    perturb(out.motions_b[i]);
  }
  return out;
}

/// Random Θ: uniform rotation and translation in the unit box [−1, 1]³.
template <class Rng>
RigidTransform random_extrinsic(Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  RigidTransform t;
  t.rotation = random_rotation(rng);
  const double x = unit(rng);
  const double y = unit(rng);
  const double z = unit(rng);
  t.translation = Vec3(x, y, z);
  return t;
}

struct SyntheticInstance {
  std::vector<RigidTransform> poses_a;
  RigidTransform extrinsic;
  double scale = 1.0;
  EgomotionDataset clean;
  EgomotionDataset noisy;
};

/// Trajectory + egomotion + noise with one seed. The extrinsic is drawn from
/// `seed` unless pinned in the configuration; noise uses noise.seed.
inline SyntheticInstance make_instance(const TrajectoryConfig& cfg, const NoiseConfig& noise,
                                       std::uint64_t seed) {
  SyntheticInstance inst;
  inst.poses_a = generate_trajectory(cfg);
  if (cfg.gt_extrinsic) {
    inst.extrinsic = *cfg.gt_extrinsic;
  } else {
    std::mt19937_64 rng(seed);
    inst.extrinsic = random_extrinsic(rng);
  }
  inst.scale = cfg.gt_scale;
  inst.clean = derive_egomotion(inst.poses_a, inst.extrinsic, inst.scale);
  inst.noisy = add_noise(inst.clean, noise);
  return inst;
}

}  // namespace certhe
