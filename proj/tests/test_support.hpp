#pragma once

#include <random>

#include "certhe/synth.hpp"

namespace certhe::testing {

/// Noisy instance on the default undulating trajectory with a random extrinsic.
inline SyntheticInstance instance(std::uint64_t seed, double scale = 1.0, double noise_pct = 0.0,
                                  double rot_sigma = 0.0, int num_steps = 51) {
  TrajectoryConfig cfg;
  cfg.num_steps = num_steps;
  cfg.gt_scale = scale;
  NoiseConfig noise;
  noise.translation_sigma = noise_pct;
  noise.rotation_sigma = rot_sigma;
  noise.seed = seed * 7919 + 13;
  return make_instance(cfg, noise, seed);
}

/// T motions that are all the identity.
inline EgomotionDataset identity_dataset(std::size_t n) {
  EgomotionDataset d;
  d.motions_a.assign(n, RigidTransform::identity());
  d.motions_b.assign(n, RigidTransform::identity());
  return d;
}

/// Paired motions consistent with extrinsic (R, t) and scale α for given a-side motions.
inline EgomotionDataset consistent_dataset(const std::vector<RigidTransform>& motions_a,
                                           const RigidTransform& extrinsic, double scale) {
  EgomotionDataset d;
  for (const auto& a : motions_a) {
    // T_b = Θ T_a Θ⁻¹, with the translation divided by α.
    RigidTransform b = extrinsic * a * extrinsic.inverse();
    b.translation /= scale;
    d.motions_a.push_back(a);
    d.motions_b.push_back(b);
  }
  return d;
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return {x, y, z};
}

}  // namespace certhe::testing
