#include <gtest/gtest.h>

#include "certhe/baseline.hpp"
#include "test_support.hpp"

using namespace certhe;
using certhe::testing::identity_dataset;
using certhe::testing::instance;

TEST(Linear, NoiseFreeRecoversGroundTruth) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = instance(seed, 0.4 + 0.5 * static_cast<double>(seed));
    const ExtrinsicEstimate est = calibrate_linear(inst.clean);
    EXPECT_EQ(est.method, Method::linear);
    EXPECT_FALSE(est.certificate.has_value());
    EXPECT_LE(rotation_geodesic_error(est.rotation, inst.extrinsic.rotation), 1e-6);
    EXPECT_LE((est.translation - inst.extrinsic.translation).norm(), 1e-6);
    EXPECT_NEAR(*est.scale, inst.scale, 1e-6);
  }
}

TEST(Linear, NeverBeatsCertifiedSdp) {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto inst = instance(seed, 1.5, 5.0, 0.05);
    const ExtrinsicEstimate sdp = calibrate(inst.noisy, ConstraintConfig::row_only());
    const ExtrinsicEstimate lin = calibrate_linear(inst.noisy);
    EXPECT_TRUE(is_rotation(lin.rotation.matrix()));
    if (!sdp.certified()) continue;
    ++compared;
    EXPECT_GE(lin.primal_cost, sdp.primal_cost - 1e-9) << seed;
  }
  EXPECT_GT(compared, 90);
}

TEST(Linear, AgreesWithSdpOnNoiseFreeData) {
  const auto inst = instance(3, 1.0);
  const ExtrinsicEstimate sdp = calibrate(inst.clean, ConstraintConfig::row_only());
  const ExtrinsicEstimate lin = calibrate_linear(inst.clean);
  EXPECT_LE(rotation_geodesic_error(sdp.rotation, lin.rotation), 1e-6);
}

TEST(Linear, KnownScale) {
  auto inst = instance(4, 1.0);
  inst.clean.scale_known = true;
  const ExtrinsicEstimate est = calibrate_linear(inst.clean);
  EXPECT_FALSE(est.scale.has_value());
  EXPECT_LE(rotation_geodesic_error(est.rotation, inst.extrinsic.rotation), 1e-6);
  EXPECT_LE((est.translation - inst.extrinsic.translation).norm(), 1e-6);
}

TEST(Linear, IdentityDatasetIsAmbiguous) {
  try {
    calibrate_linear(identity_dataset(5));
    FAIL() << "expected ambiguity";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ambiguous"), std::string::npos);
  }
}

TEST(Linear, PrefersPositiveScale) {
  const auto inst = instance(5, 0.7, 1.0, 0.01);
  const ExtrinsicEstimate est = calibrate_linear(inst.noisy);
  EXPECT_GT(*est.scale, 0.0);
  EXPECT_LE(rotation_geodesic_error(est.rotation, inst.extrinsic.rotation), 0.1);
}
