#include <gtest/gtest.h>

#include "certhe/io.hpp"
#include "test_support.hpp"

using namespace certhe;
using namespace certhe::io;

namespace {

DatasetFile sample_file(std::uint64_t seed = 1) {
  const auto inst = certhe::testing::instance(seed, 1.7, 2.0, 0.02, 11);
  DatasetFile f = from_dataset(inst.noisy);
  f.ground_truth = GroundTruthRecord{to_record(inst.extrinsic), inst.scale};
  f.generator = json{{"seed", seed}};
  return f;
}

}  // namespace

TEST(Dataset, RoundTripIsByteIdentical) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::string first = dump(to_json(sample_file(seed)));
    const std::string second = dump(to_json(dataset_from_json(parse_json(first, "first"))));
    const std::string third = dump(to_json(dataset_from_json(parse_json(second, "second"))));
    EXPECT_EQ(first, second);
    EXPECT_EQ(second, third);
  }
}

TEST(Dataset, CanonicalKeyOrder) {
  const std::string text = dump(to_json(sample_file()));
  const auto pos = [&](const char* k) { return text.find(k); };
  EXPECT_LT(pos("\"schema_version\""), pos("\"sensor_a\""));
  EXPECT_LT(pos("\"sensor_a\""), pos("\"sensor_b\""));
  EXPECT_LT(pos("\"sensor_b\""), pos("\"meta\""));
  EXPECT_LT(pos("\"scale_known\""), pos("\"ground_truth\""));
}

TEST(Dataset, QuaternionsAreCanonicalAndMotionsExact) {
  const auto inst = certhe::testing::instance(2, 1.0, 1.0, 0.1, 11);
  const DatasetFile f = from_dataset(inst.noisy);
  const EgomotionDataset back = to_dataset(f);
  for (std::size_t i = 0; i < f.sensor_a.size(); ++i) {
    EXPECT_GE(f.sensor_a[i].q[0], 0.0);
    EXPECT_LE((back.motions_a[i].rotation.matrix() - inst.noisy.motions_a[i].rotation.matrix())
                  .norm(),
              1e-14);
    EXPECT_EQ(back.motions_b[i].translation, inst.noisy.motions_b[i].translation);
  }
}

TEST(Dataset, RejectsNonUnitQuaternion) {
  json j = to_json(sample_file());
  j["sensor_a"][0]["q"][0] = 2.0;
  EXPECT_THROW(dataset_from_json(j), Error);
}

TEST(Dataset, RejectsLengthMismatch) {
  json j = to_json(sample_file());
  j["sensor_b"].erase(0);
  EXPECT_THROW(dataset_from_json(j), Error);
}

TEST(Dataset, RejectsMalformedEntries) {
  json j = to_json(sample_file());
  j["sensor_a"][0]["t"] = {1.0, 2.0};
  EXPECT_THROW(dataset_from_json(j), Error);
  json k = to_json(sample_file());
  k["schema_version"] = 99;
  EXPECT_THROW(dataset_from_json(k), Error);
  EXPECT_THROW(parse_json("{not json", "x"), Error);
  EXPECT_THROW(dataset_from_json(json::object()), Error);
}

TEST(Config, TrajectoryRoundTripAndUnknownKeys) {
  TrajectoryConfig c;
  c.num_steps = 31;
  c.path = PathShape::lissajous;
  c.gt_extrinsic = RigidTransform{exp_so3(Vec3(0.1, 0.2, 0.3)), Vec3(1, 2, 3)};
  const TrajectoryConfig back = trajectory_from_json(to_json(c));
  EXPECT_EQ(back.num_steps, 31);
  EXPECT_EQ(back.path, PathShape::lissajous);
  ASSERT_TRUE(back.gt_extrinsic.has_value());
  EXPECT_LE((back.gt_extrinsic->rotation.matrix() - c.gt_extrinsic->rotation.matrix()).norm(),
            1e-14);
  EXPECT_THROW(trajectory_from_json(json{{"num_step", 3}}), Error);
  EXPECT_THROW(trajectory_from_json(json{{"num_steps", 2}}), Error);
  EXPECT_THROW(trajectory_from_json(json{{"num_steps", "many"}}), Error);
}

TEST(Config, NoiseAndGenerator) {
  const NoiseConfig n = noise_from_json(json{{"translation_sigma", 3.0}, {"rotation_sigma", 0.1}});
  EXPECT_EQ(n.translation_mode, TranslationNoise::relative_percent);
  EXPECT_EQ(n.translation_sigma, 3.0);
  EXPECT_THROW(noise_from_json(json{{"translation_mode", "bogus"}}), Error);
  EXPECT_THROW(noise_from_json(json{{"rotation_sigma", -1.0}}), Error);
  const GenerateConfig g = generate_config_from_json(json::object());
  EXPECT_FALSE(g.scale_known);
  EXPECT_THROW(generate_config_from_json(
                   json{{"scale_known", true}, {"trajectory", {{"gt_scale", 2.0}}}}),
               Error);
}

TEST(Results, EstimateJsonFields) {
  const auto inst = certhe::testing::instance(3, 1.0);
  const ExtrinsicEstimate est = calibrate(inst.clean, ConstraintConfig::row_only());
  const json j = to_json(est);
  EXPECT_EQ(j.at("method"), "dual_sdp");
  EXPECT_TRUE(j.at("certificate").at("certified").get<bool>());
  EXPECT_EQ(j.at("rotation").at("q").size(), 4u);
  EXPECT_TRUE(j.contains("solver"));
  const json r = to_json(observability_check(inst.clean, inst.extrinsic.rotation));
  EXPECT_TRUE(r.at("ok").get<bool>());
}
