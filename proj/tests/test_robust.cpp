#include "rsrel/robust.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace rsrel;
using namespace rsrel::test;

namespace {

NormalizedPoint pt(double x, double y) {
  NormalizedPoint p;
  p.m = Vec3(x, y, 1.0);
  return p;
}

struct OutlierScene {
  ModelScene m;
  std::vector<Correspondence> corrs;
  std::vector<bool> inlier;
};

OutlierScene with_outliers(AlgorithmKind a, std::uint64_t seed, double fraction) {
  OutlierScene o;
  o.m = make_model_scene(a, seed);
  auto px = observe(o.m.scene);
  o.inlier = add_outliers(px, fraction, o.m.scene.intrinsics, seed);
  o.corrs = to_normalized(px, o.m.scene.intrinsics);
  return o;
}

}  // namespace

TEST(Sampson, HandComputedValue) {
  // E = [x]_x, m1 = (0,0,1), m2 = (0,1,1): residual -1 over sqrt(1 + 1).
  const Mat3 e = skew(Vec3::UnitX());
  EXPECT_NEAR(sampson_error(e, pt(0, 0), pt(0, 1)), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(sampson_residual(e, Vec3(0, 0, 1), Vec3(0, 1, 1)), -1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Sampson, ScaleInvariantAndZeroOnConstraint) {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 50; ++i) {
    const Mat3 e = random_rotation(rng).matrix() * skew(random_unit(rng));
    const NormalizedPoint a = pt(0.1 * i / 50.0, -0.2), b = pt(0.3, 0.05);
    for (double s : {1e-3, 2.0, -7.0})
      EXPECT_NEAR(sampson_error(s * e, a, b), sampson_error(e, a, b), 1e-12);
  }
  const ModelScene m = make_model_scene(AlgorithmKind::Uniform11, 62);
  for (const auto& c : m.corrs) EXPECT_LT(sampson_error(essential_for(m.truth, c, m.readout), c.p1, c.p2), 1e-12);
}

TEST(Sampson, EpipoleScoresInfinity) {
  EXPECT_TRUE(std::isinf(sampson_error(Mat3::Zero(), pt(0, 0), pt(0, 0))));
}

TEST(ScoreModel, ZeroThresholdHasNoInliers) {
  const ModelScene m = make_model_scene(AlgorithmKind::Uniform9, 63);
  const ModelScore s = score_model(m.truth, m.corrs, m.readout, 0.0);
  EXPECT_EQ(s.inliers, 0);
  EXPECT_EQ(s.inlier_mask.size(), m.corrs.size());
}

TEST(ScoreModel, TruthRecallsInliersUnderOutliers) {
  const OutlierScene o = with_outliers(AlgorithmKind::Uniform9, 64, 0.3);
  const ModelScore s = score_model(o.m.truth, o.corrs, o.m.readout, 1.0 / 640.0);
  int true_in = 0, recalled = 0;
  for (std::size_t i = 0; i < o.inlier.size(); ++i) {
    true_in += o.inlier[i];
    recalled += o.inlier[i] && s.inlier_mask[i];
  }
  EXPECT_GE(recalled, 0.95 * true_in);
  int count = 0;
  for (bool b : s.inlier_mask) count += b;
  EXPECT_EQ(count, s.inliers);
  EXPECT_GE(s.total_score, s.inliers);
  EXPECT_LT(s.total_score, s.inliers + 1.0);
}

TEST(RequiredIterations, ClosedForm) {
  EXPECT_NEAR(required_iterations(0.5, 1, 0.99), std::log(0.01) / std::log(0.5), 1e-12);
  EXPECT_NEAR(required_iterations(0.7, 9, 0.999), std::log(0.001) / std::log(1.0 - std::pow(0.7, 9)), 1e-9);
  EXPECT_EQ(required_iterations(1.0, 9, 0.999), 0.0);
  EXPECT_TRUE(std::isinf(required_iterations(0.0, 9, 0.999)));
}

TEST(VerifyCandidates, PicksBestScoring) {
  const ModelScene m = make_model_scene(AlgorithmKind::Uniform9, 65);
  SolverOutput good, bad;
  good.estimate = m.truth;
  bad.estimate = m.truth;
  bad.estimate.translation = Vec3(1, 0, 0);
  const std::vector<SolverOutput> cands = {bad, good};
  const auto v = verify_candidates(cands, m.corrs, m.readout, 1.0 / 640.0);
  EXPECT_EQ(v.output.estimate.translation, m.truth.translation);
  EXPECT_THROW(verify_candidates(std::span<const SolverOutput>{}, m.corrs, m.readout, 1e-3),
               DegenerateConfiguration);
}

TEST(Ransac, RecoversPoseWithOutliers) {
  const OutlierScene o = with_outliers(AlgorithmKind::Uniform9, 66, 0.3);
  RansacConfig cfg;
  cfg.seed = 5;
  const RansacResult r = ransac_estimate(AlgorithmKind::Uniform9, o.corrs, o.m.imu1, o.m.imu2, o.m.readout, cfg);
  ASSERT_TRUE(r.success);
  EXPECT_LT(rad2deg(detail::rotation_angle_between(r.best.estimate.rotation.matrix(), o.m.truth.rotation.matrix())),
            0.1);
  int true_in = 0, recalled = 0;
  for (std::size_t i = 0; i < o.inlier.size(); ++i) {
    true_in += o.inlier[i];
    recalled += o.inlier[i] && r.inlier_mask[i];
  }
  EXPECT_GE(recalled, 0.9 * true_in);
}

TEST(Ransac, DeterministicForFixedSeed) {
  const OutlierScene o = with_outliers(AlgorithmKind::Angular3, 67, 0.3);
  RansacConfig cfg;
  cfg.seed = 11;
  const auto a = ransac_estimate(AlgorithmKind::Angular3, o.corrs, o.m.imu1, o.m.imu2, o.m.readout, cfg);
  const auto b = ransac_estimate(AlgorithmKind::Angular3, o.corrs, o.m.imu1, o.m.imu2, o.m.readout, cfg);
  EXPECT_EQ(a.inlier_mask, b.inlier_mask);
  EXPECT_EQ(a.iterations_run, b.iterations_run);
  EXPECT_EQ(a.best.estimate.rotation.matrix(), b.best.estimate.rotation.matrix());
}

TEST(Ransac, CleanDataStopsEarly) {
  const ModelScene m = make_model_scene(AlgorithmKind::Angular3, 68);
  RansacConfig cfg;
  const auto r = ransac_estimate(AlgorithmKind::Angular3, m.corrs, m.imu1, m.imu2, m.readout, cfg);
  EXPECT_TRUE(r.success);
  EXPECT_LE(r.iterations_run, 3);
  EXPECT_EQ(r.inliers, static_cast<int>(m.corrs.size()));
}

TEST(Ransac, ConfigValidation) {
  RansacConfig c;
  c.threshold = 0.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = RansacConfig{};
  c.confidence = 1.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  EXPECT_NEAR(RansacConfig::from_pixels(2.0, 640.0).threshold, 2.0 / 640.0, 1e-15);
}

TEST(Ransac, TooFewCorrespondences) {
  const ModelScene m = make_model_scene(AlgorithmKind::Uniform9, 69);
  EXPECT_THROW(ransac_estimate(AlgorithmKind::Uniform9, first_n(m.corrs, 8), m.imu1, m.imu2, m.readout, {}),
               InsufficientCorrespondences);
}
