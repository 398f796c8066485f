#include "rsrel/geometry.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace rsrel;
using rsrel::test::random_rotation;
using rsrel::test::random_unit;

namespace {

double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Skew, ZeroAndCanonicalCrossProduct) {
  EXPECT_EQ(max_abs(skew(Vec3::Zero())), 0.0);
  const Vec3 r = skew(Vec3(0, 0, 1)) * Vec3(1, 0, 0);
  EXPECT_EQ(r, Vec3(0, 1, 0));
}

TEST(Skew, AntisymmetricAndMatchesCross) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 v(n(rng), n(rng), n(rng)), u(n(rng), n(rng), n(rng));
    EXPECT_EQ(max_abs(skew(v).transpose() + skew(v)), 0.0);
    EXPECT_LT((skew(v) * u - v.cross(u)).norm(), 1e-12);
  }
}

TEST(RotationYaw, IdentityQuarterTurnAndInverse) {
  EXPECT_LT(max_abs(rotation_yaw(0.0) - Mat3::Identity()), 1e-15);
  Mat3 expected;
  expected << 0, 0, -1, 0, 1, 0, 1, 0, 0;
  EXPECT_LT(max_abs(rotation_yaw(kPi / 2) - expected), 1e-15);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int i = 0; i < 20; ++i) {
    const double psi = u(rng);
    EXPECT_LT(max_abs(rotation_yaw(psi) * rotation_yaw(-psi) - Mat3::Identity()), 1e-14);
  }
}

TEST(RotationTilt, IdentityDeterminantAndFactorProduct) {
  EXPECT_LT(max_abs(rotation_tilt(0, 0) - Mat3::Identity()), 1e-15);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int i = 0; i < 20; ++i) {
    const double phi = u(rng), theta = u(rng);
    const Mat3 r = rotation_tilt(phi, theta);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    // Written out independently of the implementation.
    Mat3 rx, rz;
    rx << 1, 0, 0, 0, std::cos(phi), -std::sin(phi), 0, std::sin(phi), std::cos(phi);
    rz << std::cos(theta), -std::sin(theta), 0, std::sin(theta), std::cos(theta), 0, 0, 0, 1;
    EXPECT_LT(max_abs(r - rx * rz), 1e-14);
    // Eigen's axis-angle agrees with the factor convention.
    const Mat3 ea = (Eigen::AngleAxisd(phi, Vec3::UnitX()) * Eigen::AngleAxisd(theta, Vec3::UnitZ())).toRotationMatrix();
    EXPECT_LT(max_abs(r - ea), 1e-14);
  }
}

TEST(TiltFromGravity, VerticalGivesZero) {
  const Tilt t = tilt_from_gravity(Vec3(0, 9.81, 0));
  EXPECT_EQ(t.phi, 0.0);
  EXPECT_EQ(t.theta, 0.0);
}

TEST(TiltFromGravity, AlignsGravityWithVerticalAxis) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Vec3 g = 9.81 * random_unit(rng);
    const Tilt t = tilt_from_gravity(g);
    EXPECT_LT((rotation_tilt(t.phi, t.theta) * g.normalized() - Vec3::UnitY()).norm(), 1e-10);
  }
}

TEST(TiltFromGravity, RoundTripOnOpenSquare) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-kPi / 2 + 1e-3, kPi / 2 - 1e-3);
  for (int i = 0; i < 200; ++i) {
    const double phi = u(rng), theta = u(rng);
    const Vec3 g = rotation_tilt(phi, theta).transpose() * Vec3::UnitY();
    const Tilt t = tilt_from_gravity(g);
    EXPECT_NEAR(t.phi, phi, 1e-9);
    EXPECT_NEAR(t.theta, theta, 1e-9);
  }
}

TEST(TiltFromGravity, RejectsDegenerateGravity) {
  EXPECT_THROW(tilt_from_gravity(Vec3(1e-7, 0, 0)), DegenerateConfiguration);
  EXPECT_THROW(tilt_from_gravity(Vec3(std::nan(""), 0, 1)), InvalidInput);
}

TEST(ComposeFromGravity, ReproducesRelativeRotationForSomeYaw) {
  // Two random camera orientations; gravity is the world vertical seen in
  // each frame. A 1-D search over yaw must hit the true relative rotation.
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    const Mat3 r1 = random_rotation(rng).matrix(), r2 = random_rotation(rng).matrix();
    const Vec3 up(0, 1, 0);
    const Tilt t1 = tilt_from_gravity(r1 * up), t2 = tilt_from_gravity(r2 * up);
    const Mat3 r = r2 * r1.transpose();
    auto residual = [&](double psi) { return (compose_from_gravity(psi, t1, t2) - r).norm(); };
    double best = 0.0, best_val = 1e9;
    for (int k = 0; k < 3600; ++k) {
      const double psi = -kPi + 2 * kPi * k / 3600.0;
      if (residual(psi) < best_val) best_val = residual(psi), best = psi;
    }
    // golden-section polish
    double a = best - 2 * kPi / 3600, b = best + 2 * kPi / 3600;
    for (int it = 0; it < 200; ++it) {
      const double c = b - 0.618033988749895 * (b - a), d = a + 0.618033988749895 * (b - a);
      if (residual(c) < residual(d)) b = d; else a = c;
    }
    EXPECT_LT(residual(0.5 * (a + b)), 1e-9);
  }
}

TEST(EssentialModels, ZeroVelocityAndFirstRowReduceToGlobalShutter) {
  std::mt19937_64 rng(7);
  const Mat3 r = random_rotation(rng).matrix();
  const Vec3 t = random_unit(rng), w1 = random_unit(rng), w2 = random_unit(rng);
  const Vec3 d1 = random_unit(rng), d2 = random_unit(rng);
  const Mat3 gs = r * skew(t);
  const Vec3 z = Vec3::Zero();
  EXPECT_LT(max_abs(essential_angular(r, t, z, z, 400, 700, 60e-6) - gs), 1e-15);
  EXPECT_LT(max_abs(essential_angular(r, t, w1, w2, 0, 0, 60e-6) - gs), 1e-15);
  EXPECT_LT(max_abs(essential_linear(r, t, z, z, 400, 700, 60e-6) - gs), 1e-15);
  EXPECT_LT(max_abs(essential_uniform(r, t, z, z, z, z, 400, 700, 60e-6) - gs), 1e-15);
  EXPECT_LT(max_abs(essential_uniform(r, t, d1, d2, w1, w2, 0, 0, 60e-6) - gs), 1e-15);
}

TEST(EssentialModels, UniformNestsLinearAndAngular) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> row(0, 1080);
  const Vec3 z = Vec3::Zero();
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = random_rotation(rng).matrix();
    const Vec3 t = random_unit(rng), d1 = 5 * random_unit(rng), d2 = 5 * random_unit(rng);
    const Vec3 w1 = 2 * random_unit(rng), w2 = 2 * random_unit(rng);
    const double v1 = row(rng), v2 = row(rng);
    EXPECT_LT(max_abs(essential_uniform(r, t, d1, d2, z, z, v1, v2, 60e-6) -
                      essential_linear(r, t, d1, d2, v1, v2, 60e-6)), 1e-14);
    EXPECT_LT(max_abs(essential_uniform(r, t, z, z, w1, w2, v1, v2, 60e-6) -
                      essential_angular(r, t, w1, w2, v1, v2, 60e-6)), 1e-14);
  }
}

TEST(EssentialModels, LinearIsAffineInVelocity) {
  std::mt19937_64 rng(9);
  const Mat3 r = random_rotation(rng).matrix();
  const Vec3 t = random_unit(rng), d1 = random_unit(rng), z = Vec3::Zero();
  const Mat3 e0 = essential_linear(r, t, z, z, 500, 520, 60e-6);
  const Mat3 e1 = essential_linear(r, t, d1, z, 500, 520, 60e-6);
  for (double alpha : {-3.0, 0.5, 2.0, 10.0}) {
    const Mat3 ea = essential_linear(r, t, alpha * d1, z, 500, 520, 60e-6);
    EXPECT_LT(max_abs((ea - e0) - alpha * (e1 - e0)), 1e-14);
  }
}

TEST(EssentialModels, ExplicitFormulaOracle) {
  std::mt19937_64 rng(10);
  const Mat3 r = random_rotation(rng).matrix();
  const Vec3 t = random_unit(rng), d1 = random_unit(rng), d2 = random_unit(rng);
  const Vec3 w1 = random_unit(rng), w2 = random_unit(rng);
  const double l = 60e-6, v1 = 321, v2 = 654;
  const Mat3 rr = (Mat3::Identity() + v2 * l * skew(w2)).transpose() * r * (Mat3::Identity() + v1 * l * skew(w1));
  const Vec3 tt = t - v1 * l * d1 + v2 * l * d2;
  EXPECT_LT(max_abs(essential_uniform(r, t, d1, d2, w1, w2, v1, v2, l) - rr * skew(tt)), 1e-15);
}

TEST(QuatLocalUpdate, ZeroStepNormAndComposition) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const Rotation q = random_rotation(rng);
    const Rotation same = quat_local_update(q, Vec3::Zero());
    EXPECT_LT((same.matrix() - q.matrix()).norm(), 1e-15);
    const Vec3 delta = 0.7 * random_unit(rng);
    EXPECT_NEAR(quat_local_update(q, delta).quaternion().norm(), 1.0, 1e-12);
    const Rotation two = quat_local_update(quat_local_update(q, delta / 2), delta / 2);
    const Rotation one = quat_local_update(q, delta);
    EXPECT_LT((two.matrix() - one.matrix()).norm(), 1e-9);
  }
}

TEST(QuatLocalUpdate, MatchesExplicitQuaternionProduct) {
  const Rotation q = Rotation::from_axis_angle(Vec3(0.1, -0.2, 0.3));
  const Vec3 delta(0.05, 0.02, -0.04);
  const double n = delta.norm();
  const Eigen::Quaterniond dq(std::cos(n), std::sin(n) / n * delta.x(), std::sin(n) / n * delta.y(),
                              std::sin(n) / n * delta.z());
  const Eigen::Quaterniond expected = dq * q.quaternion();
  const Eigen::Quaterniond got = quat_local_update(q, delta).quaternion();
  EXPECT_NEAR(std::abs(expected.dot(got)), 1.0, 1e-14);
  // A tiny step goes through the series branch without losing accuracy.
  const Vec3 tiny(1e-8, -2e-8, 3e-9);
  const Rotation small = quat_local_update(q, tiny);
  const Eigen::Quaterniond approx = Eigen::Quaterniond(1.0, tiny.x(), tiny.y(), tiny.z()) * q.quaternion();
  EXPECT_LT((small.matrix() - approx.normalized().toRotationMatrix()).norm(), 1e-13);
}

TEST(RotationType, MatricesAreOrthonormal) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = random_rotation(rng).matrix();
    EXPECT_LT(max_abs(r.transpose() * r - Mat3::Identity()), 1e-10);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-10);
  }
  for (const Mat3& r : {rotation_yaw(0.3), rotation_tilt(0.2, -1.1), compose_from_gravity(1.0, {0.1, 0.2}, {-0.3, 0.4})}) {
    EXPECT_LT(max_abs(r.transpose() * r - Mat3::Identity()), 1e-10);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-10);
  }
}

TEST(NormalizePixel, PrincipalPointUnitOffsetAndRoundTrip) {
  const CameraIntrinsics k;
  const NormalizedPoint c = normalize_pixel(k.principal_point, k);
  EXPECT_EQ(c.m, Vec3(0, 0, 1));
  EXPECT_EQ(c.row, k.principal_point.y());
  const NormalizedPoint p = normalize_pixel(k.principal_point + Vec2(k.focal, 0), k);
  EXPECT_EQ(p.m, Vec3(1, 0, 1));
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1080);
  for (int i = 0; i < 100; ++i) {
    const Vec2 px(u(rng) * 1.7, u(rng));
    EXPECT_LT((denormalize_point(normalize_pixel(px, k), k) - px).norm(), 1e-12);
  }
  EXPECT_THROW(normalize_pixel(Vec2(std::nan(""), 1), k), InvalidInput);
}

TEST(Intrinsics, Validation) {
  CameraIntrinsics k;
  EXPECT_NO_THROW(k.validate());
  k.focal = 0;
  EXPECT_THROW(k.validate(), InvalidInput);
  k = CameraIntrinsics{};
  k.readout_time = -1;
  EXPECT_THROW(k.validate(), InvalidInput);
}

TEST(InertialMeasurement, PlausibleGravity) {
  InertialMeasurement m;
  m.gravity = Vec3(0, 9.81, 0);
  EXPECT_TRUE(m.plausible_gravity());
  m.gravity = Vec3(0, 5, 0);
  EXPECT_FALSE(m.plausible_gravity());
}
