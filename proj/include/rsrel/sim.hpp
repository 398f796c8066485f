#pragma once

// Synthetic two-view rolling-shutter scenes.
//
// The forward model mirrors the epipolar model exactly. Working in the
// row-0 frame of camera 1 (Y = R1 (X - c1)):
//   camera 1, row v1:  x1 ~ Y - v1 l d1
//   camera 2, row v2:  x2 ~ B2^-1 R B1^-T (Y - t - v2 l d2)
// with Bk = I + vk l [wk]x. Substituting into m2^T B2^T R B1 [T]x m1 gives
// zero identically, so noiseless correspondences satisfy the uniform model
// to rounding error. The first camera's angular velocity therefore enters
// through the second projection, which depends on the first row.

#include "rsrel/geometry.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace rsrel {

/// splitmix64 step; used to derive independent seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class MotionType { Forward, Sideways };

struct SceneConfig {
  int n_points = 300;
  double mean_depth = 20.0;
  double baseline = 2.0;
  double max_orientation_deg = 20.0;
  MotionType motion = MotionType::Forward;
  Vec3 d1 = Vec3::Zero();  // m/s, camera-1 frame
  Vec3 d2 = Vec3::Zero();  // m/s, camera-1 frame
  Vec3 w1 = Vec3::Zero();  // rad/s, camera-1 frame
  Vec3 w2 = Vec3::Zero();  // rad/s, camera-2 frame
  CameraIntrinsics intrinsics{};
  std::uint64_t seed = 0;

  void validate() const {
    intrinsics.validate();
    if (n_points <= 0 || !(mean_depth > 0.0) || !(baseline > 0.0))
      throw InvalidInput("scene counts and dimensions must be positive");
    if (!(std::abs(max_orientation_deg) <= 90.0)) throw InvalidInput("orientation range must be <= 90 deg");
  }
};

/// World-to-camera pose at row 0: X_c = R (X - center).
struct CameraPose {
  Rotation rotation;
  Vec3 center = Vec3::Zero();
  Vec3 translation() const { return -(rotation.matrix() * center); }
};

struct SyntheticScene {
  std::vector<Vec3> points;
  CameraPose pose1, pose2;
  Vec3 d1 = Vec3::Zero(), d2 = Vec3::Zero();
  Vec3 w1 = Vec3::Zero(), w2 = Vec3::Zero();
  CameraIntrinsics intrinsics;
  Vec3 gravity_world{0.0, 0.0, 9.81};

  Mat3 relative_rotation() const {
    return pose2.rotation.matrix() * pose1.rotation.matrix().transpose();
  }
  /// Second camera centre in the first camera frame (metric).
  Vec3 relative_translation() const {
    return pose1.rotation.matrix() * (pose2.center - pose1.center);
  }
  /// Ground truth with unit translation; velocities share its scale.
  RelativePoseEstimate ground_truth() const {
    const Vec3 t = relative_translation();
    const double s = t.norm();
    RelativePoseEstimate e;
    e.rotation = Rotation(relative_rotation());
    e.translation = t / s;
    e.d1 = d1 / s;
    e.d2 = d2 / s;
    e.w1 = w1;
    e.w2 = w2;
    return e;
  }
};

/// Maps the world frame (gravity along +z) onto a level camera looking
/// along world -y, whose vertical axis is camera +y.
inline Mat3 world_alignment() {
  Mat3 a;
  a << 1.0, 0.0, 0.0,
       0.0, 0.0, 1.0,
       0.0, -1.0, 0.0;
  return a;
}

/// Row-dependent projection map: x(v) = (I + v l [w]x)^-1 L (X - c - v l d).
/// `linear` is usually a rotation but need not be orthonormal.
struct RowPose {
  Mat3 linear = Mat3::Identity();
  Vec3 center = Vec3::Zero();
};

struct Projection {
  Vec2 pixel;
  double row = 0.0;
  Vec3 camera_point;
  int iterations = 0;
};

namespace detail {
inline Vec3 camera_point_at_row(const Vec3& x, const RowPose& pose, const Vec3& d_world, const Vec3& w,
                                double row, double readout) {
  const Vec3 p = pose.linear * (x - pose.center - row * readout * d_world);
  const Mat3 b = Mat3::Identity() + row * readout * skew(w);
  return b.partialPivLu().solve(p);
}
}  // namespace detail

/// Solves v = row(project(X at row v)) by fixed-point iteration from the
/// global-shutter row. Returns nothing when the point is behind the camera,
/// leaves the image or the iteration does not settle.
inline std::optional<Projection> project_rs(const Vec3& x, const RowPose& pose, const Vec3& d_world,
                                            const Vec3& w, const CameraIntrinsics& k) {
  if (!x.allFinite() || !d_world.allFinite() || !w.allFinite()) return std::nullopt;
  const double f = k.focal, cx = k.principal_point.x(), cy = k.principal_point.y();
  double v = 0.0;
  Vec3 pc = detail::camera_point_at_row(x, pose, d_world, w, 0.0, k.readout_time);
  if (pc.z() <= 0.0) return std::nullopt;
  v = f * pc.y() / pc.z() + cy;
  double step = 0.0;
  int it = 0;
  for (; it < 50; ++it) {
    pc = detail::camera_point_at_row(x, pose, d_world, w, v, k.readout_time);
    if (pc.z() <= 0.0) return std::nullopt;
    const double v_new = f * pc.y() / pc.z() + cy;
    step = std::abs(v_new - v);
    v = v_new;
    if (step < 1e-12 * std::max(1.0, std::abs(v))) break;
  }
  if (!(step < 1e-6)) return std::nullopt;
  // Re-evaluate at the settled row so pixel and row agree.
  pc = detail::camera_point_at_row(x, pose, d_world, w, v, k.readout_time);
  if (pc.z() <= 0.0) return std::nullopt;
  Projection p;
  p.pixel = Vec2(f * pc.x() / pc.z() + cx, v);
  p.row = v;
  p.camera_point = pc;
  p.iterations = it;
  if (!inside_image(p.pixel, k)) return std::nullopt;
  return p;
}

inline SyntheticScene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> angle(-deg2rad(cfg.max_orientation_deg),
                                               deg2rad(cfg.max_orientation_deg));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto random_orientation = [&] {
    const double a = angle(rng), b = angle(rng), c = angle(rng);
    const Mat3 pert = (Eigen::AngleAxisd(a, Vec3::UnitX()) * Eigen::AngleAxisd(b, Vec3::UnitY()) *
                       Eigen::AngleAxisd(c, Vec3::UnitZ()))
                          .toRotationMatrix();
    return Rotation(Mat3(pert * world_alignment()));
  };

  SyntheticScene s;
  s.intrinsics = cfg.intrinsics;
  s.d1 = cfg.d1;
  s.d2 = cfg.d2;
  s.w1 = cfg.w1;
  s.w2 = cfg.w2;
  s.pose1.rotation = random_orientation();
  s.pose2.rotation = random_orientation();
  s.pose1.center = Vec3::Zero();

  const Mat3 r1t = s.pose1.rotation.matrix().transpose();
  Vec3 dir = cfg.motion == MotionType::Forward ? Vec3::UnitZ() : Vec3::UnitX();
  dir += 0.1 * Vec3(normal(rng), normal(rng), normal(rng));
  const double length = cfg.baseline * (0.8 + 0.4 * unit(rng));
  s.pose2.center = s.pose1.center + r1t * dir.normalized() * length;

  const auto& k = cfg.intrinsics;
  const RowPose gs2{s.pose2.rotation.matrix(), s.pose2.center};
  const int max_attempts = 200 * cfg.n_points;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(s.points.size()) < cfg.n_points;
       ++attempt) {
    const Vec2 px(unit(rng) * k.width, unit(rng) * k.height);
    double depth = cfg.mean_depth + 0.25 * cfg.mean_depth * normal(rng);
    depth = std::max(depth, 0.25 * cfg.mean_depth);
    const Vec3 ray((px.x() - k.principal_point.x()) / k.focal, (px.y() - k.principal_point.y()) / k.focal,
                   1.0);
    const Vec3 x = s.pose1.center + r1t * (depth * ray);
    // keep points in the joint (global-shutter) field of view
    const Vec3 p2 = gs2.linear * (x - gs2.center);
    if (p2.z() <= 0.0) continue;
    const Vec2 q(k.focal * p2.x() / p2.z() + k.principal_point.x(),
                 k.focal * p2.y() / p2.z() + k.principal_point.y());
    if (!inside_image(q, k)) continue;
    s.points.push_back(x);
  }
  return s;
}

struct PixelCorrespondence {
  Vec2 p1;
  Vec2 p2;
  int point_index = -1;
};

/// Rolling-shutter observations of every point visible in both frames.
inline std::vector<PixelCorrespondence> observe(const SyntheticScene& s) {
  const auto& k = s.intrinsics;
  const Mat3 r1 = s.pose1.rotation.matrix();
  const Mat3 r = s.relative_rotation();
  const RowPose cam1{r1, s.pose1.center};
  const Vec3 d1w = r1.transpose() * s.d1;
  const Vec3 d2w = r1.transpose() * s.d2;

  std::vector<PixelCorrespondence> out;
  out.reserve(s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto a = project_rs(s.points[i], cam1, d1w, Vec3::Zero(), k);
    if (!a) continue;
    const Mat3 b1 = Mat3::Identity() + a->row * k.readout_time * skew(s.w1);
    const Mat3 lin2 = r * b1.transpose().inverse() * r1;
    const auto b = project_rs(s.points[i], RowPose{lin2, s.pose2.center}, d2w, s.w2, k);
    if (!b) continue;
    out.push_back({a->pixel, b->pixel, static_cast<int>(i)});
  }
  return out;
}

inline std::vector<Correspondence> to_normalized(std::span<const PixelCorrespondence> px,
                                                 const CameraIntrinsics& k) {
  std::vector<Correspondence> out;
  out.reserve(px.size());
  for (const auto& c : px) out.push_back({normalize_pixel(c.p1, k), normalize_pixel(c.p2, k)});
  return out;
}

struct NoiseConfig {
  double pixel_sigma = 0.0;       // pixels
  double gravity_angle_deg = 0.0;  // per axis
  double angvel_angle_deg = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (pixel_sigma < 0.0 || gravity_angle_deg < 0.0 || angvel_angle_deg < 0.0)
      throw InvalidInput("noise levels must be non-negative");
  }
};

/// Camera-to-IMU extrinsic rotation (x_imu = rotation * x_cam) and lever arm.
struct Extrinsics {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();
};

/// Gravity and angular velocity measured in each IMU frame. Gravity noise is
/// a rotation by +-gravity_angle about each axis, applied with opposite signs
/// in the two frames; angular velocity noise tilts the direction by
/// angvel_angle about a random perpendicular axis.
inline std::pair<InertialMeasurement, InertialMeasurement> synth_imu(const SyntheticScene& s,
                                                                     const Extrinsics& ext,
                                                                     const NoiseConfig& noise) {
  noise.validate();
  std::mt19937_64 rng(mix_seed(noise.seed, 0x1A0));
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double ga = deg2rad(noise.gravity_angle_deg);
  const Vec3 gnoise(coin(rng) ? ga : -ga, coin(rng) ? ga : -ga, coin(rng) ? ga : -ga);

  auto tilt_direction = [&](const Vec3& w) -> Vec3 {
    if (noise.angvel_angle_deg == 0.0 || w.norm() == 0.0) return w;
    Vec3 axis = w.cross(Vec3(normal(rng), normal(rng), normal(rng)));
    if (axis.norm() < 1e-12) axis = w.unitOrthogonal();
    axis.normalize();
    return Eigen::AngleAxisd(deg2rad(noise.angvel_angle_deg), axis) * w;
  };

  const Mat3 e = ext.rotation.matrix();
  InertialMeasurement m1, m2;
  m1.gravity = e * (Rotation::from_axis_angle(gnoise).matrix() * (s.pose1.rotation.matrix() * s.gravity_world));
  m2.gravity = e * (Rotation::from_axis_angle(-gnoise).matrix() * (s.pose2.rotation.matrix() * s.gravity_world));
  m1.angular_velocity = e * tilt_direction(s.w1);
  m2.angular_velocity = e * tilt_direction(s.w2);
  return {m1, m2};
}

/// IMU-frame measurement expressed in the camera frame.
inline InertialMeasurement to_camera_frame(const InertialMeasurement& m, const Extrinsics& ext) {
  InertialMeasurement out = m;
  const Mat3 et = ext.rotation.matrix().transpose();
  out.gravity = et * m.gravity;
  out.angular_velocity = et * m.angular_velocity;
  return out;
}

/// Isotropic Gaussian pixel noise on both observations, independently per
/// point and frame.
inline std::vector<PixelCorrespondence> perturb_pixels(std::span<const PixelCorrespondence> px,
                                                       double pixel_sigma, std::uint64_t seed) {
  if (pixel_sigma < 0.0) throw InvalidInput("pixel noise must be non-negative");
  std::mt19937_64 rng(mix_seed(seed, 0x9A1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<PixelCorrespondence> out(px.begin(), px.end());
  if (pixel_sigma == 0.0) return out;
  for (auto& c : out) {
    c.p1 += pixel_sigma * Vec2(normal(rng), normal(rng));
    c.p2 += pixel_sigma * Vec2(normal(rng), normal(rng));
  }
  return out;
}

/// Noisy normalized correspondences; rows follow the noisy pixel row.
inline std::vector<Correspondence> add_pixel_noise(std::span<const PixelCorrespondence> px,
                                                   double pixel_sigma, const CameraIntrinsics& k,
                                                   std::uint64_t seed) {
  return to_normalized(perturb_pixels(px, pixel_sigma, seed), k);
}

/// Replaces the second observation of a random `fraction` of the
/// correspondences with a uniformly drawn pixel. Returns the true-inlier mask.
inline std::vector<bool> add_outliers(std::vector<PixelCorrespondence>& px, double fraction,
                                      const CameraIntrinsics& k, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) throw InvalidInput("outlier fraction must lie in [0, 1]");
  std::mt19937_64 rng(mix_seed(seed, 0x0B7));
  std::vector<int> idx(px.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_out = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(px.size())));
  std::uniform_real_distribution<double> uu(0.0, k.width), uv(0.0, k.height);
  std::vector<bool> inlier(px.size(), true);
  for (std::size_t j = 0; j < n_out; ++j) {
    auto& c = px[idx[j]];
    c.p2 = Vec2(uu(rng), uv(rng));
    inlier[idx[j]] = false;
  }
  return inlier;
}

}  // namespace rsrel
