#pragma once

// Geometric primitives and the rolling-shutter essential matrix models.
//
// Conventions used throughout the library:
//  * Normalized image points are homogeneous 3-vectors with unit last entry.
//  * Image rows are measured in pixels from the top row; row v is exposed
//    v * readout seconds after row 0.
//  * The relative pose (R, t) maps frame-1 coordinates into frame 2 as
//    X2 = R (X1 - t), i.e. t is the second camera centre seen from the first
//    camera, giving the essential matrix E = R [t]x.
//  * The vertical axis is the camera y axis (image down). A camera that is
//    level with the ground measures gravity along +y.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rsrel {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Raised when a configuration makes an estimate impossible (zero gravity,
/// pure rotation, collapsed nullspace, ...).
class DegenerateConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on malformed inputs to an operation.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fewer correspondences than the algorithm's minimal sample.
class InsufficientCorrespondences : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

/// Unit quaternion rotation. The norm is re-established on construction.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {}
  /// From a rotation matrix; the matrix is assumed orthonormal.
  explicit Rotation(const Mat3& r) : q_(Eigen::Quaterniond(r).normalized()) {}

  static Rotation identity() { return Rotation(); }
  static Rotation from_axis_angle(const Vec3& axis_angle) {
    const double angle = axis_angle.norm();
    if (angle == 0.0) return Rotation();
    return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis_angle / angle)));
  }

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Rotation inverse() const { return Rotation(q_.conjugate()); }

  friend Rotation operator*(const Rotation& a, const Rotation& b) {
    return Rotation(a.q_ * b.q_);
  }

 private:
  Eigen::Quaterniond q_;
};

struct CameraIntrinsics {
  double focal = 640.0;
  Vec2 principal_point{960.0, 540.0};
  int width = 1920;
  int height = 1080;
  double readout_time = 60e-6;  // seconds per row

  void validate() const {
    if (!(focal > 0.0) || !std::isfinite(focal)) throw InvalidInput("focal length must be positive");
    if (!(readout_time >= 0.0)) throw InvalidInput("readout time must be non-negative");
    if (width <= 0 || height <= 0) throw InvalidInput("image size must be positive");
    if (!principal_point.allFinite()) throw InvalidInput("principal point must be finite");
  }
};

struct NormalizedPoint {
  Vec3 m{0.0, 0.0, 1.0};
  double row = 0.0;
};

struct Correspondence {
  NormalizedPoint p1;
  NormalizedPoint p2;
};

struct InertialMeasurement {
  Vec3 gravity = Vec3::Zero();           // m/s^2, camera frame
  Vec3 angular_velocity = Vec3::Zero();  // rad/s, camera frame
  bool has_gravity = true;
  bool has_angular_velocity = true;

  /// Gravity magnitude within 20% of standard gravity.
  bool plausible_gravity() const {
    const double n = gravity.norm();
    return gravity.allFinite() && std::abs(n - 9.81) <= 0.2 * 9.81;
  }
};

/// Solver unknowns: relative rotation, unit translation and per-frame
/// velocities. d1, d2 share the (unknown) global scale of the translation.
struct RelativePoseEstimate {
  Rotation rotation;
  Vec3 translation{0.0, 0.0, 1.0};
  Vec3 d1 = Vec3::Zero();
  Vec3 d2 = Vec3::Zero();
  Vec3 w1 = Vec3::Zero();
  Vec3 w2 = Vec3::Zero();
};

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

/// Rotation about the vertical (middle) axis.
inline Mat3 rotation_yaw(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat3 r;
  r << c, 0.0, -s,
       0.0, 1.0, 0.0,
       s, 0.0, c;
  return r;
}

/// Roll/pitch part: rotation about the first axis by phi times rotation
/// about the third axis by theta.
inline Mat3 rotation_tilt(double phi, double theta) {
  const double cp = std::cos(phi), sp = std::sin(phi);
  const double ct = std::cos(theta), st = std::sin(theta);
  Mat3 rx, rz;
  rx << 1.0, 0.0, 0.0,
        0.0, cp, -sp,
        0.0, sp, cp;
  rz << ct, -st, 0.0,
        st, ct, 0.0,
        0.0, 0.0, 1.0;
  return rx * rz;
}

struct Tilt {
  double phi = 0.0;
  double theta = 0.0;
};

/// Roll/pitch such that rotation_tilt(phi, theta) maps the gravity direction
/// onto +y. phi lies in [-pi/2, pi/2], theta in (-pi, pi].
inline Tilt tilt_from_gravity(const Vec3& g) {
  if (!g.allFinite()) throw InvalidInput("gravity must be finite");
  const double n = g.norm();
  if (n < 1e-6) throw DegenerateConfiguration("gravity vector has (near) zero norm");
  const Vec3 u = g / n;
  Tilt tilt;
  tilt.theta = std::atan2(u.x(), u.y());
  tilt.phi = std::atan2(-u.z(), std::hypot(u.x(), u.y()));
  return tilt;
}

/// R(phi2, theta2)^T R(psi) R(phi1, theta1).
inline Mat3 compose_from_gravity(double psi, const Tilt& tilt1, const Tilt& tilt2) {
  return rotation_tilt(tilt2.phi, tilt2.theta).transpose() * rotation_yaw(psi) *
         rotation_tilt(tilt1.phi, tilt1.theta);
}

/// (I + v2 l [w2]x)^T R (I + v1 l [w1]x): the row-dependent rotation factor.
inline Mat3 rolling_rotation(const Mat3& r, const Vec3& w1, const Vec3& w2, double v1, double v2,
                             double readout) {
  const Mat3 b1 = Mat3::Identity() + v1 * readout * skew(w1);
  const Mat3 b2 = Mat3::Identity() + v2 * readout * skew(w2);
  return b2.transpose() * r * b1;
}

/// t - v1 l d1 + v2 l d2.
inline Vec3 rolling_translation(const Vec3& t, const Vec3& d1, const Vec3& d2, double v1, double v2,
                                double readout) {
  return t - v1 * readout * d1 + v2 * readout * d2;
}

inline Mat3 essential_angular(const Mat3& r, const Vec3& t, const Vec3& w1, const Vec3& w2, double v1,
                              double v2, double readout) {
  return rolling_rotation(r, w1, w2, v1, v2, readout) * skew(t);
}

inline Mat3 essential_linear(const Mat3& r, const Vec3& t, const Vec3& d1, const Vec3& d2, double v1,
                             double v2, double readout) {
  return r * skew(rolling_translation(t, d1, d2, v1, v2, readout));
}

inline Mat3 essential_uniform(const Mat3& r, const Vec3& t, const Vec3& d1, const Vec3& d2,
                              const Vec3& w1, const Vec3& w2, double v1, double v2, double readout) {
  return rolling_rotation(r, w1, w2, v1, v2, readout) *
         skew(rolling_translation(t, d1, d2, v1, v2, readout));
}

/// Per-correspondence essential matrix for a full estimate.
inline Mat3 essential_for(const RelativePoseEstimate& est, const Correspondence& c, double readout) {
  return essential_uniform(est.rotation.matrix(), est.translation, est.d1, est.d2, est.w1, est.w2,
                           c.p1.row, c.p2.row, readout);
}

/// [cos|d|, sin|d|/|d| d] * q.
inline Rotation quat_local_update(const Rotation& q, const Vec3& delta) {
  const double n = delta.norm();
  // sin(x)/x by its series close to zero
  const double sinc = n < 1e-6 ? 1.0 - n * n / 6.0 : std::sin(n) / n;
  const Vec3 v = sinc * delta;
  const Eigen::Quaterniond dq(std::cos(n), v.x(), v.y(), v.z());
  return Rotation(dq * q.quaternion());
}

/// Pixel to normalized coordinates; the row is the pixel's y coordinate.
inline NormalizedPoint normalize_pixel(const Vec2& px, const CameraIntrinsics& k) {
  if (!px.allFinite()) throw InvalidInput("pixel coordinates must be finite");
  NormalizedPoint p;
  p.m = Vec3((px.x() - k.principal_point.x()) / k.focal, (px.y() - k.principal_point.y()) / k.focal,
             1.0);
  p.row = px.y();
  return p;
}

inline Vec2 denormalize_point(const NormalizedPoint& p, const CameraIntrinsics& k) {
  return Vec2(p.m.x() / p.m.z() * k.focal + k.principal_point.x(),
              p.m.y() / p.m.z() * k.focal + k.principal_point.y());
}

inline bool inside_image(const Vec2& px, const CameraIntrinsics& k) {
  return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < k.width && px.y() < k.height;
}

}  // namespace rsrel
