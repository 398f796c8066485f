#pragma once

// Stacked linear systems A(rotation) x = 0 for the five minimal algorithms.
// The unknown vector is x = [t; d1; d2] (9 entries) for the linear and
// uniform models and x = t for the angular models.

#include "rsrel/geometry.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <variant>

namespace rsrel {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

enum class AlgorithmKind { Linear9, Angular5, Angular3, Uniform11, Uniform9 };

inline constexpr std::array<AlgorithmKind, 5> kAllAlgorithms = {
    AlgorithmKind::Linear9, AlgorithmKind::Angular5, AlgorithmKind::Angular3,
    AlgorithmKind::Uniform11, AlgorithmKind::Uniform9};

constexpr int minimal_points(AlgorithmKind a) {
  switch (a) {
    case AlgorithmKind::Linear9: return 9;
    case AlgorithmKind::Angular5: return 5;
    case AlgorithmKind::Angular3: return 3;
    case AlgorithmKind::Uniform11: return 11;
    case AlgorithmKind::Uniform9: return 9;
  }
  return 0;
}

constexpr int unknown_dim(AlgorithmKind a) {
  return (a == AlgorithmKind::Angular5 || a == AlgorithmKind::Angular3) ? 3 : 9;
}

/// Gravity-aided algorithms optimise only the yaw angle.
constexpr bool uses_gravity(AlgorithmKind a) {
  return a == AlgorithmKind::Linear9 || a == AlgorithmKind::Angular3 || a == AlgorithmKind::Uniform9;
}

constexpr bool uses_angular_velocity(AlgorithmKind a) { return a != AlgorithmKind::Linear9; }

constexpr bool models_linear_velocity(AlgorithmKind a) { return unknown_dim(a) == 9; }

inline std::string_view algorithm_name(AlgorithmKind a) {
  switch (a) {
    case AlgorithmKind::Linear9: return "linear9";
    case AlgorithmKind::Angular5: return "angular5";
    case AlgorithmKind::Angular3: return "angular3";
    case AlgorithmKind::Uniform11: return "uniform11";
    case AlgorithmKind::Uniform9: return "uniform9";
  }
  return "?";
}

inline AlgorithmKind parse_algorithm(std::string_view name) {
  for (auto a : kAllAlgorithms)
    if (algorithm_name(a) == name) return a;
  throw InvalidInput("unknown algorithm '" + std::string(name) + "'");
}

struct YawHypothesis {
  double psi = 0.0;
};
struct FullHypothesis {
  Rotation q;
};
using RotationHypothesis = std::variant<YawHypothesis, FullHypothesis>;

struct CoefficientMatrix {
  MatX entries;
  AlgorithmKind algorithm = AlgorithmKind::Uniform9;
};

/// Full relative rotation implied by a hypothesis. Yaw hypotheses are
/// composed with the roll/pitch measured from both gravity vectors.
inline Mat3 hypothesis_rotation(const RotationHypothesis& hyp, const InertialMeasurement& imu1,
                                const InertialMeasurement& imu2) {
  if (const auto* yaw = std::get_if<YawHypothesis>(&hyp)) {
    if (!imu1.has_gravity || !imu2.has_gravity)
      throw InvalidInput("yaw hypothesis requires gravity in both frames");
    return compose_from_gravity(yaw->psi, tilt_from_gravity(imu1.gravity),
                                tilt_from_gravity(imu2.gravity));
  }
  return std::get<FullHypothesis>(hyp).q.matrix();
}

/// Coefficients r with r.x = m2^T E_r(R, x) m1, obtained by evaluating the
/// epipolar form on the canonical basis of x. Angular velocities are taken
/// from the IMU for the angular and uniform models and ignored otherwise.
inline VecX constraint_coefficients(const Correspondence& c, AlgorithmKind model, const Mat3& r_full,
                                    const InertialMeasurement& imu1, const InertialMeasurement& imu2,
                                    double readout) {
  const int dim = unknown_dim(model);
  const Vec3 w1 = uses_angular_velocity(model) ? imu1.angular_velocity : Vec3::Zero();
  const Vec3 w2 = uses_angular_velocity(model) ? imu2.angular_velocity : Vec3::Zero();
  const Mat3 rr = rolling_rotation(r_full, w1, w2, c.p1.row, c.p2.row, readout);
  const double v1 = c.p1.row, v2 = c.p2.row;
  // m2^T Rr [T]x m1 = (Rr^T m2) . (T x m1); Rr^T m2 is shared by all basis vectors.
  const Vec3 left = rr.transpose() * c.p2.m;

  VecX row(dim);
  for (int k = 0; k < dim; ++k) {
    Vec3 t = Vec3::Zero(), d1 = Vec3::Zero(), d2 = Vec3::Zero();
    if (k < 3)
      t[k] = 1.0;
    else if (k < 6)
      d1[k - 3] = 1.0;
    else
      d2[k - 6] = 1.0;
    row[k] = left.dot(rolling_translation(t, d1, d2, v1, v2, readout).cross(c.p1.m));
  }
  return row;
}

inline void require_minimal(AlgorithmKind algorithm, std::size_t n) {
  const int k = minimal_points(algorithm);
  if (static_cast<int>(n) < k)
    throw InsufficientCorrespondences("insufficient correspondences for " +
                                      std::string(algorithm_name(algorithm)) + ": need " +
                                      std::to_string(k) + ", got " + std::to_string(n));
}

/// Stacks one (l2-normalised) row per correspondence. Rows that vanish to
/// rounding (no parallax) are left as they are.
inline CoefficientMatrix build_matrix(std::span<const Correspondence> corrs,
                                      const RotationHypothesis& hyp, const InertialMeasurement& imu1,
                                      const InertialMeasurement& imu2, double readout,
                                      AlgorithmKind algorithm) {
  require_minimal(algorithm, corrs.size());
  const int n = static_cast<int>(corrs.size());
  if (uses_angular_velocity(algorithm) && (!imu1.has_angular_velocity || !imu2.has_angular_velocity))
    throw InvalidInput("algorithm requires angular velocity in both frames");

  const Mat3 r_full = hypothesis_rotation(hyp, imu1, imu2);
  CoefficientMatrix a{MatX(n, unknown_dim(algorithm)), algorithm};
  for (int i = 0; i < n; ++i) {
    VecX row = constraint_coefficients(corrs[i], algorithm, r_full, imu1, imu2, readout);
    const double norm = row.norm();
    if (norm > 1e-12) row /= norm;
    a.entries.row(i) = row.transpose();
  }
  return a;
}

}  // namespace rsrel
