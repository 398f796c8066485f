#pragma once

// Alternating refinement of (q, [t; d1; d2]) on inliers. The energy is the
// sum of squared Sampson distances plus
//   lambda_t (|t| - 1)^2 + lambda_d1 |d1|^2 + lambda_d2 |d2|^2.
// Angular velocities are measurements and stay fixed.

#include "rsrel/robust.hpp"

#include <iostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace rsrel {

struct RefineConfig {
  double lambda_t = 1.0;
  double lambda_d1 = 1e-3;
  double lambda_d2 = 1e-3;
  int max_outer_iterations = 20;
  double outer_tol = 1e-8;
  SolverConfig inner{};

  void validate() const {
    if (lambda_t < 0.0 || lambda_d1 < 0.0 || lambda_d2 < 0.0)
      throw InvalidInput("regularisation weights must be non-negative");
    if (max_outer_iterations <= 0) throw InvalidInput("max_outer_iterations must be positive");
  }
};

namespace detail {

inline VecX energy_residuals(const Rotation& q, const VecX& x, const RelativePoseEstimate& fixed,
                             std::span<const Correspondence> inliers, double readout,
                             const RefineConfig& cfg) {
  const int n = static_cast<int>(inliers.size());
  VecX r(n + 7);
  const Mat3 rot = q.matrix();
  const Vec3 t = x.head<3>(), d1 = x.segment<3>(3), d2 = x.segment<3>(6);
  for (int i = 0; i < n; ++i) {
    const auto& c = inliers[i];
    const Mat3 e = essential_uniform(rot, t, d1, d2, fixed.w1, fixed.w2, c.p1.row, c.p2.row, readout);
    r[i] = sampson_residual(e, c.p1.m, c.p2.m);
  }
  r[n] = std::sqrt(cfg.lambda_t) * (t.norm() - 1.0);
  r.segment<3>(n + 1) = std::sqrt(cfg.lambda_d1) * d1;
  r.segment<3>(n + 4) = std::sqrt(cfg.lambda_d2) * d2;
  return r;
}

inline VecX pack(const RelativePoseEstimate& e) {
  VecX x(9);
  x << e.translation, e.d1, e.d2;
  return x;
}

inline RelativePoseEstimate unpack(const RelativePoseEstimate& base, const Rotation& q, const VecX& x) {
  RelativePoseEstimate e = base;
  e.rotation = q;
  e.translation = x.head<3>();
  e.d1 = x.segment<3>(3);
  e.d2 = x.segment<3>(6);
  return e;
}

}  // namespace detail

inline double energy(const RelativePoseEstimate& est, std::span<const Correspondence> inliers,
                     double readout, const RefineConfig& cfg) {
  if (inliers.empty()) throw InvalidInput("energy needs at least one inlier");
  return detail::energy_residuals(est.rotation, detail::pack(est), est, inliers, readout, cfg)
      .squaredNorm();
}

struct RefineResult {
  RelativePoseEstimate estimate;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  int outer_iterations = 0;
  std::vector<double> energy_trace;  // after every outer iteration, starting with the initial energy
};

/// Rotation block first, then translation/velocity block, until the relative
/// energy decrease drops below outer_tol. The result has unit translation.
inline RefineResult refine(const RelativePoseEstimate& init, std::span<const Correspondence> inliers,
                           double readout, const RefineConfig& cfg = {}) {
  cfg.validate();
  if (inliers.empty()) throw InvalidInput("refinement needs at least one inlier");
  if (inliers.size() < 9)
    std::cerr << "warning: refining on " << inliers.size() << " inliers (< 9)\n";

  LmOptions rot_opt;
  rot_opt.max_iterations = cfg.inner.max_lm_iterations;
  rot_opt.initial_damping = cfg.inner.lm_initial_damping;
  rot_opt.step_tolerance = cfg.inner.convergence_tol;
  rot_opt.fd_step = cfg.inner.quat_fd_step;
  LmOptions x_opt = rot_opt;
  x_opt.fd_step = 1e-7;

  Rotation q = init.rotation;
  VecX x = detail::pack(init);

  RefineResult out;
  out.initial_energy = energy(init, inliers, readout, cfg);
  out.energy_trace.push_back(out.initial_energy);
  double prev = out.initial_energy;

  for (int it = 0; it < cfg.max_outer_iterations; ++it) {
    ++out.outer_iterations;
    {
      auto f = [&](const Rotation& qq) {
        return detail::energy_residuals(qq, x, init, inliers, readout, cfg);
      };
      auto retract = [](const Rotation& qq, const VecX& d) {
        return quat_local_update(qq, Vec3(d[0], d[1], d[2]));
      };
      q = levenberg_marquardt(q, 3, f, retract, rot_opt).params;
    }
    {
      auto f = [&](const VecX& xx) {
        return detail::energy_residuals(q, xx, init, inliers, readout, cfg);
      };
      auto retract = [](const VecX& xx, const VecX& d) -> VecX { return xx + d; };
      x = levenberg_marquardt(x, 9, f, retract, x_opt).params;
    }
    const double cur = detail::energy_residuals(q, x, init, inliers, readout, cfg).squaredNorm();
    out.energy_trace.push_back(cur);
    if (cur > prev * (1.0 + 1e-12) + 1e-300)
      throw std::logic_error("refinement energy increased across an outer iteration");
    const double rel = prev > 0.0 ? (prev - cur) / prev : 0.0;
    prev = cur;
    if (rel < cfg.outer_tol) break;
  }

  // Unit translation; Sampson terms are invariant to the common scale.
  const double tn = x.head<3>().norm();
  if (tn > 0.0) x /= tn;
  out.estimate = detail::unpack(init, q, x);
  out.final_energy = energy(out.estimate, inliers, readout, cfg);
  if (out.final_energy > out.initial_energy) {
    // Renormalisation moved the regulariser above the starting point.
    out.estimate = init;
    out.final_energy = out.initial_energy;
  }
  return out;
}

}  // namespace rsrel
