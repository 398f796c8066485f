#pragma once

// Minimal solvers: the rotation is found by driving the determinant(s) of the
// coefficient matrix to zero with Levenberg-Marquardt, then x = [t; d1; d2]
// is read off the nullspace and its sign fixed by cheirality.

#include "rsrel/coeffs.hpp"
#include "rsrel/lm.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

namespace rsrel {

struct SolverConfig {
  int max_lm_iterations = 100;
  double lm_initial_damping = 1e-3;
  double convergence_tol = 1e-10;
  int yaw_multistart_count = 8;
  /// Gravity-composed starts (yaw grid) added to the identity start for the
  /// full-rotation algorithms when gravity is available.
  int full_multistart_count = 8;
  /// Yaw samples of a dense scan that seeds extra starts near the roots of
  /// |A| (yaw algorithms) or the minima of the objective along the
  /// gravity-composed yaw circle (full algorithms). 0 disables the scan.
  int yaw_scan_samples = 360;
  int yaw_scan_refine = 40;  // samples per refined minimum
  int yaw_scan_levels = 3;
  /// Radius of the cloud of starts around the gravity-free linear seed
  /// (over-determined full-rotation algorithms). 0 keeps the seed alone.
  double linear_seed_spread_deg = 0.3;
  /// First row of each square window used by the over-determined
  /// (Angular5, Uniform11) objectives. Windows have dim(x) rows.
  std::vector<int> submatrix_row_windows = {0, 1, 2};
  double yaw_fd_step = 1e-7;
  double quat_fd_step = 1e-6;

  void validate() const {
    if (max_lm_iterations <= 0 || yaw_multistart_count <= 0 || full_multistart_count < 0 ||
        yaw_scan_samples < 0 || yaw_scan_refine < 2 || yaw_scan_levels < 0 || !(linear_seed_spread_deg >= 0.0))
      throw InvalidInput("iteration counts must be positive");
    if (!(lm_initial_damping > 0.0) || !(convergence_tol > 0.0))
      throw InvalidInput("damping and tolerance must be positive");
    if (submatrix_row_windows.empty()) throw InvalidInput("need at least one row window");
  }
};

struct SolverOutput {
  RelativePoseEstimate estimate;
  double objective_value = 0.0;
  int candidates_considered = 0;
  bool converged = true;
  int positive_depths = 0;
  double rank_ratio = 0.0;  // sigma_min / sigma_max of A at the solution
};

/// Determinants of A (square algorithms) or of its row windows.
inline VecX determinant_objective(const RotationHypothesis& hyp, std::span<const Correspondence> corrs,
                                  const InertialMeasurement& imu1, const InertialMeasurement& imu2,
                                  double readout, AlgorithmKind algorithm,
                                  const std::vector<int>& windows = {0, 1, 2}) {
  const int dim = unknown_dim(algorithm);
  const int n_min = minimal_points(algorithm);
  require_minimal(algorithm, corrs.size());
  const CoefficientMatrix a =
      build_matrix(corrs.first(n_min), hyp, imu1, imu2, readout, algorithm);
  if (n_min == dim) {
    VecX r(1);
    r[0] = a.entries.determinant();
    return r;
  }
  VecX r(static_cast<int>(windows.size()));
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const int first = windows[k];
    if (first < 0 || first + dim > n_min) throw InvalidInput("row window exceeds coefficient matrix");
    r[static_cast<int>(k)] = a.entries.middleRows(first, dim).determinant();
  }
  return r;
}

struct RotationSolve {
  RotationHypothesis hypothesis;
  double objective = 0.0;  // sum of squared determinants
  double initial_objective = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_trace;
};

inline RotationSolve solve_rotation(std::span<const Correspondence> corrs,
                                    const InertialMeasurement& imu1, const InertialMeasurement& imu2,
                                    double readout, AlgorithmKind algorithm,
                                    const RotationHypothesis& init, const SolverConfig& cfg) {
  LmOptions opt;
  opt.max_iterations = cfg.max_lm_iterations;
  opt.initial_damping = cfg.lm_initial_damping;
  opt.step_tolerance = cfg.convergence_tol;

  RotationSolve out;
  if (const auto* yaw = std::get_if<YawHypothesis>(&init)) {
    if (!std::isfinite(yaw->psi)) throw InvalidInput("initial yaw must be finite");
    opt.fd_step = cfg.yaw_fd_step;
    auto f = [&](double psi) {
      return determinant_objective(YawHypothesis{psi}, corrs, imu1, imu2, readout, algorithm,
                                   cfg.submatrix_row_windows);
    };
    auto retract = [](double psi, const VecX& d) { return psi + d[0]; };
    auto res = levenberg_marquardt(yaw->psi, 1, f, retract, opt);
    out.hypothesis = YawHypothesis{std::remainder(res.params, 2.0 * kPi)};
    out.objective = res.cost;
    out.initial_objective = res.initial_cost;
    out.converged = res.converged;
    out.iterations = res.iterations;
    out.cost_trace = std::move(res.cost_trace);
    return out;
  }

  opt.fd_step = cfg.quat_fd_step;
  const Rotation q0 = std::get<FullHypothesis>(init).q;
  auto f = [&](const Rotation& q) {
    return determinant_objective(FullHypothesis{q}, corrs, imu1, imu2, readout, algorithm,
                                 cfg.submatrix_row_windows);
  };
  auto retract = [](const Rotation& q, const VecX& d) {
    return quat_local_update(q, Vec3(d[0], d[1], d[2]));
  };
  auto res = levenberg_marquardt(q0, 3, f, retract, opt);
  out.hypothesis = FullHypothesis{res.params};
  out.objective = res.cost;
  out.initial_objective = res.initial_cost;
  out.converged = res.converged;
  out.iterations = res.iterations;
  out.cost_trace = std::move(res.cost_trace);
  return out;
}

struct TranslationCandidates {
  VecX x_plus;
  VecX x_minus;
  VecX singular_values;  // descending
};

/// Right singular vector of the smallest singular value, scaled so that
/// its translation block has unit norm, and its negation.
///
/// Without image motion the velocity columns repeat the translation columns
/// up to per-row factors, so at the true rotation [t,0,0], [0,t,0] and
/// [0,0,t] are all null vectors. When several singular values vanish, the
/// null vector with the largest translation share is returned; it is unique
/// as long as the translation blocks of the nullspace span a single line.
inline TranslationCandidates extract_translation(const CoefficientMatrix& a) {
  const int dim = static_cast<int>(a.entries.cols());
  Eigen::JacobiSVD<MatX> svd(a.entries, Eigen::ComputeFullV);
  const VecX& s = svd.singularValues();
  if (s.size() < dim) throw DegenerateConfiguration("coefficient matrix has fewer rows than unknowns");
  const double tol = 1e-9 * std::max(1.0, s[0]);
  int nullity = 1;
  while (nullity < dim && s[dim - 1 - nullity] < tol) ++nullity;

  VecX x = svd.matrixV().col(dim - 1);
  if (nullity > 1) {
    const MatX basis = svd.matrixV().rightCols(nullity);
    Eigen::JacobiSVD<MatX> tsvd(basis.topRows(3), Eigen::ComputeFullV);
    const VecX& ts = tsvd.singularValues();
    if (ts.size() > 1 && ts[1] > 1e-3 * ts[0])
      throw DegenerateConfiguration("nullspace admits more than one translation direction");
    x = basis * tsvd.matrixV().col(0);
  }
  const double tn = x.head<3>().norm();
  if (tn < 1e-12) throw DegenerateConfiguration("nullspace vector has no translation component");
  x /= tn;
  return {x, -x, s};
}

/// Midpoint triangulation with the row-0 (global shutter) poses; returns
/// whether the point lies in front of both cameras.
inline bool in_front_of_both(const Correspondence& c, const Mat3& r, const Vec3& t) {
  const Vec3 a = c.p1.m;
  const Vec3 b = r.transpose() * c.p2.m;
  Eigen::Matrix2d m;
  m << a.dot(a), -a.dot(b), a.dot(b), -b.dot(b);
  const double det = m.determinant();
  if (std::abs(det) < 1e-14 * a.squaredNorm() * b.squaredNorm()) return false;
  const Eigen::Vector2d su = m.inverse() * Eigen::Vector2d(a.dot(t), b.dot(t));
  const Vec3 x = 0.5 * (su[0] * a + t + su[1] * b);
  const double depth1 = x.z();
  const double depth2 = (r * (x - t)).z();
  return depth1 > 0.0 && depth2 > 0.0;
}

inline int count_positive_depths(std::span<const Correspondence> corrs, const Mat3& r, const Vec3& t) {
  int n = 0;
  for (const auto& c : corrs) n += in_front_of_both(c, r, t) ? 1 : 0;
  return n;
}

struct SignChoice {
  VecX x;
  int positive_depths = 0;
};

/// Picks the candidate with more points in front of both cameras; ties go
/// to the first candidate.
inline SignChoice disambiguate_sign(const VecX& x_plus, const VecX& x_minus,
                                    std::span<const Correspondence> corrs, const Mat3& r) {
  const int np = count_positive_depths(corrs, r, x_plus.head<3>());
  const int nm = count_positive_depths(corrs, r, x_minus.head<3>());
  if (nm > np) return {x_minus, nm};
  return {x_plus, np};
}

namespace detail {

inline bool has_gravity_pair(const InertialMeasurement& imu1, const InertialMeasurement& imu2) {
  return imu1.has_gravity && imu2.has_gravity && imu1.gravity.norm() > 1e-6 && imu2.gravity.norm() > 1e-6;
}

/// Yaw values in [-pi, pi) near the roots of g on the circle. Cells holding a
/// sign change or a local minimum of |g| are re-sampled on their two
/// neighbouring cells, `levels` times, which separates roots closer than
/// the coarse spacing. g may be non-negative, in which case only minima count.
template <class G>
std::vector<double> circle_root_seeds(G&& g, int n_coarse, int n_fine, int levels) {
  struct Cell {
    double centre, half;
  };
  auto flagged = [](const std::vector<double>& f, int i, int n, bool wrap) {
    const double prev = f[wrap ? (i + n - 1) % n : i - 1], next = f[wrap ? (i + 1) % n : i + 1];
    const bool minimum = std::abs(f[i]) <= std::abs(prev) && std::abs(f[i]) < std::abs(next);
    return minimum || f[i] == 0.0 || f[i] * next < 0.0;
  };
  const double step0 = 2.0 * kPi / n_coarse;
  std::vector<double> f(n_coarse);
  for (int k = 0; k < n_coarse; ++k) f[k] = g(-kPi + step0 * k);
  std::vector<Cell> cells;
  for (int k = 0; k < n_coarse; ++k)
    if (flagged(f, k, n_coarse, true)) cells.push_back({-kPi + step0 * k, step0});
  for (int level = 0; level < levels; ++level) {
    std::vector<Cell> finer;
    for (const Cell& c : cells) {
      const double h = 2.0 * c.half / n_fine;
      std::vector<double> fv(n_fine + 1);
      for (int i = 0; i <= n_fine; ++i) fv[i] = g(c.centre - c.half + h * i);
      for (int i = 1; i < n_fine; ++i)
        if (flagged(fv, i, n_fine + 1, false)) finer.push_back({c.centre - c.half + h * i, h});
    }
    cells = std::move(finer);
  }
  std::vector<double> out;
  for (const Cell& c : cells) out.push_back(std::remainder(c.centre, 2.0 * kPi));
  return out;
}

/// The two rotations of a linear 8-point essential matrix fitted to
/// gyro-compensated rays. Ignores translation-induced rolling-shutter
/// distortion, so it only seeds the search, but it needs no gravity.
inline std::vector<Mat3> linear_rotation_seeds(std::span<const Correspondence> sample,
                                               const InertialMeasurement& imu1,
                                               const InertialMeasurement& imu2, double readout) {
  MatX m(static_cast<Eigen::Index>(sample.size()), 9);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Correspondence& c = sample[i];
    const Vec3 a = ((Mat3::Identity() + c.p1.row * readout * skew(imu1.angular_velocity)) * c.p1.m).normalized();
    const Vec3 b = ((Mat3::Identity() + c.p2.row * readout * skew(imu2.angular_velocity)) * c.p2.m).normalized();
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) m(static_cast<Eigen::Index>(i), 3 * r + k) = b[r] * a[k];
  }
  const Eigen::JacobiSVD<MatX> svd(m, Eigen::ComputeFullV);
  const VecX e = svd.matrixV().col(8);
  Mat3 ess;
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) ess(r, k) = e[3 * r + k];
  const Eigen::JacobiSVD<Mat3> es(ess, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = es.matrixU(), v = es.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  return {u * w * v.transpose(), u * w.transpose() * v.transpose()};
}

/// Uniform yaw grid (yaw algorithms) or identity, linear seeds (eight or
/// more rows) and gravity-composed rotations (full algorithms), followed by
/// the scan-derived starts.
inline std::vector<RotationHypothesis> initial_hypotheses(AlgorithmKind algorithm,
                                                          std::span<const Correspondence> sample,
                                                          const InertialMeasurement& imu1,
                                                          const InertialMeasurement& imu2, double readout,
                                                          const SolverConfig& cfg) {
  std::vector<RotationHypothesis> inits;
  const int n_scan = cfg.yaw_scan_samples;

  if (uses_gravity(algorithm)) {
    for (int k = 0; k < cfg.yaw_multistart_count; ++k)
      inits.push_back(YawHypothesis{-kPi + 2.0 * kPi * k / cfg.yaw_multistart_count});
    if (n_scan < 3) return inits;
    auto g = [&](double psi) {
      return determinant_objective(YawHypothesis{psi}, sample, imu1, imu2, readout, algorithm)[0];
    };
    for (double psi : circle_root_seeds(g, n_scan, cfg.yaw_scan_refine, cfg.yaw_scan_levels))
      inits.push_back(YawHypothesis{psi});
    return inits;
  }

  inits.push_back(FullHypothesis{Rotation::identity()});
  // Minimal data has further exact roots within ~0.1 deg of the truth, so
  // the linear seed is expanded into a small cloud of starts.
  if (sample.size() >= 8) {
    const double h = 0.5 * deg2rad(cfg.linear_seed_spread_deg);  // quat_local_update takes half angles
    for (const Mat3& r : linear_rotation_seeds(sample, imu1, imu2, readout))
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
          for (int c = -1; c <= 1; ++c) {
            const Vec3 d(a, b, c);
            if (d.isZero())
              inits.push_back(FullHypothesis{Rotation(r)});
            else if (h > 0.0)
              inits.push_back(FullHypothesis{quat_local_update(Rotation(r), h * d.normalized())});
          }
  }
  if (!has_gravity_pair(imu1, imu2)) return inits;
  // Gravity only seeds the search here; the objective does not use it.
  const Tilt t1 = tilt_from_gravity(imu1.gravity), t2 = tilt_from_gravity(imu2.gravity);
  auto composed = [&](double psi) { return FullHypothesis{Rotation(compose_from_gravity(psi, t1, t2))}; };
  for (int k = 0; k < cfg.full_multistart_count; ++k)
    inits.push_back(composed(2.0 * kPi * k / cfg.full_multistart_count));
  if (n_scan < 3) return inits;
  auto g = [&](double psi) {
    return determinant_objective(composed(psi), sample, imu1, imu2, readout, algorithm,
                                 cfg.submatrix_row_windows)
        .squaredNorm();
  };
  for (double psi : circle_root_seeds(g, n_scan, cfg.yaw_scan_refine, cfg.yaw_scan_levels))
    inits.push_back(composed(psi));
  return inits;
}

inline double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace detail

/// All distinct solutions reached from the multistart initialisations,
/// best first (rank deficient, most points in front, slowest velocities,
/// smallest rank ratio).
inline std::vector<SolverOutput> solve_minimal_candidates(AlgorithmKind algorithm,
                                                          std::span<const Correspondence> corrs,
                                                          const InertialMeasurement& imu1,
                                                          const InertialMeasurement& imu2,
                                                          double readout, const SolverConfig& cfg) {
  cfg.validate();
  const int n_min = minimal_points(algorithm);
  require_minimal(algorithm, corrs.size());
  const auto sample = corrs.first(n_min);

  struct Solved {
    RotationSolve solve;
    Mat3 r;
  };
  std::vector<Solved> unique;
  const auto inits = detail::initial_hypotheses(algorithm, sample, imu1, imu2, readout, cfg);
  for (const auto& init : inits) {
    RotationSolve s = solve_rotation(sample, imu1, imu2, readout, algorithm, init, cfg);
    const Mat3 r = hypothesis_rotation(s.hypothesis, imu1, imu2);
    bool dup = false;
    for (auto& u : unique) {
      if (detail::rotation_angle_between(u.r, r) < 1e-7) {
        dup = true;
        if (s.objective < u.solve.objective) u = Solved{std::move(s), r};
        break;
      }
    }
    if (!dup) unique.push_back(Solved{std::move(s), r});
  }

  std::vector<SolverOutput> outs;
  for (const auto& u : unique) {
    const CoefficientMatrix a = build_matrix(sample, u.solve.hypothesis, imu1, imu2, readout, algorithm);
    TranslationCandidates tc;
    try {
      tc = extract_translation(a);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    const SignChoice choice = disambiguate_sign(tc.x_plus, tc.x_minus, sample, u.r);
    SolverOutput o;
    o.estimate.rotation = Rotation(u.r);
    o.estimate.translation = choice.x.head<3>();
    if (models_linear_velocity(algorithm)) {
      o.estimate.d1 = choice.x.segment<3>(3);
      o.estimate.d2 = choice.x.segment<3>(6);
    }
    if (uses_angular_velocity(algorithm)) {
      o.estimate.w1 = imu1.angular_velocity;
      o.estimate.w2 = imu2.angular_velocity;
    }
    o.objective_value = u.solve.objective;
    o.candidates_considered = static_cast<int>(inits.size());
    o.converged = u.solve.converged;
    o.positive_depths = choice.positive_depths;
    o.rank_ratio = tc.singular_values[tc.singular_values.size() - 1] / std::max(tc.singular_values[0], 1e-300);
    outs.push_back(std::move(o));
  }
  if (outs.empty()) throw DegenerateConfiguration("no non-degenerate solution for minimal sample");

  std::stable_sort(outs.begin(), outs.end(), [](const SolverOutput& a, const SolverOutput& b) {
    const bool ra = a.rank_ratio < 1e-6, rb = b.rank_ratio < 1e-6;
    if (ra != rb) return ra;
    if (a.positive_depths != b.positive_depths) return a.positive_depths > b.positive_depths;
    // Spurious roots come with implausibly fast motion relative to the baseline.
    const double va = a.estimate.d1.squaredNorm() + a.estimate.d2.squaredNorm();
    const double vb = b.estimate.d1.squaredNorm() + b.estimate.d2.squaredNorm();
    if (va != vb) return va < vb;
    return a.rank_ratio < b.rank_ratio;
  });
  return outs;
}

inline SolverOutput estimate_minimal(AlgorithmKind algorithm, std::span<const Correspondence> corrs,
                                     const InertialMeasurement& imu1, const InertialMeasurement& imu2,
                                     double readout, const SolverConfig& cfg = {}) {
  return solve_minimal_candidates(algorithm, corrs, imu1, imu2, readout, cfg).front();
}

}  // namespace rsrel
