#pragma once

// RANSAC over minimal samples with Sampson-distance scoring.

#include "rsrel/sim.hpp"
#include "rsrel/solvers.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace rsrel {

/// Signed Sampson distance; zero when the gradient vanishes.
inline double sampson_residual(const Mat3& e, const Vec3& m1, const Vec3& m2) {
  const Vec3 em1 = e * m1;
  const Vec3 etm2 = e.transpose() * m2;
  const double den2 = etm2[0] * etm2[0] + etm2[1] * etm2[1] + em1[0] * em1[0] + em1[1] * em1[1];
  if (den2 < 1e-30) return 0.0;
  return m2.dot(em1) / std::sqrt(den2);
}

/// |m2^T E m1| / sqrt((E^T m2)_0^2 + (E^T m2)_1^2 + (E m1)_0^2 + (E m1)_1^2).
/// Points at an epipole (vanishing denominator) score +infinity.
inline double sampson_error(const Mat3& e, const NormalizedPoint& m1, const NormalizedPoint& m2) {
  const Vec3 em1 = e * m1.m;
  const Vec3 etm2 = e.transpose() * m2.m;
  const double den = std::sqrt(etm2[0] * etm2[0] + etm2[1] * etm2[1] + em1[0] * em1[0] + em1[1] * em1[1]);
  if (den < 1e-15) return std::numeric_limits<double>::infinity();
  return std::abs(m2.m.dot(em1)) / den;
}

struct RansacConfig {
  double threshold = 1.0 / 640.0;  // normalized units
  int max_iterations = 1000;
  double confidence = 0.999;
  std::uint64_t seed = 0;

  static RansacConfig from_pixels(double threshold_px, double focal) {
    RansacConfig c;
    c.threshold = threshold_px / focal;
    return c;
  }

  void validate() const {
    if (!(threshold > 0.0)) throw InvalidInput("RANSAC threshold must be positive");
    if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidInput("confidence must lie in (0, 1)");
    if (max_iterations <= 0) throw InvalidInput("max_iterations must be positive");
  }
};

struct ModelScore {
  std::vector<bool> inlier_mask;
  int inliers = 0;
  /// inlier count plus a fractional tiebreak in [0, 1) that rewards small
  /// truncated errors.
  double total_score = 0.0;
};

inline ModelScore score_model(const RelativePoseEstimate& est, std::span<const Correspondence> corrs,
                              double readout, double threshold) {
  ModelScore s;
  s.inlier_mask.assign(corrs.size(), false);
  if (!(threshold > 0.0)) return s;
  const Mat3 r = est.rotation.matrix();
  const double th2 = threshold * threshold;
  double gain = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const auto& c = corrs[i];
    const Mat3 e = essential_uniform(r, est.translation, est.d1, est.d2, est.w1, est.w2, c.p1.row,
                                     c.p2.row, readout);
    const double err = sampson_error(e, c.p1, c.p2);
    if (err < threshold) {
      s.inlier_mask[i] = true;
      ++s.inliers;
      gain += 1.0 - err * err / th2;
    }
  }
  s.total_score = s.inliers + gain / (static_cast<double>(corrs.size()) + 1.0);
  return s;
}

struct VerifiedCandidate {
  SolverOutput output;
  ModelScore score;
};

/// Picks the candidate with the highest score on `corrs` (first wins ties).
inline VerifiedCandidate verify_candidates(std::span<const SolverOutput> cands,
                                           std::span<const Correspondence> corrs, double readout,
                                           double threshold) {
  if (cands.empty()) throw DegenerateConfiguration("no candidates to verify");
  VerifiedCandidate best{cands.front(), score_model(cands.front().estimate, corrs, readout, threshold)};
  for (std::size_t i = 1; i < cands.size(); ++i) {
    ModelScore s = score_model(cands[i].estimate, corrs, readout, threshold);
    if (s.total_score > best.score.total_score) best = {cands[i], std::move(s)};
  }
  return best;
}

struct RansacResult {
  SolverOutput best;
  std::vector<bool> inlier_mask;
  int inliers = 0;
  int iterations_run = 0;
  int degenerate_samples = 0;
  bool success = false;
};

/// Hypothesis count needed to draw one all-inlier sample with the given
/// confidence.
inline double required_iterations(double inlier_ratio, int sample_size, double confidence) {
  if (inlier_ratio >= 1.0) return 0.0;
  if (inlier_ratio <= 0.0) return std::numeric_limits<double>::infinity();
  const double p = std::pow(inlier_ratio, sample_size);
  const double denom = std::log1p(-p);
  if (denom >= 0.0) return std::numeric_limits<double>::infinity();
  return std::log(1.0 - confidence) / denom;
}

/// Seeded RANSAC. Each iteration draws its sample from an RNG keyed on
/// (seed, iteration), so the result depends only on the inputs. Degenerate
/// samples are skipped and do not count towards adaptive termination.
inline RansacResult ransac_estimate(AlgorithmKind algorithm, std::span<const Correspondence> corrs,
                                    const InertialMeasurement& imu1, const InertialMeasurement& imu2,
                                    double readout, const RansacConfig& cfg,
                                    const SolverConfig& solver_cfg = {}) {
  cfg.validate();
  const int k = minimal_points(algorithm);
  const int n = static_cast<int>(corrs.size());
  require_minimal(algorithm, corrs.size());

  RansacResult res;
  ModelScore best_score;
  best_score.total_score = -1.0;
  std::vector<int> pool(n);
  std::vector<Correspondence> sample(k);
  int valid = 0;
  double needed = std::numeric_limits<double>::infinity();

  for (int it = 0; it < cfg.max_iterations; ++it) {
    ++res.iterations_run;
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(it)));
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int j = 0; j < k; ++j) {
      std::uniform_int_distribution<int> pick(j, n - 1);
      std::swap(pool[j], pool[pick(rng)]);
      sample[j] = corrs[pool[j]];
    }

    std::vector<SolverOutput> cands;
    try {
      cands = solve_minimal_candidates(algorithm, sample, imu1, imu2, readout, solver_cfg);
    } catch (const DegenerateConfiguration&) {
      ++res.degenerate_samples;
      continue;
    }
    ++valid;
    for (auto& c : cands) {
      ModelScore s = score_model(c.estimate, corrs, readout, cfg.threshold);
      if (s.total_score > best_score.total_score) {
        best_score = std::move(s);
        res.best = c;
        needed = required_iterations(static_cast<double>(best_score.inliers) / n, k, cfg.confidence);
      }
    }
    if (static_cast<double>(valid) >= needed) break;
  }

  if (best_score.total_score < 0.0)
    throw DegenerateConfiguration("RANSAC: all " + std::to_string(res.iterations_run) +
                                  " minimal samples were degenerate");
  res.inlier_mask = std::move(best_score.inlier_mask);
  res.inliers = best_score.inliers;
  res.success = res.inliers >= k;
  return res;
}

}  // namespace rsrel
