#pragma once

// Error metrics and small order statistics used by the benchmarks.

#include "rsrel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace rsrel {

namespace detail {
inline bool is_rotation(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6 &&
         std::abs(r.determinant() - 1.0) < 1e-6;
}
}  // namespace detail

/// Angle of R_gt^T R_est in degrees.
inline double rotation_error(const Mat3& r_gt, const Mat3& r_est) {
  if (!detail::is_rotation(r_gt) || !detail::is_rotation(r_est))
    throw InvalidInput("rotation_error expects rotation matrices");
  const double c = std::clamp(((r_gt.transpose() * r_est).trace() - 1.0) / 2.0, -1.0, 1.0);
  return rad2deg(std::acos(c));
}

/// Angle between two translation directions, folded into [0, 90] since the
/// sign of t is only fixed by cheirality.
inline double translation_error(const Vec3& t_gt, const Vec3& t_est) {
  const double a = t_gt.norm(), b = t_est.norm();
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("translation_error expects non-zero vectors");
  const double theta = rad2deg(std::acos(std::clamp(t_gt.dot(t_est) / (a * b), -1.0, 1.0)));
  return std::min(theta, 180.0 - theta);
}

/// Quantile with linear interpolation between order statistics
/// (position p * (n - 1)).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InvalidInput("quantile of an empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

struct BoxStats {
  int count = 0;
  double median = 0.0, q1 = 0.0, q3 = 0.0, mean = 0.0;
  int outliers = 0;  // beyond 1.5 IQR from the quartiles
};

inline BoxStats box_stats(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("box_stats of an empty sample");
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.count = static_cast<int>(v.size());
  b.median = quantile_sorted(v, 0.5);
  b.q1 = quantile_sorted(v, 0.25);
  b.q3 = quantile_sorted(v, 0.75);
  b.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  const double iqr = b.q3 - b.q1;
  for (double x : v)
    if (x < b.q1 - 1.5 * iqr || x > b.q3 + 1.5 * iqr) ++b.outliers;
  return b;
}

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson correlation of average ranks).
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("spearman needs two equal samples of size >= 2");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace rsrel
