#pragma once

// Synthetic sweep experiments, their CSV records and box-plot summaries.

#include "rsrel/metrics.hpp"
#include "rsrel/refine.hpp"
#include "rsrel/robust.hpp"
#include "rsrel/sim.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rsrel {

enum class SweepVariable { LinVel, AngVel, PixelNoise, GravityNoise, AngVelNoise };

inline std::string_view sweep_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::LinVel: return "linvel";
    case SweepVariable::AngVel: return "angvel";
    case SweepVariable::PixelNoise: return "pixnoise";
    case SweepVariable::GravityNoise: return "gravnoise";
    case SweepVariable::AngVelNoise: return "wnoise";
  }
  return "?";
}

inline SweepVariable parse_sweep_variable(std::string_view name) {
  for (auto v : {SweepVariable::LinVel, SweepVariable::AngVel, SweepVariable::PixelNoise,
                 SweepVariable::GravityNoise, SweepVariable::AngVelNoise})
    if (sweep_name(v) == name) return v;
  throw InvalidInput("unknown sweep '" + std::string(name) + "'");
}

inline MotionType parse_motion(std::string_view name) {
  if (name == "forward") return MotionType::Forward;
  if (name == "sideways") return MotionType::Sideways;
  throw InvalidInput("unknown motion '" + std::string(name) + "'");
}

struct SweepRange {
  double min = 0.0;
  double max = 1.0;
  int steps = 2;

  std::vector<double> values() const {
    std::vector<double> v(steps);
    const double n = steps - 1;
    for (int i = 0; i < steps; ++i) v[i] = (min * (n - i) + max * i) / n;
    return v;
  }
};

/// m/s per axis, rad/s per axis, pixels, degrees, degrees.
inline SweepRange default_range(SweepVariable v) {
  switch (v) {
    case SweepVariable::LinVel: return {0.0, 10.0, 11};
    case SweepVariable::AngVel: return {0.0, 3.0, 7};
    case SweepVariable::PixelNoise: return {0.0, 1.0, 6};
    case SweepVariable::GravityNoise: return {0.0, 1.0, 6};
    case SweepVariable::AngVelNoise: return {0.0, 3.0, 7};
  }
  return {};
}

/// A benchmarked method: one of the solvers, or "gs5" (the angular 5-point
/// solver fed zero angular velocity, i.e. a global-shutter baseline).
struct BenchAlgorithm {
  std::string name;
  AlgorithmKind kind = AlgorithmKind::Uniform9;
  bool zero_angular_velocity = false;
};

inline BenchAlgorithm parse_bench_algorithm(std::string_view name) {
  if (name == "gs5") return {"gs5", AlgorithmKind::Angular5, true};
  return {std::string(name), parse_algorithm(name), false};
}

struct SweepSpec {
  SweepVariable variable = SweepVariable::LinVel;
  SweepRange range = default_range(SweepVariable::LinVel);
  MotionType motion = MotionType::Forward;
  std::vector<std::string> algorithms = {"uniform9", "uniform11", "gs5"};
  int trials = 100;
  std::uint64_t seed = 0;
  double outlier_fraction = 0.0;    // > 0 routes every trial through RANSAC
  double inlier_threshold_px = 1.0;  // verification / RANSAC threshold
  bool refine = false;
  bool timing = false;  // off keeps runtime_ms = 0 so output is reproducible
  int threads = 0;      // 0: hardware concurrency

  void validate() const {
    if (!(range.min <= range.max)) throw InvalidInput("sweep range needs min <= max");
    if (range.steps < 2) throw InvalidInput("sweep needs at least 2 steps");
    if (trials < 1) throw InvalidInput("sweep needs at least 1 trial");
    if (algorithms.empty()) throw InvalidInput("sweep needs at least one algorithm");
    for (const auto& a : algorithms) parse_bench_algorithm(a);
    if (outlier_fraction < 0.0 || outlier_fraction >= 1.0)
      throw InvalidInput("outlier fraction must lie in [0, 1)");
    if (!(inlier_threshold_px > 0.0)) throw InvalidInput("inlier threshold must be positive");
    if (threads < 0) throw InvalidInput("thread count must be non-negative");
  }
};

struct TrialRecord {
  std::string algorithm;
  double sweep_value = 0.0;
  int trial = 0;
  double rot_err_deg = 0.0;
  double trans_err_deg = 0.0;
  double runtime_ms = 0.0;
  int inliers = 0;
  bool converged = false;
};

/// One synthetic trial shared by every algorithm of a sweep point.
struct TrialData {
  SyntheticScene scene;
  std::vector<PixelCorrespondence> pixels;
  std::vector<Correspondence> corrs;
  std::vector<bool> true_inliers;
  InertialMeasurement imu1, imu2;
  RelativePoseEstimate truth;
  std::uint64_t seed = 0;
};

/// Velocities for a sweep point. Swept velocities have |component| = value
/// with random signs; the noise sweeps use unit-magnitude motion in a random
/// direction. The second camera moves opposite to the first.
inline void assign_motion(SceneConfig& cfg, SweepVariable variable, double value, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto signs = [&] { return Vec3(coin(rng) ? 1.0 : -1.0, coin(rng) ? 1.0 : -1.0, coin(rng) ? 1.0 : -1.0); };
  auto direction = [&] { return Vec3(normal(rng), normal(rng), normal(rng)).normalized(); };
  cfg.d1 = cfg.d2 = cfg.w1 = cfg.w2 = Vec3::Zero();
  switch (variable) {
    case SweepVariable::LinVel:
      cfg.d1 = value * signs();
      break;
    case SweepVariable::AngVel:
      cfg.w1 = value * signs();
      break;
    default:
      cfg.d1 = direction();
      cfg.w1 = direction();
      break;
  }
  cfg.d2 = -cfg.d1;
  cfg.w2 = -cfg.w1;
}

inline TrialData make_trial(const SweepSpec& spec, double value, std::uint64_t trial_seed) {
  std::mt19937_64 rng(mix_seed(trial_seed, 0x5EE));
  SceneConfig cfg;
  cfg.motion = spec.motion;
  cfg.seed = mix_seed(trial_seed, 1);
  assign_motion(cfg, spec.variable, value, rng);

  NoiseConfig noise;
  noise.seed = mix_seed(trial_seed, 2);
  if (spec.variable == SweepVariable::PixelNoise) noise.pixel_sigma = value;
  if (spec.variable == SweepVariable::GravityNoise) noise.gravity_angle_deg = value;
  if (spec.variable == SweepVariable::AngVelNoise) noise.angvel_angle_deg = value;

  TrialData t;
  t.seed = trial_seed;
  t.scene = generate_scene(cfg);
  t.pixels = observe(t.scene);
  t.true_inliers.assign(t.pixels.size(), true);
  if (spec.outlier_fraction > 0.0)
    t.true_inliers = add_outliers(t.pixels, spec.outlier_fraction, t.scene.intrinsics, mix_seed(trial_seed, 3));
  t.corrs = add_pixel_noise(t.pixels, noise.pixel_sigma, t.scene.intrinsics, mix_seed(trial_seed, 4));
  std::tie(t.imu1, t.imu2) = synth_imu(t.scene, Extrinsics{}, noise);
  t.truth = t.scene.ground_truth();
  return t;
}

/// Minimal-sample estimate (hypotheses verified on all correspondences) or
/// RANSAC when the sweep adds outliers, optionally refined on the inliers.
inline TrialRecord run_trial(const BenchAlgorithm& algo, const TrialData& t, const SweepSpec& spec,
                             double value, int trial) {
  TrialRecord rec;
  rec.algorithm = algo.name;
  rec.sweep_value = value;
  rec.trial = trial;
  const auto start = std::chrono::steady_clock::now();
  try {
    InertialMeasurement imu1 = t.imu1, imu2 = t.imu2;
    if (algo.zero_angular_velocity) imu1.angular_velocity = imu2.angular_velocity = Vec3::Zero();
    const double readout = t.scene.intrinsics.readout_time;
    const double threshold = spec.inlier_threshold_px / t.scene.intrinsics.focal;

    SolverOutput best;
    std::vector<bool> mask;
    if (spec.outlier_fraction > 0.0) {
      RansacConfig rc;
      rc.threshold = threshold;
      rc.seed = mix_seed(t.seed, 5);
      RansacResult r = ransac_estimate(algo.kind, t.corrs, imu1, imu2, readout, rc);
      best = r.best;
      mask = std::move(r.inlier_mask);
      rec.converged = r.success && best.converged;
    } else {
      const int k = minimal_points(algo.kind);
      require_minimal(algo.kind, t.corrs.size());
      std::vector<int> idx(t.corrs.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::mt19937_64 rng(mix_seed(t.seed, 6));
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<Correspondence> sample(k);
      for (int j = 0; j < k; ++j) sample[j] = t.corrs[idx[j]];
      const auto cands = solve_minimal_candidates(algo.kind, sample, imu1, imu2, readout, SolverConfig{});
      VerifiedCandidate v = verify_candidates(cands, t.corrs, readout, threshold);
      best = v.output;
      mask = std::move(v.score.inlier_mask);
      rec.converged = best.converged;
    }
    RelativePoseEstimate est = best.estimate;
    if (spec.refine) {
      std::vector<Correspondence> inl;
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) inl.push_back(t.corrs[i]);
      if (!inl.empty()) est = refine(est, inl, readout).estimate;
    }
    rec.inliers = static_cast<int>(std::count(mask.begin(), mask.end(), true));
    rec.rot_err_deg = rotation_error(t.truth.rotation.matrix(), est.rotation.matrix());
    rec.trans_err_deg = translation_error(t.truth.translation, est.translation);
  } catch (const std::exception&) {
    rec.rot_err_deg = 180.0;
    rec.trans_err_deg = 90.0;
    rec.inliers = 0;
    rec.converged = false;
  }
  if (spec.timing)
    rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

/// Every (sweep value, trial) pair is a job. Trial k uses the same seed at
/// every sweep value (common random numbers), so a sweep compares the same
/// scenes and noise draws and only the swept quantity changes. Records are
/// sorted by (algorithm, sweep value, trial).
inline std::vector<TrialRecord> run_sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<BenchAlgorithm> algos;
  for (const auto& a : spec.algorithms) algos.push_back(parse_bench_algorithm(a));
  const auto values = spec.range.values();
  const int n_jobs = static_cast<int>(values.size()) * spec.trials;
  std::vector<std::vector<TrialRecord>> per_job(n_jobs);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int j = next++; j < n_jobs; j = next++) {
      const int vi = j / spec.trials, trial = j % spec.trials;
      const std::uint64_t seed = mix_seed(spec.seed, static_cast<std::uint64_t>(trial));
      const TrialData t = make_trial(spec, values[vi], seed);
      for (const auto& a : algos) per_job[j].push_back(run_trial(a, t, spec, values[vi], trial));
    }
  };
  const int n_threads =
      std::max(1, std::min(n_jobs, spec.threads > 0 ? spec.threads
                                                      : static_cast<int>(std::thread::hardware_concurrency())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  std::vector<TrialRecord> out;
  out.reserve(static_cast<std::size_t>(n_jobs) * algos.size());
  for (auto& v : per_job)
    for (auto& r : v) out.push_back(std::move(r));
  std::stable_sort(out.begin(), out.end(), [](const TrialRecord& a, const TrialRecord& b) {
    if (a.algorithm != b.algorithm) return a.algorithm < b.algorithm;
    if (a.sweep_value != b.sweep_value) return a.sweep_value < b.sweep_value;
    return a.trial < b.trial;
  });
  return out;
}

// ---------------------------------------------------------------- CSV

/// Malformed text input; the message starts with the 1-based line number.
class ParseError : public InvalidInput {
 public:
  ParseError(int line, const std::string& what)
      : InvalidInput("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline constexpr std::string_view kCsvHeader =
    "algorithm,sweep_value,trial,rot_err_deg,trans_err_deg,runtime_ms,inliers,converged";

/// Shortest round-trip decimal; independent of the C and C++ locales.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InvalidInput("not a number: '" + std::string(s) + "'");
  return x;
}

inline int parse_int(std::string_view s) {
  int x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InvalidInput("not an integer: '" + std::string(s) + "'");
  return x;
}

inline void write_csv(std::ostream& os, std::span<const TrialRecord> records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records)
    os << r.algorithm << ',' << format_double(r.sweep_value) << ',' << r.trial << ','
       << format_double(r.rot_err_deg) << ',' << format_double(r.trans_err_deg) << ','
       << format_double(r.runtime_ms) << ',' << r.inliers << ',' << (r.converged ? 1 : 0) << '\n';
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::vector<TrialRecord> read_csv(std::istream& is) {
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) { throw ParseError(lineno, what); };
  if (!std::getline(is, line)) throw ParseError(1, "empty CSV input");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) fail("unexpected header");
  std::vector<TrialRecord> out;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_commas(line);
    if (f.size() != 8) fail("expected 8 fields, got " + std::to_string(f.size()));
    try {
      TrialRecord r;
      r.algorithm = std::string(f[0]);
      r.sweep_value = parse_double(f[1]);
      r.trial = parse_int(f[2]);
      r.rot_err_deg = parse_double(f[3]);
      r.trans_err_deg = parse_double(f[4]);
      r.runtime_ms = parse_double(f[5]);
      r.inliers = parse_int(f[6]);
      const int c = parse_int(f[7]);
      if (c != 0 && c != 1) fail("converged must be 0 or 1");
      r.converged = c == 1;
      if (r.algorithm.empty()) fail("empty algorithm name");
      out.push_back(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const InvalidInput& e) {
      fail(e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------- summary

struct SummaryRow {
  std::string algorithm;
  double sweep_value = 0.0;
  BoxStats rotation;
  BoxStats translation;
};

/// Box-plot statistics per (algorithm, sweep value). With a filter, only
/// that algorithm is kept; an empty result is reported on `warn`.
inline std::vector<SummaryRow> summarize(std::span<const TrialRecord> records,
                                         const std::optional<std::string>& only_algorithm,
                                         std::ostream& warn) {
  std::map<std::pair<std::string, double>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    if (only_algorithm && r.algorithm != *only_algorithm) continue;
    auto& g = groups[{r.algorithm, r.sweep_value}];
    g.first.push_back(r.rot_err_deg);
    g.second.push_back(r.trans_err_deg);
  }
  if (only_algorithm && groups.empty()) warn << "warning: no records for algorithm '" << *only_algorithm << "'\n";
  std::vector<SummaryRow> out;
  for (const auto& [key, g] : groups) out.push_back({key.first, key.second, box_stats(g.first), box_stats(g.second)});
  return out;
}

inline void write_summary(std::ostream& os, std::span<const SummaryRow> rows) {
  os << "algorithm,sweep_value,metric,n,median,q1,q3,mean,outliers\n";
  for (const auto& r : rows) {
    for (const auto& [metric, b] : {std::pair<const char*, const BoxStats&>{"rot_err_deg", r.rotation},
                                    std::pair<const char*, const BoxStats&>{"trans_err_deg", r.translation}}) {
      os << r.algorithm << ',' << format_double(r.sweep_value) << ',' << metric << ',' << b.count << ','
         << format_double(b.median) << ',' << format_double(b.q1) << ',' << format_double(b.q3) << ','
         << format_double(b.mean) << ',' << b.outliers << '\n';
    }
  }
}

}  // namespace rsrel
