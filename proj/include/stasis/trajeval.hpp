#pragma once

// APE/RPE statistics between a reference and an estimated trajectory, with
// optional SE(3)/Sim(3) alignment, plus run-vs-run comparison and the CSV/SVG
// emission behind the evaluation reports. Translational APE only; RPE offers
// both a translational part (meters) and a rotational part (degrees).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stasis/dataset_io.hpp"
#include "stasis/error.hpp"
#include "stasis/geometry.hpp"

namespace stasis::trajeval {

enum class AlignMode { none, se3, sim3 };
enum class RpePart { trans, rot };

struct ErrorStats {
  double rmse = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double std_dev = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

struct ErrorSample {
  std::size_t index = 0;  // position in the associated pair list
  double timestamp = 0.0;
  double error = 0.0;
  Vec3 position = Vec3::Zero();  // reference position, for the color map
};

struct Evaluation {
  ErrorStats stats;
  std::vector<ErrorSample> series;
};

namespace detail {

inline ErrorStats make_stats(std::vector<double> e) {
  require(!e.empty(), Errc::empty_input, "no error samples");
  ErrorStats s;
  s.n = e.size();
  s.min = e[0];
  s.max = e[0];
  double sum = 0.0, sq = 0.0;
  for (double v : e) {
    sum += v;
    sq += v * v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  double n = static_cast<double>(s.n);
  s.mean = sum / n;
  s.rmse = std::sqrt(sq / n);
  double var = 0.0;
  for (double v : e) var += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(var / n);
  std::sort(e.begin(), e.end());
  s.median = (s.n % 2) ? e[s.n / 2] : 0.5 * (e[s.n / 2 - 1] + e[s.n / 2]);
  return s;
}

struct Association {
  Trajectory ref, est;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

// Both trajectories are sorted by timestamp before matching, so permuting the
// input order never changes the result.
inline Association associate(const Trajectory& reference, const Trajectory& estimate,
                             double max_diff) {
  Association a;
  a.ref = reference;
  a.est = estimate;
  auto by_time = [](const StampedPose& x, const StampedPose& y) {
    return x.timestamp < y.timestamp;
  };
  std::stable_sort(a.ref.begin(), a.ref.end(), by_time);
  std::stable_sort(a.est.begin(), a.est.end(), by_time);
  a.pairs = io::associate_timestamps(a.ref, a.est, max_diff);
  return a;
}

}  // namespace detail

inline Evaluation ape(const Trajectory& reference, const Trajectory& estimate, AlignMode mode,
                      double max_diff = 0.02) {
  detail::Association a = detail::associate(reference, estimate, max_diff);
  require(a.pairs.size() >= 3, Errc::insufficient_points, "ape needs >= 3 associated pairs");

  std::vector<Vec3> ref_p, est_p;
  ref_p.reserve(a.pairs.size());
  est_p.reserve(a.pairs.size());
  for (auto [i, j] : a.pairs) {
    ref_p.push_back(a.ref[i].pose.t);
    est_p.push_back(a.est[j].pose.t);
  }
  Sim3 g = Sim3::identity();
  if (mode != AlignMode::none) g = umeyama_align(est_p, ref_p, mode == AlignMode::sim3);

  Evaluation out;
  std::vector<double> errs(a.pairs.size());
  out.series.resize(a.pairs.size());
  for (std::size_t k = 0; k < a.pairs.size(); ++k) {
    errs[k] = (ref_p[k] - g.apply(est_p[k])).norm();
    out.series[k] = {k, a.ref[a.pairs[k].first].timestamp, errs[k], ref_p[k]};
  }
  out.stats = detail::make_stats(std::move(errs));
  return out;
}

// E_i = (Q_i^-1 Q_{i+delta})^-1 (P_i^-1 P_{i+delta}); relative errors need no
// global alignment.
inline Evaluation rpe(const Trajectory& reference, const Trajectory& estimate, int delta,
                      RpePart part, double max_diff = 0.02) {
  require(delta >= 1, Errc::bad_parameter, "rpe delta must be >= 1");
  detail::Association a = detail::associate(reference, estimate, max_diff);
  require(a.pairs.size() >= static_cast<std::size_t>(delta) + 1, Errc::insufficient_points,
          "rpe needs more associated pairs than its delta");

  const std::size_t m = a.pairs.size() - static_cast<std::size_t>(delta);
  Evaluation out;
  std::vector<double> errs(m);
  out.series.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Pose& q0 = a.ref[a.pairs[k].first].pose;
    const Pose& q1 = a.ref[a.pairs[k + delta].first].pose;
    const Pose& p0 = a.est[a.pairs[k].second].pose;
    const Pose& p1 = a.est[a.pairs[k + delta].second].pose;
    Pose e = q0.inverse().compose(q1).inverse().compose(p0.inverse().compose(p1));
    errs[k] = part == RpePart::trans
                  ? e.t.norm()
                  : rotation_angle(e.q.matrix()) * 180.0 / std::numbers::pi;
    out.series[k] = {k, a.ref[a.pairs[k].first].timestamp, errs[k], q0.t};
  }
  out.stats = detail::make_stats(std::move(errs));
  return out;
}

struct MetricComparison {
  double baseline = 0.0;
  double processed = 0.0;
  double delta = 0.0;
  bool improved = false;
};

struct RunMetrics {
  ErrorStats ape;
  ErrorStats rpe;
};

struct RunComparison {
  MetricComparison ape;
  MetricComparison rpe;
};

inline RunComparison compare_runs(const RunMetrics& baseline, const RunMetrics& processed) {
  auto one = [](double b, double p) {
    return MetricComparison{b, p, p - b, p - b < 0.0};
  };
  return {one(baseline.ape.rmse, processed.ape.rmse), one(baseline.rpe.rmse, processed.rpe.rmse)};
}

inline std::string comparison_text(const std::string& sequence, const RunComparison& c) {
  char buf[160];
  std::string s = "sequence: " + sequence + "\n";
  std::snprintf(buf, sizeof buf, "%-8s%14s%14s%14s\n", "metric", "baseline", "processed",
                "delta");
  s += buf;
  auto row = [&](const char* name, const MetricComparison& m) {
    std::snprintf(buf, sizeof buf, "%-8s%14.6f%14.6f%+14.6f\n", name, m.baseline, m.processed,
                  m.delta);
    s += buf;
  };
  row("ape", c.ape);
  row("rpe", c.rpe);
  return s;
}

inline nlohmann::json comparison_json(const std::string& sequence, const RunComparison& c) {
  return nlohmann::json{{"sequence", sequence},           {"ape_baseline", c.ape.baseline},
                        {"ape", c.ape.processed},         {"ape_delta", c.ape.delta},
                        {"ape_improved", c.ape.improved}, {"rpe_baseline", c.rpe.baseline},
                        {"rpe", c.rpe.processed},         {"rpe_delta", c.rpe.delta},
                        {"rpe_improved", c.rpe.improved}};
}

inline void emit_error_series(const std::vector<ErrorSample>& series, const std::string& path) {
  require(!series.empty(), Errc::empty_input, "empty error series");
  std::string out = "index,timestamp,error\n";
  char buf[96];
  for (const ErrorSample& s : series) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", s.index, s.timestamp, s.error);
    out += buf;
  }
  io::detail::write_file_bytes(path, out);
}

// Top-down x-z polyline, one <line> per segment, stroke interpolated linearly
// from blue at the minimum error to red at the maximum.
inline void emit_colormap_svg(const std::vector<Vec3>& positions,
                              const std::vector<double>& errors, const std::string& path) {
  require(positions.size() == errors.size(), Errc::dimension_mismatch,
          "positions/errors lengths differ");
  require(positions.size() >= 2, Errc::insufficient_points, "colormap needs >= 2 positions");

  const double w = 800.0, h = 600.0, margin = 40.0;
  double minx = positions[0].x(), maxx = minx, minz = positions[0].z(), maxz = minz;
  for (const Vec3& p : positions) {
    minx = std::min(minx, p.x());
    maxx = std::max(maxx, p.x());
    minz = std::min(minz, p.z());
    maxz = std::max(maxz, p.z());
  }
  double spanx = std::max(maxx - minx, 1e-12), spanz = std::max(maxz - minz, 1e-12);
  double s = std::min((w - 2.0 * margin) / spanx, (h - 2.0 * margin) / spanz);
  double ox = 0.5 * (w - s * spanx), oy = 0.5 * (h - s * spanz);
  auto px = [&](const Vec3& p) { return ox + s * (p.x() - minx); };
  auto py = [&](const Vec3& p) { return h - oy - s * (p.z() - minz); };

  double emin = errors[0], emax = errors[0];
  for (double e : errors) {
    emin = std::min(emin, e);
    emax = std::max(emax, e);
  }
  double espan = emax - emin;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
                    "viewBox=\"0 0 800 600\">\n<rect width=\"800\" height=\"600\" "
                    "fill=\"white\"/>\n";
  char buf[224];
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
    double e = 0.5 * (errors[i] + errors[i + 1]);
    double t = espan > 0.0 ? (e - emin) / espan : 0.0;
    int r = static_cast<int>(std::lround(255.0 * t));
    int b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\" "
                  "stroke=\"rgb(%d,0,%d)\" stroke-width=\"2\"/>\n",
                  px(positions[i]), py(positions[i]), px(positions[i + 1]), py(positions[i + 1]),
                  r, b);
    svg += buf;
  }
  svg += "</svg>\n";
  io::detail::write_file_bytes(path, svg);
}

}  // namespace stasis::trajeval
