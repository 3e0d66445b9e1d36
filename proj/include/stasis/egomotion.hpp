// Dominant image-motion estimation: a homography fit to dense flow by RANSAC
// with a seeded generator, dense inlier classification, and residual maps
// that expose independently moving pixels.
#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "stasis/error.hpp"
#include "stasis/geometry.hpp"
#include "stasis/image.hpp"
#include "stasis/rng.hpp"

namespace stasis::egomotion {

struct MotionModel {
  Mat3 h = Mat3::Identity();
};

struct RansacParams {
  int iterations = 500;
  double inlier_threshold = 1.0;  // pixels
  int sample_size = 4;
  std::uint64_t seed = 0;
};

struct Correspondence {
  Vec2 src;
  Vec2 dst;
};

inline MotionModel fit_homography_dlt(const std::vector<Correspondence>& corr) {
  std::vector<Vec2> src(corr.size()), dst(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    src[i] = corr[i].src;
    dst[i] = corr[i].dst;
  }
  Mat3 h = stasis::fit_homography_dlt(src, dst);
  require(std::abs(h.determinant()) > 1e-12, Errc::degenerate_configuration,
          "homography not invertible");
  return {h};
}

// flow(x) = pi(H x~) - x. Pixels mapping to the line at infinity carry +inf.
inline FlowField model_flow(const MotionModel& model, int width, int height) {
  FlowField out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      Vec3 q = model.h * Vec3(x, y, 1.0);
      std::size_t i = out.idx(x, y);
      if (std::abs(q.z()) < 1e-12) {
        out.u[i] = std::numeric_limits<float>::infinity();
        out.v[i] = std::numeric_limits<float>::infinity();
        continue;
      }
      out.u[i] = static_cast<float>(q.x() / q.z() - x);
      out.v[i] = static_cast<float>(q.y() / q.z() - y);
    }
  }
  return out;
}

// r(x) = |flow(x) - model_flow(x)|; +inf where the model flow is sentinel.
inline ScalarField residual_map(const FlowField& flow, const MotionModel& model) {
  ScalarField r(flow.width, flow.height);
  FlowField mf = model_flow(model, flow.width, flow.height);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    if (std::isinf(mf.u[i]) || std::isinf(mf.v[i])) {
      r.values[i] = std::numeric_limits<float>::infinity();
      continue;
    }
    double du = static_cast<double>(flow.u[i]) - mf.u[i];
    double dv = static_cast<double>(flow.v[i]) - mf.v[i];
    r.values[i] = static_cast<float>(std::sqrt(du * du + dv * dv));
  }
  return r;
}

namespace detail {

inline double transfer_error(const Mat3& h, double sx, double sy, double dx, double dy) {
  Vec3 q = h * Vec3(sx, sy, 1.0);
  if (std::abs(q.z()) < 1e-15) return std::numeric_limits<double>::infinity();
  double ex = q.x() / q.z() - dx;
  double ey = q.y() / q.z() - dy;
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace detail

struct DominantMotion {
  MotionModel model;
  Mask inliers;  // full resolution
};

// Standard RANSAC over grid-subsampled (x, x + flow(x)) correspondences,
// then an all-inlier DLT refit. The refit is kept only if it does not lower
// the grid inlier count, so the returned model scores at least as high as
// every sampled hypothesis. The returned mask is classified densely at full
// resolution. Deterministic for a fixed seed.
inline DominantMotion ransac_dominant_motion(const FlowField& flow, const RansacParams& params) {
  require(flow.width >= 8 && flow.height >= 8, Errc::bad_dimensions,
          "flow must be at least 8x8");
  require(params.iterations >= 1, Errc::bad_parameter, "iterations >= 1");
  require(params.inlier_threshold > 0.0, Errc::bad_parameter, "threshold > 0");
  require(params.sample_size >= 4, Errc::bad_parameter, "sample_size >= 4");

  // Stride so the hypothesis/scoring grid holds at most 20000 samples.
  const std::size_t max_samples = 20000;
  std::size_t npix = static_cast<std::size_t>(flow.width) * flow.height;
  int stride = 1;
  while (npix / (static_cast<std::size_t>(stride) * stride) > max_samples) ++stride;

  std::vector<Correspondence> grid;
  grid.reserve(npix / (static_cast<std::size_t>(stride) * stride) + flow.width);
  for (int y = 0; y < flow.height; y += stride) {
    for (int x = 0; x < flow.width; x += stride) {
      std::size_t i = flow.idx(x, y);
      if (!std::isfinite(flow.u[i]) || !std::isfinite(flow.v[i])) continue;
      grid.push_back({Vec2(x, y), Vec2(x + flow.u[i], y + flow.v[i])});
    }
  }
  require(grid.size() >= static_cast<std::size_t>(params.sample_size),
          Errc::insufficient_points, "not enough finite flow samples");

  auto count_inliers = [&](const Mat3& h) {
    std::size_t n = 0;
    for (const auto& c : grid) {
      if (detail::transfer_error(h, c.src.x(), c.src.y(), c.dst.x(), c.dst.y()) <=
          params.inlier_threshold) {
        ++n;
      }
    }
    return n;
  };

  Rng rng(params.seed);
  Mat3 best_h = Mat3::Identity();
  std::size_t best_count = 0;
  bool have_model = false;

  std::vector<std::size_t> pick(static_cast<std::size_t>(params.sample_size));
  std::vector<Vec2> s(pick.size()), d(pick.size());
  for (int it = 0; it < params.iterations; ++it) {
    // Distinct sample indices by rejection.
    for (std::size_t k = 0; k < pick.size(); ++k) {
      bool fresh = false;
      while (!fresh) {
        pick[k] = rng.below(grid.size());
        fresh = true;
        for (std::size_t j = 0; j < k; ++j) fresh = fresh && pick[j] != pick[k];
      }
    }
    for (std::size_t k = 0; k < pick.size(); ++k) {
      s[k] = grid[pick[k]].src;
      d[k] = grid[pick[k]].dst;
    }
    Mat3 h;
    try {
      h = stasis::fit_homography_dlt(s, d);
    } catch (const Error&) {
      continue;  // degenerate minimal sample
    }
    if (std::abs(h.determinant()) <= 1e-12) continue;
    std::size_t n = count_inliers(h);
    if (n > best_count) {
      best_count = n;
      best_h = h;
      have_model = true;
    }
  }

  std::size_t min_consensus = 4 * static_cast<std::size_t>(params.sample_size);
  require(have_model && best_count >= min_consensus, Errc::no_consensus,
          "no dominant motion consensus");

  // All-inlier refit; keep it only if the recount does not regress.
  std::vector<Vec2> in_s, in_d;
  in_s.reserve(best_count);
  in_d.reserve(best_count);
  for (const auto& c : grid) {
    if (detail::transfer_error(best_h, c.src.x(), c.src.y(), c.dst.x(), c.dst.y()) <=
        params.inlier_threshold) {
      in_s.push_back(c.src);
      in_d.push_back(c.dst);
    }
  }
  try {
    Mat3 refit = stasis::fit_homography_dlt(in_s, in_d);
    if (std::abs(refit.determinant()) > 1e-12 && count_inliers(refit) >= best_count) {
      best_h = refit;
    }
  } catch (const Error&) {
    // Refit failed; the best sampled hypothesis stands.
  }

  if (std::abs(best_h(2, 2)) > 1e-12) best_h /= best_h(2, 2);

  DominantMotion out;
  out.model.h = best_h;
  out.inliers = Mask(flow.width, flow.height);
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      std::size_t i = flow.idx(x, y);
      if (!std::isfinite(flow.u[i]) || !std::isfinite(flow.v[i])) continue;
      double e = detail::transfer_error(best_h, x, y, x + flow.u[i], y + flow.v[i]);
      out.inliers.bits[i] = e <= params.inlier_threshold ? 1 : 0;
    }
  }
  return out;
}

}  // namespace stasis::egomotion
