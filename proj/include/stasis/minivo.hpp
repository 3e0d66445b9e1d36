#pragma once

// Minimal monocular frame-to-frame visual odometry: Shi-Tomasi corners,
// pyramidal Lucas-Kanade tracking, essential-matrix RANSAC on normalized
// coordinates, cheirality-resolved pose recovery, unit-norm per-step
// translation (monocular scale is free; evaluate with sim3 alignment).
// Optional per-frame masks reject features on dynamic objects.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stasis/error.hpp"
#include "stasis/flow.hpp"
#include "stasis/geometry.hpp"
#include "stasis/image.hpp"
#include "stasis/rng.hpp"

namespace stasis::minivo {

using stasis::Intrinsics;

struct Keypoint {
  Vec2 position = Vec2::Zero();
  double response = 0.0;
};

struct Track {
  Vec2 from = Vec2::Zero();
  Vec2 to = Vec2::Zero();
  bool valid = false;
};

struct VoParams {
  int max_features = 500;
  double quality_level = 0.01;  // fraction of the maximum corner response
  double min_distance = 8.0;    // px between kept corners
  int ransac_iters = 1000;
  double ransac_thresh = 1e-3;  // Sampson distance, normalized coordinates
  std::uint64_t seed = 0;

  void validate() const {
    require(max_features >= 1, Errc::bad_parameter, "max_features must be positive");
    require(quality_level > 0.0 && quality_level <= 1.0, Errc::bad_parameter,
            "quality_level must be in (0, 1]");
    require(min_distance > 0.0, Errc::bad_parameter, "min_distance must be positive");
    require(ransac_iters >= 1, Errc::bad_parameter, "ransac_iters must be positive");
    require(ransac_thresh > 0.0, Errc::bad_parameter, "ransac_thresh must be positive");
  }
};

// Shi-Tomasi: minimum eigenvalue of the 3x3-window gradient structure tensor,
// non-maximum suppression, then greedy min-distance selection in response
// order (ties broken in raster order) up to max_features.
inline std::vector<Keypoint> detect_corners(const Frame& frame, const VoParams& params = {}) {
  params.validate();
  require(frame.width >= 16 && frame.height >= 16, Errc::bad_dimensions,
          "detect_corners needs at least 16x16");
  const int w = frame.width, h = frame.height;
  flow::detail::Grid g = flow::detail::to_grid(frame);

  std::vector<float> gx(g.v.size(), 0.0f), gy(g.v.size(), 0.0f);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      std::size_t k = static_cast<std::size_t>(y) * w + x;
      gx[k] = 0.5f * (g.at(x + 1, y) - g.at(x - 1, y));
      gy[k] = 0.5f * (g.at(x, y + 1) - g.at(x, y - 1));
    }
  }
  std::vector<float> resp(g.v.size(), 0.0f);
  float rmax = 0.0f;
  for (int y = 2; y + 2 < h; ++y) {
    for (int x = 2; x + 2 < w; ++x) {
      double sxx = 0.0, sxy = 0.0, syy = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          std::size_t k = static_cast<std::size_t>(y + dy) * w + (x + dx);
          sxx += gx[k] * gx[k];
          sxy += gx[k] * gy[k];
          syy += gy[k] * gy[k];
        }
      }
      double half_tr = 0.5 * (sxx + syy);
      double root = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
      float r = static_cast<float>(half_tr - root);
      resp[static_cast<std::size_t>(y) * w + x] = r;
      rmax = std::max(rmax, r);
    }
  }
  if (rmax <= 0.0f) return {};

  const float thresh = static_cast<float>(params.quality_level) * rmax;
  struct Cand {
    int x, y;
    float r;
  };
  std::vector<Cand> cands;
  for (int y = 2; y + 2 < h; ++y) {
    for (int x = 2; x + 2 < w; ++x) {
      float r = resp[static_cast<std::size_t>(y) * w + x];
      if (r <= thresh || r <= 0.0f) continue;
      bool peak = true;
      for (int dy = -1; dy <= 1 && peak; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (resp[static_cast<std::size_t>(y + dy) * w + (x + dx)] > r) {
            peak = false;
            break;
          }
        }
      if (peak) cands.push_back({x, y, r});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.r != b.r) return a.r > b.r;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  std::vector<Keypoint> kept;
  const double min_d2 = params.min_distance * params.min_distance;
  for (const Cand& c : cands) {
    if (static_cast<int>(kept.size()) >= params.max_features) break;
    bool clear = true;
    for (const Keypoint& kp : kept) {
      double dx = kp.position.x() - c.x, dy = kp.position.y() - c.y;
      if (dx * dx + dy * dy < min_d2) {
        clear = false;
        break;
      }
    }
    if (clear) kept.push_back({Vec2(c.x, c.y), c.r});
  }
  return kept;
}

namespace detail {

inline float grid_sample(const flow::detail::Grid& g, double x, double y) {
  return sample_bilinear(g.v, g.w, g.h, x, y);
}

inline std::vector<flow::detail::Grid> pyramid(const Frame& f, int levels) {
  std::vector<flow::detail::Grid> p{flow::detail::to_grid(f)};
  while (static_cast<int>(p.size()) < levels && p.back().w >= 24 && p.back().h >= 24)
    p.push_back(flow::detail::downsample_box(p.back()));
  return p;
}

}  // namespace detail

// Pyramidal Lucas-Kanade over a 15x15 window with the template's structure
// tensor; tracks die on window exits, flat patches, runaway steps, or a large
// final residual. Output is index-aligned with the keypoints.
inline std::vector<Track> track_corners(const Frame& f1, const Frame& f2,
                                        const std::vector<Keypoint>& kps,
                                        const flow::FlowParams& fp = {}) {
  require(f1.same_size(f2), Errc::dimension_mismatch, "track_corners frame sizes differ");
  constexpr int kHalf = 7;
  constexpr int kMaxIter = 30;
  constexpr double kEps = 1e-3;
  constexpr double kMaxResidual = 0.08;  // mean |I1-I2| on [0,1] intensities
  constexpr double kMinDet = 1e-8;

  std::vector<flow::detail::Grid> p1 = detail::pyramid(f1, fp.levels);
  std::vector<flow::detail::Grid> p2 = detail::pyramid(f2, fp.levels);
  const int levels = static_cast<int>(p1.size());

  std::vector<Track> out(kps.size());
  for (std::size_t i = 0; i < kps.size(); ++i) {
    Track& tr = out[i];
    tr.from = kps[i].position;
    tr.to = kps[i].position;

    double du = 0.0, dv = 0.0;
    bool alive = true;
    for (int l = levels - 1; l >= 0 && alive; --l) {
      const flow::detail::Grid& a = p1[l];
      const flow::detail::Grid& b = p2[l];
      double scale = static_cast<double>(1 << l);
      double px = kps[i].position.x() / scale, py = kps[i].position.y() / scale;
      if (px - kHalf < 1.0 || px + kHalf > a.w - 2.0 || py - kHalf < 1.0 ||
          py + kHalf > a.h - 2.0) {
        // window does not fit at this level; finer levels may still work
        if (l == 0) alive = false;
        du *= 2.0;
        dv *= 2.0;
        continue;
      }

      // template window and its structure tensor, fixed per level
      double tpl[15 * 15], tgx[15 * 15], tgy[15 * 15];
      double gxx = 0.0, gxy = 0.0, gyy = 0.0;
      int n = 0;
      for (int wy = -kHalf; wy <= kHalf; ++wy) {
        for (int wx = -kHalf; wx <= kHalf; ++wx, ++n) {
          double qx = px + wx, qy = py + wy;
          tpl[n] = detail::grid_sample(a, qx, qy);
          tgx[n] = 0.5 * (detail::grid_sample(a, qx + 1, qy) -
                          detail::grid_sample(a, qx - 1, qy));
          tgy[n] = 0.5 * (detail::grid_sample(a, qx, qy + 1) -
                          detail::grid_sample(a, qx, qy - 1));
          gxx += tgx[n] * tgx[n];
          gxy += tgx[n] * tgy[n];
          gyy += tgy[n] * tgy[n];
        }
      }
      double det = gxx * gyy - gxy * gxy;
      if (det < kMinDet) {
        alive = false;
        break;
      }

      for (int it = 0; it < kMaxIter; ++it) {
        if (px + du - kHalf < 0.0 || px + du + kHalf > b.w - 1.0 || py + dv - kHalf < 0.0 ||
            py + dv + kHalf > b.h - 1.0) {
          alive = false;
          break;
        }
        double bx = 0.0, by = 0.0;
        n = 0;
        for (int wy = -kHalf; wy <= kHalf; ++wy) {
          for (int wx = -kHalf; wx <= kHalf; ++wx, ++n) {
            double diff = tpl[n] - detail::grid_sample(b, px + wx + du, py + wy + dv);
            bx += diff * tgx[n];
            by += diff * tgy[n];
          }
        }
        double step_u = (gyy * bx - gxy * by) / det;
        double step_v = (gxx * by - gxy * bx) / det;
        du += step_u;
        dv += step_v;
        if (std::hypot(du, dv) > 0.5 * b.w) {
          alive = false;
          break;
        }
        if (std::hypot(step_u, step_v) < kEps) break;
      }

      if (alive && l == 0) {
        if (px + du - kHalf < 0.0 || px + du + kHalf > b.w - 1.0 || py + dv - kHalf < 0.0 ||
            py + dv + kHalf > b.h - 1.0) {
          alive = false;
          break;
        }
        double res = 0.0;
        n = 0;
        for (int wy = -kHalf; wy <= kHalf; ++wy)
          for (int wx = -kHalf; wx <= kHalf; ++wx, ++n)
            res += std::abs(tpl[n] - detail::grid_sample(b, px + wx + du, py + wy + dv));
        if (res / (15.0 * 15.0) > kMaxResidual) alive = false;
      }
      if (l > 0) {
        du *= 2.0;
        dv *= 2.0;
      }
    }
    if (alive) {
      tr.to = tr.from + Vec2(du, dv);
      tr.valid = tr.to.x() >= 0.0 && tr.to.x() <= f2.width - 1.0 && tr.to.y() >= 0.0 &&
                 tr.to.y() <= f2.height - 1.0;
    }
  }
  return out;
}

namespace detail {

// x2^T E x1 = 0 stacked rows; nullspace by SVD, then projection onto the
// essential manifold with both retained singular values set to their mean.
// degeneracy reports sigma_7/sigma_1 of the stacked system: a near-zero value
// means rank <= 6, i.e. the correspondences admit a single homography and the
// nullspace vector is an arbitrary member of the planar family.
inline Mat3 eight_point(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2,
                        const std::vector<std::size_t>& idx, double* degeneracy = nullptr) {
  Eigen::Matrix<double, Eigen::Dynamic, 9> a(idx.size(), 9);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Vec2& p = x1[idx[r]];
    const Vec2& q = x2[idx[r]];
    a.row(r) << q.x() * p.x(), q.x() * p.y(), q.x(), q.y() * p.x(), q.y() * p.y(), q.y(),
        p.x(), p.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 9>> svd(a, Eigen::ComputeFullV);
  Eigen::Matrix<double, 9, 1> e = svd.matrixV().col(8);
  if (degeneracy) {
    const auto& sv = svd.singularValues();
    *degeneracy = sv(0) > 0.0 ? sv(6) / sv(0) : 0.0;
  }
  Mat3 em;
  em << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);

  Eigen::JacobiSVD<Mat3> esvd(em, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = esvd.singularValues();
  double sigma = 0.5 * (s(0) + s(1));
  Mat3 d = Mat3::Zero();
  d(0, 0) = sigma;
  d(1, 1) = sigma;
  return esvd.matrixU() * d * esvd.matrixV().transpose();
}

// first-order (Sampson) distance to the epipolar constraint
inline double sampson_distance(const Mat3& e, const Vec2& p1, const Vec2& p2) {
  Vec3 x1(p1.x(), p1.y(), 1.0), x2(p2.x(), p2.y(), 1.0);
  Vec3 ex1 = e * x1;
  Vec3 etx2 = e.transpose() * x2;
  double num = x2.dot(ex1);
  double den = ex1(0) * ex1(0) + ex1(1) * ex1(1) + etx2(0) * etx2(0) + etx2(1) * etx2(1);
  if (den <= 0.0) return std::abs(num) > 0.0 ? 1e30 : 0.0;
  return std::abs(num) / std::sqrt(den);
}

// Midpoint depths of the ray pair; both must be positive. Convention
// throughout: x2 = R x1 + t maps camera-1 coordinates into camera 2.
inline bool in_front(const Mat3& r, const Vec3& t, const Vec2& p1, const Vec2& p2) {
  Vec3 d1(p1.x(), p1.y(), 1.0);
  Vec3 c = -r.transpose() * t;
  Vec3 d2 = r.transpose() * Vec3(p2.x(), p2.y(), 1.0);
  double a = d1.dot(d1), b = d1.dot(d2), cc = d2.dot(d2);
  double den = a * cc - b * b;
  if (den <= 1e-12 * a * cc) return false;  // near-parallel rays
  double d = d1.dot(c), ee = d2.dot(c);
  double s = (cc * d - b * ee) / den;
  double u = (b * d - a * ee) / den;
  return s > 0.0 && u > 0.0;
}

inline Mat3 essential_from_rt(const Mat3& r, const Vec3& t) {
  Mat3 tx;
  tx << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
  Mat3 e = tx * r;
  return e * (std::sqrt(2.0) / e.norm());
}

struct PlanarMotion {
  bool ok = false;
  Mat3 r[2];
  Vec3 t[2];
  Vec3 n[2];
};

// Faugeras SVD decomposition of a calibrated homography H = R + t n^T / d
// into its two physical (R, t, n) interpretations, both with n_z >= 0 and
// unit t. Fails on a rotation-only H (no recoverable translation direction).
inline PlanarMotion decompose_homography(Mat3 h) {
  PlanarMotion out;
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 d = svd.singularValues();
  double d1 = d(0), d2 = d(1), d3 = d(2);
  if (d2 <= 0.0 || (d1 - d3) / d2 < 1e-7) return out;
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  if (u.determinant() < 0.0 && v.determinant() < 0.0) {
    u.col(2) = -u.col(2);
    v.col(2) = -v.col(2);
  }
  if (u.determinant() < 0.0 || v.determinant() < 0.0) return out;  // reflection, not a motion

  double denom = d1 * d1 - d3 * d3;
  double x1 = std::sqrt(std::max(0.0, (d1 * d1 - d2 * d2) / denom));
  double x3 = std::sqrt(std::max(0.0, (d2 * d2 - d3 * d3) / denom));
  for (int c = 0; c < 2; ++c) {
    double s3 = c == 0 ? x3 : -x3;
    double sin_t = (d1 - d3) * x1 * s3 / d2;
    double cos_t = (d1 * s3 * s3 + d3 * x1 * x1) / d2;
    Mat3 rp;
    rp << cos_t, 0, -sin_t, 0, 1, 0, sin_t, 0, cos_t;
    Vec3 tp(x1 * (d1 - d3), 0.0, -s3 * (d1 - d3));
    Vec3 np(x1, 0.0, s3);
    out.r[c] = u * rp * v.transpose();
    out.t[c] = (u * tp).normalized();
    out.n[c] = v * np;
    if (out.n[c].z() < 0.0) {
      out.t[c] = -out.t[c];
      out.n[c] = -out.n[c];
    }
  }
  out.ok = true;
  return out;
}

}  // namespace detail

struct EssentialResult {
  Mat3 e = Mat3::Zero();
  std::vector<char> inliers;  // aligned with the input tracks
  int inlier_count = 0;
};

inline EssentialResult estimate_essential(const std::vector<Track>& tracks, const Intrinsics& k,
                                          const VoParams& params = {}) {
  params.validate();
  k.validate();
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < tracks.size(); ++i)
    if (tracks[i].valid) valid.push_back(i);
  require(valid.size() >= 8, Errc::insufficient_points,
          "essential estimation needs >= 8 valid correspondences");

  std::vector<Vec2> x1(tracks.size()), x2(tracks.size());
  for (std::size_t i : valid) {
    x1[i] = k.normalize(tracks[i].from);
    x2[i] = k.normalize(tracks[i].to);
  }

  Rng rng(params.seed);
  const std::size_t nv = valid.size();
  std::vector<std::size_t> best;
  for (int it = 0; it < params.ransac_iters; ++it) {
    std::size_t pick[8];
    int got = 0;
    while (got < 8) {
      std::size_t c = valid[rng.below(nv)];
      bool dup = false;
      for (int j = 0; j < got; ++j) dup = dup || pick[j] == c;
      if (!dup) pick[got++] = c;
    }
    Mat3 e = detail::eight_point(x1, x2, std::vector<std::size_t>(pick, pick + 8));
    std::vector<std::size_t> inl;
    for (std::size_t i : valid)
      if (detail::sampson_distance(e, x1[i], x2[i]) <= params.ransac_thresh) inl.push_back(i);
    if (inl.size() > best.size()) best = std::move(inl);
  }
  require(best.size() >= 12, Errc::no_consensus, "essential consensus below 12 inliers");

  EssentialResult res;
  double degeneracy = 0.0;
  res.e = detail::eight_point(x1, x2, best, &degeneracy);
  if (degeneracy < 5e-3) {
    // The consensus set is explained by a single homography, so the linear
    // nullspace holds a whole family of epipolar geometries and the vector
    // picked above is arbitrary. Resolve the family by decomposing the
    // consensus homography and keeping the interpretation with the best
    // cheirality support (ties go to the more fronto-parallel plane).
    std::vector<Vec2> src, dst;
    src.reserve(best.size());
    dst.reserve(best.size());
    for (std::size_t i : best) {
      src.push_back(x1[i]);
      dst.push_back(x2[i]);
    }
    try {
      Mat3 hmat = stasis::fit_homography_dlt(src, dst);
      int positive = 0;
      for (std::size_t i : best) {
        Vec3 hx = hmat * Vec3(x1[i].x(), x1[i].y(), 1.0);
        positive += hx.z() > 0.0 ? 1 : -1;
      }
      if (positive < 0) hmat = -hmat;
      detail::PlanarMotion pm = detail::decompose_homography(hmat);
      if (pm.ok) {
        int count[2] = {0, 0};
        for (int c = 0; c < 2; ++c)
          for (std::size_t i : best)
            if (detail::in_front(pm.r[c], pm.t[c], x1[i], x2[i])) ++count[c];
        int pick_c;
        if (count[0] != count[1])
          pick_c = count[0] > count[1] ? 0 : 1;
        else
          pick_c = pm.n[0].z() >= pm.n[1].z() ? 0 : 1;
        if (count[pick_c] > 0) res.e = detail::essential_from_rt(pm.r[pick_c], pm.t[pick_c]);
      }
    } catch (const Error&) {
      // keep the nullspace vector; downstream cheirality decides
    }
  }
  res.inliers.assign(tracks.size(), 0);
  for (std::size_t i : valid) {
    if (detail::sampson_distance(res.e, x1[i], x2[i]) <= params.ransac_thresh) {
      res.inliers[i] = 1;
      ++res.inlier_count;
    }
  }
  return res;
}

// Standard 4-way decomposition; the candidate placing the strict majority of
// the given correspondences in front of both cameras wins. ||t|| = 1.
inline Pose recover_pose(const Mat3& e, const std::vector<Track>& tracks, const Intrinsics& k) {
  k.validate();
  std::vector<Vec2> x1, x2;
  for (const Track& t : tracks) {
    if (!t.valid) continue;
    x1.push_back(k.normalize(t.from));
    x2.push_back(k.normalize(t.to));
  }
  require(!x1.empty(), Errc::insufficient_points, "recover_pose needs >= 1 correspondence");

  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Mat3 w = Mat3::Zero();
  w(0, 1) = -1.0;
  w(1, 0) = 1.0;
  w(2, 2) = 1.0;
  Mat3 r1 = u * w * v.transpose();
  Mat3 r2 = u * w.transpose() * v.transpose();
  Vec3 t = u.col(2).normalized();

  const Mat3* rs[4] = {&r1, &r1, &r2, &r2};
  Vec3 ts[4] = {t, -t, t, -t};
  int best = -1;
  std::size_t best_count = 0;
  for (int c = 0; c < 4; ++c) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < x1.size(); ++i)
      if (detail::in_front(*rs[c], ts[c], x1[i], x2[i])) ++count;
    if (count > best_count) {
      best_count = count;
      best = c;
    }
  }
  require(best >= 0 && 2 * best_count > x1.size(), Errc::degenerate_configuration,
          "no decomposition places a majority of points in front");

  Pose p;
  p.q = Quat::from_matrix(*rs[best]);
  p.t = ts[best];
  return p;
}

inline std::vector<Keypoint> filter_masked(const std::vector<Keypoint>& kps, const Mask& mask) {
  std::vector<Keypoint> out;
  for (const Keypoint& kp : kps) {
    int x = static_cast<int>(std::lround(kp.position.x()));
    int y = static_cast<int>(std::lround(kp.position.y()));
    x = std::clamp(x, 0, mask.width - 1);
    y = std::clamp(y, 0, mask.height - 1);
    if (!mask.at(x, y)) out.push_back(kp);
  }
  return out;
}

struct PairLog {
  int features = 0;
  int tracked = 0;
  int inliers = 0;
  bool held = false;
};

struct VoResult {
  Trajectory trajectory;
  std::vector<PairLog> pairs;
  bool failed = false;  // a quarter or more of the pairs were held
};

// Frame-to-frame chaining C_{t+1} = C_t * rel^-1 with unit-norm steps. A pair
// without consensus holds the previous pose (identity relative motion).
inline VoResult run_vo(const std::vector<Frame>& frames, const Intrinsics& k,
                       const VoParams& params = {}, const std::vector<Mask>* masks = nullptr,
                       const std::vector<double>* timestamps = nullptr) {
  params.validate();
  k.validate();
  require(frames.size() >= 2, Errc::insufficient_frames, "run_vo needs >= 2 frames");
  if (masks)
    require(masks->size() == frames.size(), Errc::dimension_mismatch,
            "mask count differs from frame count");
  if (timestamps)
    require(timestamps->size() == frames.size(), Errc::dimension_mismatch,
            "timestamp count differs from frame count");
  auto ts = [&](std::size_t t) { return timestamps ? (*timestamps)[t] : static_cast<double>(t); };

  VoResult res;
  res.trajectory.push_back({ts(0), Pose::identity()});
  std::vector<Keypoint> active;
  int held = 0;

  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    if (2 * static_cast<int>(active.size()) < params.max_features)
      active = detect_corners(frames[t], params);
    if (masks) active = filter_masked(active, (*masks)[t]);

    PairLog log;
    log.features = static_cast<int>(active.size());
    std::vector<Track> tracks = track_corners(frames[t], frames[t + 1], active);
    if (masks) {
      const Mask& next_mask = (*masks)[t + 1];
      for (Track& tr : tracks) {
        if (!tr.valid) continue;
        int x = std::clamp(static_cast<int>(std::lround(tr.to.x())), 0, next_mask.width - 1);
        int y = std::clamp(static_cast<int>(std::lround(tr.to.y())), 0, next_mask.height - 1);
        if (next_mask.at(x, y)) tr.valid = false;
      }
    }
    for (const Track& tr : tracks) log.tracked += tr.valid ? 1 : 0;

    Pose rel;
    VoParams pair_params = params;
    pair_params.seed = derive_seed(params.seed, "pair") + t;
    try {
      EssentialResult ess = estimate_essential(tracks, k, pair_params);
      std::vector<Track> inlier_tracks;
      for (std::size_t i = 0; i < tracks.size(); ++i)
        if (ess.inliers[i]) inlier_tracks.push_back(tracks[i]);
      rel = recover_pose(ess.e, inlier_tracks, k);
      log.inliers = ess.inlier_count;
    } catch (const Error& err) {
      if (err.code() != Errc::insufficient_points && err.code() != Errc::no_consensus &&
          err.code() != Errc::degenerate_configuration)
        throw;
      log.held = true;
      ++held;
      rel = Pose::identity();
    }
    res.trajectory.push_back({ts(t + 1), res.trajectory.back().pose.compose(rel.inverse())});

    std::vector<Keypoint> next;
    for (std::size_t i = 0; i < tracks.size(); ++i)
      if (tracks[i].valid) next.push_back({tracks[i].to, active[i].response});
    active = std::move(next);
    res.pairs.push_back(log);
  }
  res.failed = 4 * held >= static_cast<int>(frames.size() - 1);
  return res;
}

inline nlohmann::json run_log_json(const VoResult& res) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const PairLog& p : res.pairs) {
    pairs.push_back({{"features", p.features},
                     {"tracked", p.tracked},
                     {"inliers", p.inliers},
                     {"held", p.held}});
  }
  int held = 0;
  for (const PairLog& p : res.pairs) held += p.held ? 1 : 0;
  return {{"pairs", pairs},
          {"pair_count", res.pairs.size()},
          {"held_pairs", held},
          {"failed", res.failed}};
}

}  // namespace stasis::minivo
