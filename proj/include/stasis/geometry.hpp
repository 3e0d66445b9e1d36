// Rigid-body and projective geometry primitives.
//
// Conventions:
//  - Quaternions are stored as (x, y, z, w), Hamilton product, unit norm.
//  - Pose is body-to-world: x_world = R * x_body + t.
//  - Homogeneous 3x3 homographies map source pixels to destination pixels.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <vector>

#include "stasis/error.hpp"

namespace stasis {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct Quat {
  double x = 0.0, y = 0.0, z = 0.0, w = 1.0;

  static Quat identity() { return {}; }

  double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }

  Quat normalized() const {
    double n = norm();
    require(n > 1e-300, Errc::non_finite_value, "zero quaternion");
    return {x / n, y / n, z / n, w / n};
  }

  Quat conjugate() const { return {-x, -y, -z, w}; }

  // Hamilton product, R(a*b) = R(a) R(b).
  Quat operator*(const Quat& o) const {
    return {w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w,
            w * o.w - x * o.x - y * o.y - z * o.z};
  }

  Vec3 rotate(const Vec3& p) const {
    Vec3 qv(x, y, z);
    Vec3 t = 2.0 * qv.cross(p);
    return p + w * t + qv.cross(t);
  }

  Mat3 matrix() const {
    Mat3 r;
    double xx = x * x, yy = y * y, zz = z * z;
    double xy = x * y, xz = x * z, yz = y * z;
    double wx = w * x, wy = w * y, wz = w * z;
    r << 1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy),
        2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx),
        2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy);
    return r;
  }

  // Shepperd's method: pick the largest diagonal pivot for stability.
  static Quat from_matrix(const Mat3& m) {
    Quat q;
    double tr = m(0, 0) + m(1, 1) + m(2, 2);
    if (tr > 0.0) {
      double s = std::sqrt(tr + 1.0) * 2.0;
      q.w = 0.25 * s;
      q.x = (m(2, 1) - m(1, 2)) / s;
      q.y = (m(0, 2) - m(2, 0)) / s;
      q.z = (m(1, 0) - m(0, 1)) / s;
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
      double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
      q.w = (m(2, 1) - m(1, 2)) / s;
      q.x = 0.25 * s;
      q.y = (m(0, 1) + m(1, 0)) / s;
      q.z = (m(0, 2) + m(2, 0)) / s;
    } else if (m(1, 1) > m(2, 2)) {
      double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
      q.w = (m(0, 2) - m(2, 0)) / s;
      q.x = (m(0, 1) + m(1, 0)) / s;
      q.y = 0.25 * s;
      q.z = (m(1, 2) + m(2, 1)) / s;
    } else {
      double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
      q.w = (m(1, 0) - m(0, 1)) / s;
      q.x = (m(0, 2) + m(2, 0)) / s;
      q.y = (m(1, 2) + m(2, 1)) / s;
      q.z = 0.25 * s;
    }
    return q.normalized();
  }
};

struct Pose {
  Quat q;
  Vec3 t = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return q.rotate(p) + t; }

  Pose compose(const Pose& o) const {
    Pose r;
    r.q = (q * o.q).normalized();
    r.t = q.rotate(o.t) + t;
    return r;
  }

  Pose inverse() const {
    Pose r;
    r.q = q.conjugate();
    r.t = -r.q.rotate(t);
    return r;
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = q.matrix();
    m.block<3, 1>(0, 3) = t;
    return m;
  }

  static Pose from_matrix(const Mat4& m) {
    Pose p;
    p.q = Quat::from_matrix(m.block<3, 3>(0, 0));
    p.t = m.block<3, 1>(0, 3);
    return p;
  }
};

struct StampedPose {
  double timestamp = 0.0;
  Pose pose;
};

using Trajectory = std::vector<StampedPose>;

// Pinhole camera intrinsics (no distortion model).
struct Intrinsics {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;

  void validate() const {
    require(fx > 0.0 && fy > 0.0, Errc::bad_parameter, "focal lengths must be positive");
  }
  Vec2 normalize(const Vec2& px) const { return {(px.x() - cx) / fx, (px.y() - cy) / fy}; }
};

// Camera-frame point to pixel. Only points strictly in front of the camera
// project; z <= 0 throws rather than returning a reflected pixel.
inline Vec2 project(const Intrinsics& k, const Vec3& p_cam) {
  require(p_cam.z() > 0.0, Errc::behind_camera, "point is behind the camera");
  return {k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy};
}

inline bool is_orthonormal(const Mat3& r, double tol) {
  Mat3 e = r.transpose() * r - Mat3::Identity();
  return e.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

// Rotation angle in radians, clamped against round-off outside [-1, 1].
inline double rotation_angle(const Mat3& r) {
  double c = (r.trace() - 1.0) * 0.5;
  c = std::min(1.0, std::max(-1.0, c));
  return std::acos(c);
}

struct Sim3 {
  double scale = 1.0;
  Quat q;
  Vec3 t = Vec3::Zero();

  static Sim3 identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return scale * q.rotate(p) + t; }

  // Acting on a body-to-world pose: positions map through `apply`, the
  // orientation is left-composed with the rotation part. Scale does not
  // change orientation.
  Pose transform_pose(const Pose& p) const {
    Pose r;
    r.q = (q * p.q).normalized();
    r.t = apply(p.t);
    return r;
  }
};

// Closed-form least-squares alignment dst_i ~ s R src_i + t over point pairs
// (Umeyama). `with_scale` toggles Sim(3) vs SE(3). Throws when the point-set
// covariance has rank < 2, which leaves the rotation unconstrained.
inline Sim3 umeyama_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                          bool with_scale) {
  require(src.size() == dst.size(), Errc::dimension_mismatch, "point count mismatch");
  require(src.size() >= 3, Errc::insufficient_points, "umeyama needs >= 3 pairs");
  const double n = static_cast<double>(src.size());

  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Mat3 cov = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    Vec3 ds = src[i] - mu_s;
    Vec3 dd = dst[i] - mu_d;
    cov += dd * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov /= n;
  var_s /= n;

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 sigma = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < 3; ++i) {
    if (sigma(i) > 1e-12 * std::max(sigma(0), 1e-300)) ++rank;
  }
  require(rank >= 2, Errc::degenerate_configuration, "point covariance rank < 2");

  Mat3 s_fix = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s_fix(2, 2) = -1.0;

  Mat3 rot = svd.matrixU() * s_fix * svd.matrixV().transpose();

  Sim3 out;
  out.q = Quat::from_matrix(rot);
  if (with_scale) {
    require(var_s > 1e-300, Errc::degenerate_configuration, "zero source variance");
    out.scale = (sigma.asDiagonal().toDenseMatrix() * s_fix).trace() / var_s;
  }
  out.t = mu_d - out.scale * rot * mu_s;
  return out;
}

// Normalized DLT homography from >= 4 correspondences (Hartley scaling:
// centroid to origin, mean radius sqrt(2)). Solved by SVD of the full 2n x 9
// stack; the solution is flagged degenerate when the nullspace is not
// one-dimensional (collinear or repeated points).
inline Mat3 fit_homography_dlt(const std::vector<Vec2>& src, const std::vector<Vec2>& dst) {
  require(src.size() == dst.size(), Errc::dimension_mismatch, "point count mismatch");
  const std::size_t n = src.size();
  require(n >= 4, Errc::insufficient_points, "homography needs >= 4 pairs");

  auto normalize = [](const std::vector<Vec2>& pts, Mat3& t_out) {
    Vec2 mu = Vec2::Zero();
    for (const auto& p : pts) mu += p;
    mu /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - mu).norm();
    mean_dist /= static_cast<double>(pts.size());
    double s = mean_dist > 1e-300 ? std::sqrt(2.0) / mean_dist : 1.0;
    t_out << s, 0, -s * mu.x(), 0, s, -s * mu.y(), 0, 0, 1;
    std::vector<Vec2> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = s * (pts[i] - mu);
    return out;
  };

  Mat3 t_src, t_dst;
  std::vector<Vec2> ns = normalize(src, t_src);
  std::vector<Vec2> nd = normalize(dst, t_dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    double x = ns[i].x(), y = ns[i].y();
    double xp = nd[i].x(), yp = nd[i].y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, xp * x, xp * y, xp;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, yp * x, yp * y, yp;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // The stack must have rank 8 for a unique (up-to-scale) solution; with the
  // minimal 8 rows that is sv(7) > 0, and with more rows sv(7) is still the
  // deciding value since sv(8) is the least-squares residual.
  require(sv(7) > 1e-12 * std::max(sv(0), 1e-300), Errc::degenerate_configuration,
          "dlt stack rank < 8");

  Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Mat3 hh = t_dst.inverse() * hn * t_src;
  if (std::abs(hh(2, 2)) > 1e-12) hh /= hh(2, 2);
  return hh;
}

inline Vec2 apply_homography(const Mat3& h, const Vec2& p) {
  Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
  require(std::abs(q.z()) > 1e-15, Errc::degenerate_configuration, "point maps to infinity");
  return Vec2(q.x() / q.z(), q.y() / q.z());
}

// Non-throwing transfer residual for robust estimation loops: returns +inf
// when the point maps to the line at infinity.
inline double homography_transfer_error(const Mat3& h, const Vec2& src, const Vec2& dst) {
  Vec3 q = h * Vec3(src.x(), src.y(), 1.0);
  if (std::abs(q.z()) < 1e-15) return std::numeric_limits<double>::infinity();
  double dx = q.x() / q.z() - dst.x();
  double dy = q.y() / q.z() - dst.y();
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace stasis
