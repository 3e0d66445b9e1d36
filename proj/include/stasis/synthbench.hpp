#pragma once

// Synthetic monocular sequences with exact ground truth: trajectory, per-frame
// dynamic masks, dense flow, and a twin rendering without the moving objects.
// The world is a textured plane at depth d0 plus textured rectangular sprites
// on nearer planes; pinhole camera, OpenCV axes (x right, y down, z forward).
// Everything is evaluated procedurally from the seed, so renders are bitwise
// deterministic and independent of evaluation order.

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stasis/dataset_io.hpp"
#include "stasis/error.hpp"
#include "stasis/geometry.hpp"
#include "stasis/image.hpp"
#include "stasis/rng.hpp"

namespace stasis::synth {

struct CameraPath {
  enum class Kind { poses, straight, arc };
  Kind kind = Kind::poses;
  std::vector<Pose> poses;      // camera-to-world, one per frame; kind == poses
  Vec3 velocity = Vec3::Zero(); // m/s; kind == straight
  double speed = 0.0;           // m/s along the heading; kind == arc
  double yaw_rate = 0.0;        // rad/s about +y; kind == arc
};

struct SpriteSpec {
  Vec2 spawn_px = Vec2(0, 0);    // image position of the center at spawn
  Vec2 size_px = Vec2(0, 0);     // projected size at spawn
  double depth = 5.0;            // world z of the sprite plane at spawn
  Vec3 velocity = Vec3::Zero();  // m/s
  int spawn = 0;                 // first active frame
  int despawn = INT_MAX;         // first inactive frame
  bool dynamic = true;           // false: static scene structure, not masked
  double cell = 0.15;            // texture base cell, meters
  int octaves = 2;
};

struct SceneSpec {
  int width = 320;
  int height = 240;
  double focal = 260.0;            // fx == fy, principal point at the center
  double background_depth = 10.0;  // plane z = d0
  double background_cell = 1.0;    // texture base cell, meters
  int background_octaves = 3;
  CameraPath camera;
  std::vector<SpriteSpec> sprites;
  int frame_count = 2;
  double fps = 30.0;
  double noise_sigma = 0.0;  // additive Gaussian intensity noise
  bool supersample = false;  // 2x2 sub-rays per pixel
  std::uint64_t seed = 0;

  void validate() const {
    require(width > 0 && height > 0, Errc::bad_parameter, "image size must be positive");
    require(focal > 0.0, Errc::bad_parameter, "focal must be positive");
    require(background_depth > 0.0, Errc::bad_parameter, "background depth must be positive");
    require(background_cell > 0.0 && background_octaves >= 1, Errc::bad_parameter,
            "bad background texture parameters");
    require(frame_count >= 2, Errc::bad_parameter, "frame_count must be at least 2");
    require(fps > 0.0, Errc::bad_parameter, "fps must be positive");
    require(noise_sigma >= 0.0, Errc::bad_parameter, "noise_sigma must be non-negative");
    for (const SpriteSpec& s : sprites) {
      require(s.size_px.x() > 0.0 && s.size_px.y() > 0.0, Errc::degenerate_scene,
              "sprite has zero area");
      require(s.depth > 0.0, Errc::degenerate_scene, "sprite depth must be positive");
      require(s.spawn >= 0 && s.despawn > s.spawn, Errc::bad_parameter,
              "sprite spawn/despawn out of order");
      require(s.cell > 0.0 && s.octaves >= 1, Errc::bad_parameter,
              "bad sprite texture parameters");
    }
  }
};

struct SceneData {
  std::vector<Frame> frames;        // background + sprites
  std::vector<Frame> clean_frames;  // same render without dynamic sprites
  std::vector<Mask> gt_masks;       // exact dynamic-sprite footprints
  std::vector<FlowField> gt_flows;      // analytic flow, frame t -> t+1
  std::vector<FlowField> gt_flows_bwd;  // analytic flow, frame t+1 -> t
  Trajectory gt_trajectory;             // camera-to-world, timestamps t/fps
};

inline std::vector<Pose> camera_poses(const CameraPath& path, int frame_count, double fps) {
  require(frame_count >= 1, Errc::bad_parameter, "frame_count must be positive");
  require(fps > 0.0, Errc::bad_parameter, "fps must be positive");
  std::vector<Pose> out(static_cast<std::size_t>(frame_count));
  switch (path.kind) {
    case CameraPath::Kind::poses:
      require(static_cast<int>(path.poses.size()) >= frame_count, Errc::bad_parameter,
              "camera pose list shorter than frame_count");
      std::copy(path.poses.begin(), path.poses.begin() + frame_count, out.begin());
      break;
    case CameraPath::Kind::straight:
      for (int t = 0; t < frame_count; ++t) out[t].t = path.velocity * (t / fps);
      break;
    case CameraPath::Kind::arc: {
      // heading-aligned yaw; the position integrates one straight step per frame
      Vec3 p = Vec3::Zero();
      for (int t = 0; t < frame_count; ++t) {
        double theta = path.yaw_rate * (t / fps);
        out[t].t = p;
        out[t].q = Quat{0.0, std::sin(theta / 2.0), 0.0, std::cos(theta / 2.0)};
        p += (path.speed / fps) * Vec3(std::sin(theta), 0.0, std::cos(theta));
      }
      break;
    }
  }
  return out;
}

namespace detail {

// lattice hash -> [0,1); octave folded into the mix so one splitmix call per tap
inline double lattice01(std::uint64_t seed, std::int64_t i, std::int64_t j, int octave) {
  std::uint64_t h = splitmix64(seed ^ static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ull ^
                               static_cast<std::uint64_t>(j) * 0xC2B2AE3D27D4EB4Full ^
                               static_cast<std::uint64_t>(octave) * 0xD6E8FEB86659FD93ull);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// smoothed value noise over world coordinates, amplitude halves per octave
inline double value_noise(std::uint64_t seed, double x, double y, double cell, int octaves) {
  double acc = 0.0, amp = 1.0, norm = 0.0, freq = 1.0;
  for (int o = 0; o < octaves; ++o) {
    double sx = x * freq / cell, sy = y * freq / cell;
    double fx = std::floor(sx), fy = std::floor(sy);
    auto i = static_cast<std::int64_t>(fx);
    auto j = static_cast<std::int64_t>(fy);
    double ux = sx - fx, uy = sy - fy;
    ux = ux * ux * (3.0 - 2.0 * ux);
    uy = uy * uy * (3.0 - 2.0 * uy);
    double v00 = lattice01(seed, i, j, o), v10 = lattice01(seed, i + 1, j, o);
    double v01 = lattice01(seed, i, j + 1, o), v11 = lattice01(seed, i + 1, j + 1, o);
    acc += amp * ((1.0 - uy) * ((1.0 - ux) * v00 + ux * v10) +
                  uy * ((1.0 - ux) * v01 + ux * v11));
    norm += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return acc / norm;
}

struct SpriteState {
  bool active = false;
  bool dynamic = true;
  Vec3 center = Vec3::Zero();
  Vec3 step = Vec3::Zero();  // meters per frame
  double hw = 0.0, hh = 0.0; // half extents, meters
  std::uint64_t tex_seed = 0;
  double cell = 0.15;
  int octaves = 2;
};

struct SceneContext {
  const SceneSpec* spec = nullptr;
  std::vector<Pose> poses;
  std::vector<std::vector<SpriteState>> states;  // [frame][sprite]
  std::uint64_t bg_seed = 0;
  double cx = 0.0, cy = 0.0;
};

inline SceneContext make_context(const SceneSpec& spec) {
  spec.validate();
  SceneContext ctx;
  ctx.spec = &spec;
  ctx.poses = camera_poses(spec.camera, spec.frame_count, spec.fps);
  ctx.bg_seed = derive_seed(spec.seed, "background");
  ctx.cx = (spec.width - 1) / 2.0;
  ctx.cy = (spec.height - 1) / 2.0;

  for (int t = 0; t < spec.frame_count; ++t) {
    const Pose& p = ctx.poses[t];
    require(p.t.z() < spec.background_depth - 1e-2, Errc::degenerate_scene,
            "camera at or behind the background plane");
    for (double u : {0.0, double(spec.width - 1)}) {
      for (double v : {0.0, double(spec.height - 1)}) {
        Vec3 dir = p.q.rotate(Vec3((u - ctx.cx) / spec.focal, (v - ctx.cy) / spec.focal, 1.0));
        require(dir.z() > 1e-6, Errc::degenerate_scene,
                "camera not front-facing the background plane");
      }
    }
  }

  ctx.states.resize(static_cast<std::size_t>(spec.frame_count));
  for (std::size_t i = 0; i < spec.sprites.size(); ++i) {
    const SpriteSpec& s = spec.sprites[i];
    int spawn = std::min(s.spawn, spec.frame_count - 1);
    const Pose& p0 = ctx.poses[spawn];
    Vec3 dir = p0.q.rotate(
        Vec3((s.spawn_px.x() - ctx.cx) / spec.focal, (s.spawn_px.y() - ctx.cy) / spec.focal, 1.0));
    require(dir.z() > 1e-9, Errc::degenerate_scene, "sprite spawn ray parallel to its plane");
    double range = (s.depth - p0.t.z()) / dir.z();
    require(range > 1e-6, Errc::degenerate_scene, "sprite spawns behind the camera");
    Vec3 center0 = p0.t + range * dir;
    double dist0 = s.depth - p0.t.z();
    SpriteState st;
    st.dynamic = s.dynamic;
    st.step = s.velocity / spec.fps;
    st.hw = 0.5 * s.size_px.x() * dist0 / spec.focal;
    st.hh = 0.5 * s.size_px.y() * dist0 / spec.focal;
    st.tex_seed = derive_seed(spec.seed, "sprite-" + std::to_string(i));
    st.cell = s.cell;
    st.octaves = s.octaves;
    for (int t = 0; t < spec.frame_count; ++t) {
      st.active = t >= s.spawn && t < s.despawn;
      st.center = center0 + st.step * (t - spawn);
      if (st.active)
        require(st.center.z() - ctx.poses[t].t.z() > 1e-2, Errc::degenerate_scene,
                "sprite reaches the camera plane");
      ctx.states[t].push_back(st);
    }
  }
  return ctx;
}

struct Hit {
  int surf = -1;  // -1: background plane, else sprite index
  Vec3 world = Vec3::Zero();
};

inline Hit cast_ray(const SceneContext& ctx, int t, double u, double v, bool include_dynamic) {
  const SceneSpec& spec = *ctx.spec;
  const Pose& p = ctx.poses[t];
  Vec3 dir = p.q.rotate(Vec3((u - ctx.cx) / spec.focal, (v - ctx.cy) / spec.focal, 1.0));
  require(dir.z() > 1e-9, Errc::degenerate_scene, "view ray misses the background plane");
  double best = (spec.background_depth - p.t.z()) / dir.z();
  Hit hit;
  hit.world = p.t + best * dir;
  const std::vector<SpriteState>& states = ctx.states[t];
  for (std::size_t i = 0; i < states.size(); ++i) {
    const SpriteState& st = states[i];
    if (!st.active || (st.dynamic && !include_dynamic)) continue;
    if (std::abs(dir.z()) < 1e-12) continue;
    double s = (st.center.z() - p.t.z()) / dir.z();
    if (s <= 1e-9 || s >= best) continue;
    Vec3 w = p.t + s * dir;
    if (std::abs(w.x() - st.center.x()) <= st.hw && std::abs(w.y() - st.center.y()) <= st.hh) {
      best = s;
      hit.surf = static_cast<int>(i);
      hit.world = w;
    }
  }
  return hit;
}

inline double shade(const SceneContext& ctx, int t, const Hit& hit) {
  const SceneSpec& spec = *ctx.spec;
  if (hit.surf < 0)
    return 20.0 + 215.0 * value_noise(ctx.bg_seed, hit.world.x(), hit.world.y(),
                                      spec.background_cell, spec.background_octaves);
  const SpriteState& st = ctx.states[t][static_cast<std::size_t>(hit.surf)];
  return 20.0 + 215.0 * value_noise(st.tex_seed, hit.world.x() - st.center.x(),
                                    hit.world.y() - st.center.y(), st.cell, st.octaves);
}

inline Vec2 project(const SceneContext& ctx, int t, const Vec3& world) {
  const Pose& p = ctx.poses[t];
  Vec3 q = p.q.conjugate().rotate(world - p.t);
  require(q.z() > 1e-9, Errc::degenerate_scene, "ground-truth point behind the camera");
  return {ctx.spec->focal * q.x() / q.z() + ctx.cx, ctx.spec->focal * q.y() / q.z() + ctx.cy};
}

// one frame in a given direction: source pixels cast in frame t, material points
// advanced by the per-sprite step times dt, reprojected into frame t + dt
inline FlowField analytic_flow(const SceneContext& ctx, int t, int dt) {
  const SceneSpec& spec = *ctx.spec;
  FlowField flow(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      Hit hit = cast_ray(ctx, t, x, y, true);
      Vec3 world = hit.world;
      if (hit.surf >= 0 && ctx.states[t][static_cast<std::size_t>(hit.surf)].dynamic)
        world += ctx.states[t][static_cast<std::size_t>(hit.surf)].step * dt;
      Vec2 moved = project(ctx, t + dt, world);
      std::size_t k = flow.idx(x, y);
      flow.u[k] = static_cast<float>(moved.x() - x);
      flow.v[k] = static_cast<float>(moved.y() - y);
    }
  }
  return flow;
}

}  // namespace detail

inline SceneData generate_scene(const SceneSpec& spec) {
  detail::SceneContext ctx = detail::make_context(spec);
  const int w = spec.width, h = spec.height, n = spec.frame_count;
  SceneData data;
  data.frames.reserve(n);
  data.clean_frames.reserve(n);
  data.gt_masks.reserve(n);

  std::vector<double> offsets =
      spec.supersample ? std::vector<double>{-0.25, 0.25} : std::vector<double>{0.0};
  std::vector<double> full(static_cast<std::size_t>(w) * h);
  std::vector<double> clean(static_cast<std::size_t>(w) * h);

  for (int t = 0; t < n; ++t) {
    Mask mask(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double accf = 0.0, accc = 0.0;
        bool dyn = false;
        for (double dy : offsets) {
          for (double dx : offsets) {
            detail::Hit hf = detail::cast_ray(ctx, t, x + dx, y + dy, true);
            accf += detail::shade(ctx, t, hf);
            if (hf.surf >= 0 && ctx.states[t][static_cast<std::size_t>(hf.surf)].dynamic)
              dyn = true;
            detail::Hit hc = detail::cast_ray(ctx, t, x + dx, y + dy, false);
            accc += detail::shade(ctx, t, hc);
          }
        }
        double inv = 1.0 / (offsets.size() * offsets.size());
        std::size_t k = static_cast<std::size_t>(y) * w + x;
        full[k] = accf * inv;
        clean[k] = accc * inv;
        mask.bits[k] = dyn ? 1 : 0;
      }
    }
    if (spec.noise_sigma > 0.0) {
      // the same realization on both twins so they stay equal outside the masks
      Rng rng(derive_seed(spec.seed, "noise") + static_cast<std::uint64_t>(t));
      for (std::size_t k = 0; k < full.size(); ++k) {
        double e = rng.gaussian(0.0, spec.noise_sigma);
        full[k] += e;
        clean[k] += e;
      }
    }
    Frame ff(w, h), fc(w, h);
    ff.index = fc.index = t;
    ff.timestamp = fc.timestamp = t / spec.fps;
    for (std::size_t k = 0; k < full.size(); ++k) {
      ff.pixels[k] = to_u8(full[k]);
      fc.pixels[k] = to_u8(clean[k]);
    }
    data.frames.push_back(std::move(ff));
    data.clean_frames.push_back(std::move(fc));
    data.gt_masks.push_back(std::move(mask));
    data.gt_trajectory.push_back({t / spec.fps, ctx.poses[t]});
  }

  data.gt_flows.reserve(n - 1);
  data.gt_flows_bwd.reserve(n - 1);
  for (int t = 0; t + 1 < n; ++t) {
    data.gt_flows.push_back(detail::analytic_flow(ctx, t, +1));
    data.gt_flows_bwd.push_back(detail::analytic_flow(ctx, t + 1, -1));
  }
  return data;
}

namespace detail {

// constant-speed lateral path whose z follows one sine cycle: positions are
// planar but not collinear, so similarity alignment on them is well posed
inline std::vector<Pose> s_curve_path(int n, double step_m, double z_amp) {
  std::vector<Pose> out(static_cast<std::size_t>(n));
  Vec3 p = Vec3::Zero();
  for (int t = 0; t < n; ++t) {
    out[t].t = p;
    double dz = z_amp * (2.0 * M_PI / (n - 1)) * std::cos(2.0 * M_PI * t / (n - 1));
    p += Vec3(std::sqrt(step_m * step_m - dz * dz), 0.0, dz);
  }
  return out;
}

}  // namespace detail

inline SceneSpec preset(const std::string& name) {
  SceneSpec spec;
  spec.width = 320;
  spec.height = 240;
  spec.focal = 260.0;
  spec.background_depth = 10.0;
  spec.fps = 30.0;
  spec.seed = 42;
  if (name == "static_cam") {
    spec.frame_count = 20;
    spec.camera.kind = CameraPath::Kind::straight;
    spec.camera.velocity = Vec3::Zero();
    return spec;
  }
  if (name == "moving_cam_clean") {
    spec.frame_count = 30;
    spec.camera.kind = CameraPath::Kind::poses;
    spec.camera.poses = detail::s_curve_path(spec.frame_count, 0.2, 0.5);
    return spec;
  }
  if (name == "moving_cam_dynamic_small") {
    // sprite visible 2 of 60 frames (3.3%) at 40x30 px (1.6% of pixels)
    spec.frame_count = 60;
    spec.camera.kind = CameraPath::Kind::poses;
    spec.camera.poses = detail::s_curve_path(spec.frame_count, 0.2, 0.5);
    SpriteSpec s;
    s.spawn_px = Vec2(160, 120);
    s.size_px = Vec2(40, 30);
    s.depth = 5.0;
    s.velocity = Vec3(6.0, 0.0, 0.0);  // paces the 0.2 m/frame camera strafe
    s.spawn = 30;
    s.despawn = 32;
    spec.sprites.push_back(s);
    return spec;
  }
  if (name == "moving_cam_dynamic_large") {
    // sprite visible 95 of 100 frames at ~10% pixel coverage; it paces the
    // camera so its image stays put while the background streams past, plus a
    // slow vertical drift of about 0.2 px/frame
    spec.frame_count = 100;
    spec.camera.kind = CameraPath::Kind::poses;
    spec.camera.poses = detail::s_curve_path(spec.frame_count, 0.2, 0.5);
    SpriteSpec s;
    s.spawn_px = Vec2(160, 105);
    s.size_px = Vec2(88, 88);
    s.depth = 5.0;
    s.velocity = Vec3(6.0, 0.11538, 0.0);
    s.spawn = 3;
    s.despawn = 98;
    s.cell = 0.12;
    spec.sprites.push_back(s);
    return spec;
  }
  throw Error(Errc::unknown_preset, "unknown preset: " + name);
}

inline void to_json(nlohmann::json& j, const SpriteSpec& s) {
  j = nlohmann::json{{"spawn_px", {s.spawn_px.x(), s.spawn_px.y()}},
                     {"size_px", {s.size_px.x(), s.size_px.y()}},
                     {"depth", s.depth},
                     {"velocity", {s.velocity.x(), s.velocity.y(), s.velocity.z()}},
                     {"spawn", s.spawn},
                     {"despawn", s.despawn},
                     {"dynamic", s.dynamic},
                     {"cell", s.cell},
                     {"octaves", s.octaves}};
}

inline void from_json(const nlohmann::json& j, SpriteSpec& s) {
  s.spawn_px = Vec2(j.at("spawn_px").at(0).get<double>(), j.at("spawn_px").at(1).get<double>());
  s.size_px = Vec2(j.at("size_px").at(0).get<double>(), j.at("size_px").at(1).get<double>());
  s.depth = j.at("depth").get<double>();
  s.velocity = Vec3(j.at("velocity").at(0).get<double>(), j.at("velocity").at(1).get<double>(),
                    j.at("velocity").at(2).get<double>());
  s.spawn = j.at("spawn").get<int>();
  s.despawn = j.at("despawn").get<int>();
  s.dynamic = j.value("dynamic", true);
  s.cell = j.value("cell", 0.15);
  s.octaves = j.value("octaves", 2);
}

inline void to_json(nlohmann::json& j, const CameraPath& c) {
  switch (c.kind) {
    case CameraPath::Kind::poses: {
      nlohmann::json rows = nlohmann::json::array();
      for (const Pose& p : c.poses)
        rows.push_back({p.t.x(), p.t.y(), p.t.z(), p.q.x, p.q.y, p.q.z, p.q.w});
      j = nlohmann::json{{"kind", "poses"}, {"poses", rows}};
      break;
    }
    case CameraPath::Kind::straight:
      j = nlohmann::json{{"kind", "straight"},
                         {"velocity", {c.velocity.x(), c.velocity.y(), c.velocity.z()}}};
      break;
    case CameraPath::Kind::arc:
      j = nlohmann::json{{"kind", "arc"}, {"speed", c.speed}, {"yaw_rate", c.yaw_rate}};
      break;
  }
}

inline void from_json(const nlohmann::json& j, CameraPath& c) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "poses") {
    c.kind = CameraPath::Kind::poses;
    c.poses.clear();
    for (const nlohmann::json& row : j.at("poses")) {
      require(row.size() == 7, Errc::parse_error, "camera pose row needs 7 numbers");
      Pose p;
      p.t = Vec3(row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<double>());
      p.q = Quat{row.at(3).get<double>(), row.at(4).get<double>(), row.at(5).get<double>(),
                 row.at(6).get<double>()}
                .normalized();
      c.poses.push_back(p);
    }
  } else if (kind == "straight") {
    c.kind = CameraPath::Kind::straight;
    c.velocity = Vec3(j.at("velocity").at(0).get<double>(), j.at("velocity").at(1).get<double>(),
                      j.at("velocity").at(2).get<double>());
  } else if (kind == "arc") {
    c.kind = CameraPath::Kind::arc;
    c.speed = j.at("speed").get<double>();
    c.yaw_rate = j.at("yaw_rate").get<double>();
  } else {
    throw Error(Errc::parse_error, "unknown camera path kind: " + kind);
  }
}

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json{{"width", s.width},
                     {"height", s.height},
                     {"focal", s.focal},
                     {"background_depth", s.background_depth},
                     {"background_cell", s.background_cell},
                     {"background_octaves", s.background_octaves},
                     {"camera", s.camera},
                     {"sprites", s.sprites},
                     {"frame_count", s.frame_count},
                     {"fps", s.fps},
                     {"noise_sigma", s.noise_sigma},
                     {"supersample", s.supersample},
                     {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SceneSpec& s) {
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.focal = j.at("focal").get<double>();
  s.background_depth = j.at("background_depth").get<double>();
  s.background_cell = j.value("background_cell", 1.0);
  s.background_octaves = j.value("background_octaves", 3);
  s.camera = j.at("camera").get<CameraPath>();
  s.sprites.clear();
  if (j.contains("sprites"))
    for (const nlohmann::json& row : j.at("sprites")) s.sprites.push_back(row.get<SpriteSpec>());
  s.frame_count = j.at("frame_count").get<int>();
  s.fps = j.value("fps", 30.0);
  s.noise_sigma = j.value("noise_sigma", 0.0);
  s.supersample = j.value("supersample", false);
  s.seed = j.at("seed").get<std::uint64_t>();
}

// dataset layout: frames/, clean/, masks/, flows/, groundtruth.txt, spec.json
inline void write_scene(const std::filesystem::path& dir, const SceneSpec& spec,
                        const SceneData& data) {
  namespace fs = std::filesystem;
  io::store_sequence(data.frames, (dir / "frames").string(), "frame_%06d.pgm");
  io::store_sequence(data.clean_frames, (dir / "clean").string(), "frame_%06d.pgm");
  fs::create_directories(dir / "masks");
  for (std::size_t t = 0; t < data.gt_masks.size(); ++t)
    io::store_mask(data.gt_masks[t],
                   (dir / "masks" / io::frame_filename("mask_%06d.pgm", static_cast<int>(t))).string());
  fs::create_directories(dir / "flows");
  for (std::size_t t = 0; t < data.gt_flows.size(); ++t) {
    io::write_flow(data.gt_flows[t],
                   (dir / "flows" / io::frame_filename("flow_fwd_%06d.flo", static_cast<int>(t))).string());
    io::write_flow(data.gt_flows_bwd[t],
                   (dir / "flows" / io::frame_filename("flow_bwd_%06d.flo", static_cast<int>(t))).string());
  }
  io::store_trajectory(data.gt_trajectory, (dir / "groundtruth.txt").string(),
                       io::TrajectoryFormat::tum);
  nlohmann::json j = spec;
  std::ofstream out(dir / "spec.json", std::ios::binary);
  out << j.dump(2) << '\n';
  require(out.good(), Errc::io_failure, "cannot write scene spec json");
}

}  // namespace stasis::synth
