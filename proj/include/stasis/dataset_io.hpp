// On-disk formats: binary PGM/PPM rasters, Middlebury .flo flow fields,
// TUM and KITTI trajectory text.
//
// All binary multi-byte values in .flo files are little-endian regardless of
// host order. Trajectory parsing normalizes quaternions on ingest.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stasis/error.hpp"
#include "stasis/geometry.hpp"
#include "stasis/image.hpp"

namespace stasis::io {

enum class TrajectoryFormat { tum, kitti };

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), Errc::file_not_found, path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  require(!in.bad(), Errc::io_failure, path);
  return bytes;
}

// PNM header tokenizer: skips whitespace and '#' comments up to the last
// header token; the single whitespace byte after maxval delimits the raster.
struct PnmCursor {
  const std::vector<std::uint8_t>& data;
  std::size_t pos = 0;

  std::string next_token(const std::string& path) {
    while (pos < data.size()) {
      std::uint8_t c = data[pos];
      if (c == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(c)) {
        ++pos;
      } else {
        break;
      }
    }
    require(pos < data.size(), Errc::truncated_data, path + ": header ends early");
    std::size_t start = pos;
    while (pos < data.size() && !std::isspace(data[pos]) && data[pos] != '#') ++pos;
    return std::string(data.begin() + start, data.begin() + pos);
  }

  int next_int(const std::string& path) {
    std::string tok = next_token(path);
    try {
      std::size_t used = 0;
      int v = std::stoi(tok, &used);
      require(used == tok.size(), Errc::parse_error, path + ": bad header token '" + tok + "'");
      return v;
    } catch (const Error&) {
      throw;
    } catch (...) {
      throw Error(Errc::parse_error, path + ": bad header token '" + tok + "'");
    }
  }
};

inline void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float get_f32_le(const std::uint8_t* p) {
  std::uint32_t bits = get_u32_le(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline void put_f32_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32_le(out, bits);
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.is_open(), Errc::io_failure, "cannot open for write: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(out.good(), Errc::io_failure, "write failed: " + path);
}

}  // namespace detail

inline Frame load_frame(const std::string& path) {
  std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
  detail::PnmCursor cur{bytes};
  std::string magic = cur.next_token(path);
  require(magic == "P5" || magic == "P6", Errc::bad_magic, path + ": magic '" + magic + "'");
  int w = cur.next_int(path);
  int h = cur.next_int(path);
  int maxval = cur.next_int(path);
  require(w > 0 && h > 0, Errc::bad_dimensions, path);
  require(maxval == 255, Errc::bad_maxval, path + ": maxval " + std::to_string(maxval));
  require(cur.pos < bytes.size() && std::isspace(bytes[cur.pos]), Errc::truncated_data,
          path + ": missing raster");
  ++cur.pos;  // single whitespace after maxval

  std::size_t npix = static_cast<std::size_t>(w) * h;
  Frame f(w, h);
  if (magic == "P5") {
    require(bytes.size() - cur.pos >= npix, Errc::truncated_data, path);
    std::copy(bytes.begin() + cur.pos, bytes.begin() + cur.pos + npix, f.pixels.begin());
  } else {
    require(bytes.size() - cur.pos >= 3 * npix, Errc::truncated_data, path);
    const std::uint8_t* p = bytes.data() + cur.pos;
    for (std::size_t i = 0; i < npix; ++i) {
      double y = 0.299 * p[3 * i] + 0.587 * p[3 * i + 1] + 0.114 * p[3 * i + 2];
      f.pixels[i] = static_cast<std::uint8_t>(std::lround(y));
    }
  }
  return f;
}

inline void store_frame(const Frame& f, const std::string& path) {
  require(f.width > 0 && f.height > 0, Errc::bad_dimensions, "empty frame");
  require(f.pixels.size() == static_cast<std::size_t>(f.width) * f.height,
          Errc::dimension_mismatch, "pixel buffer size");
  std::string out = "P5\n" + std::to_string(f.width) + " " + std::to_string(f.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(f.pixels.data()), f.pixels.size());
  detail::write_file_bytes(path, out);
}

inline constexpr float kFlowMagic = 202021.25f;

inline FlowField read_flow(const std::string& path) {
  std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
  require(bytes.size() >= 12, Errc::truncated_data, path);
  float magic = detail::get_f32_le(bytes.data());
  require(magic == kFlowMagic, Errc::bad_magic, path + ": flow magic mismatch");
  std::int32_t w = static_cast<std::int32_t>(detail::get_u32_le(bytes.data() + 4));
  std::int32_t h = static_cast<std::int32_t>(detail::get_u32_le(bytes.data() + 8));
  require(w > 0 && h > 0 && w < (1 << 20) && h < (1 << 20), Errc::bad_dimensions, path);
  std::size_t npix = static_cast<std::size_t>(w) * h;
  require(bytes.size() - 12 >= 8 * npix, Errc::truncated_data, path);
  FlowField flow(w, h);
  const std::uint8_t* p = bytes.data() + 12;
  for (std::size_t i = 0; i < npix; ++i) {
    flow.u[i] = detail::get_f32_le(p + 8 * i);
    flow.v[i] = detail::get_f32_le(p + 8 * i + 4);
    require(std::isfinite(flow.u[i]) && std::isfinite(flow.v[i]), Errc::non_finite_value, path);
  }
  return flow;
}

inline void write_flow(const FlowField& flow, const std::string& path) {
  require(flow.width > 0 && flow.height > 0, Errc::bad_dimensions, "empty flow");
  std::size_t npix = static_cast<std::size_t>(flow.width) * flow.height;
  require(flow.u.size() == npix && flow.v.size() == npix, Errc::dimension_mismatch,
          "flow buffer size");
  std::string out;
  out.reserve(12 + 8 * npix);
  detail::put_f32_le(out, kFlowMagic);
  detail::put_u32_le(out, static_cast<std::uint32_t>(flow.width));
  detail::put_u32_le(out, static_cast<std::uint32_t>(flow.height));
  for (std::size_t i = 0; i < npix; ++i) {
    require(std::isfinite(flow.u[i]) && std::isfinite(flow.v[i]), Errc::non_finite_value,
            "flow contains non-finite values");
    detail::put_f32_le(out, flow.u[i]);
    detail::put_f32_le(out, flow.v[i]);
  }
  detail::write_file_bytes(path, out);
}

// Masks are stored as P5 with 0 (static) / 255 (dynamic).
inline void store_mask(const Mask& m, const std::string& path) {
  Frame f(m.width, m.height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) f.pixels[i] = m.bits[i] ? 255 : 0;
  store_frame(f, path);
}

inline Mask load_mask(const std::string& path) {
  Frame f = load_frame(path);
  Mask m(f.width, f.height);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) m.bits[i] = f.pixels[i] > 127 ? 1 : 0;
  return m;
}

inline Trajectory parse_trajectory(const std::string& text, TrajectoryFormat format) {
  Trajectory traj;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  int pose_index = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (!ls.eof()) {
      throw Error(Errc::parse_error, "line " + std::to_string(lineno) + ": non-numeric token");
    }
    if (vals.empty()) continue;

    for (double x : vals) {
      require(std::isfinite(x), Errc::non_finite_value, "line " + std::to_string(lineno));
    }

    StampedPose sp;
    if (format == TrajectoryFormat::tum) {
      require(vals.size() == 8, Errc::parse_error,
              "line " + std::to_string(lineno) + ": expected 8 values, got " +
                  std::to_string(vals.size()));
      sp.timestamp = vals[0];
      sp.pose.t = Vec3(vals[1], vals[2], vals[3]);
      sp.pose.q = Quat{vals[4], vals[5], vals[6], vals[7]}.normalized();
    } else {
      require(vals.size() == 12, Errc::parse_error,
              "line " + std::to_string(lineno) + ": expected 12 values, got " +
                  std::to_string(vals.size()));
      Mat3 r;
      r << vals[0], vals[1], vals[2], vals[4], vals[5], vals[6], vals[8], vals[9], vals[10];
      require(is_orthonormal(r, 1e-3), Errc::not_orthonormal, "line " + std::to_string(lineno));
      sp.timestamp = pose_index;
      sp.pose.q = Quat::from_matrix(r);
      sp.pose.t = Vec3(vals[3], vals[7], vals[11]);
    }
    if (!traj.empty()) {
      require(sp.timestamp >= traj.back().timestamp, Errc::parse_error,
              "line " + std::to_string(lineno) + ": timestamps decrease");
    }
    traj.push_back(sp);
    ++pose_index;
  }
  return traj;
}

// Reals carry 9 significant digits; TUM timestamps print with 9 fixed
// decimals so sub-nanosecond clocks stay aligned column-wise.
inline std::string serialize_trajectory(const Trajectory& traj, TrajectoryFormat format) {
  std::string out;
  char buf[64];
  auto real = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  for (const auto& sp : traj) {
    if (format == TrajectoryFormat::tum) {
      std::snprintf(buf, sizeof(buf), "%.9f", sp.timestamp);
      out += buf;
      const Quat& q = sp.pose.q;
      for (double v : {sp.pose.t.x(), sp.pose.t.y(), sp.pose.t.z(), q.x, q.y, q.z, q.w}) {
        out += " " + real(v);
      }
    } else {
      require(sp.timestamp == std::floor(sp.timestamp), Errc::non_integer_timestamp,
              "kitti output needs frame-index timestamps");
      Mat3 r = sp.pose.q.matrix();
      const Vec3& t = sp.pose.t;
      bool first = true;
      for (int row = 0; row < 3; ++row) {
        for (double v : {r(row, 0), r(row, 1), r(row, 2), t(row)}) {
          if (!first) out += " ";
          out += real(v);
          first = false;
        }
      }
    }
    out += "\n";
  }
  return out;
}

inline Trajectory load_trajectory(const std::string& path, TrajectoryFormat format) {
  std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
  return parse_trajectory(std::string(bytes.begin(), bytes.end()), format);
}

inline void store_trajectory(const Trajectory& traj, const std::string& path,
                             TrajectoryFormat format) {
  detail::write_file_bytes(path, serialize_trajectory(traj, format));
}

// Greedy in-order nearest-neighbor timestamp association. For each pose of
// `a`, the closest still-unmatched pose of `b` within max_diff is claimed;
// ties resolve to the earlier b-index.
inline std::vector<std::pair<std::size_t, std::size_t>> associate_timestamps(
    const Trajectory& a, const Trajectory& b, double max_diff) {
  require(max_diff > 0.0, Errc::bad_parameter, "max_diff must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<bool> used(b.size(), false);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double ta = a[i].timestamp;
    // b is sorted; start at the insertion point and widen to both sides.
    std::size_t lo = 0, hi = b.size();
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (b[mid].timestamp < ta) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    double best_dt = max_diff;
    std::size_t best_j = b.size();
    auto consider = [&](std::size_t j) {
      if (j >= b.size() || used[j]) return;
      double dt = std::abs(b[j].timestamp - ta);
      if (dt < best_dt || (dt == best_dt && j < best_j)) {
        best_dt = dt;
        best_j = j;
      }
    };
    // Walk left and right until timestamps alone exceed the current bound.
    for (std::size_t j = lo; j < b.size(); ++j) {
      if (b[j].timestamp - ta > best_dt) break;
      consider(j);
    }
    for (std::size_t k = lo; k-- > 0;) {
      if (ta - b[k].timestamp > best_dt) break;
      consider(k);
    }
    if (best_j < b.size()) {
      used[best_j] = true;
      pairs.emplace_back(i, best_j);
    }
  }
  return pairs;
}

inline std::string frame_filename(const std::string& pattern, int index) {
  char buf[512];
  int n = std::snprintf(buf, sizeof(buf), pattern.c_str(), index);
  require(n > 0 && n < static_cast<int>(sizeof(buf)), Errc::bad_parameter,
          "bad filename pattern: " + pattern);
  return std::string(buf, static_cast<std::size_t>(n));
}

// Loads frames dir/pattern(0), dir/pattern(1), ... until the first missing
// index. Timestamps are assigned as index / fps.
inline std::vector<Frame> load_sequence(const std::string& dir, const std::string& pattern,
                                        double fps) {
  require(fps > 0.0, Errc::bad_parameter, "fps must be positive");
  std::vector<Frame> frames;
  for (int i = 0;; ++i) {
    std::filesystem::path p = std::filesystem::path(dir) / frame_filename(pattern, i);
    if (!std::filesystem::exists(p)) break;
    Frame f = load_frame(p.string());
    f.index = i;
    f.timestamp = i / fps;
    frames.push_back(std::move(f));
  }
  require(!frames.empty(), Errc::file_not_found, dir + ": no frames match " + pattern);
  return frames;
}

inline void store_sequence(const std::vector<Frame>& frames, const std::string& dir,
                           const std::string& pattern) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::filesystem::path p =
        std::filesystem::path(dir) / frame_filename(pattern, static_cast<int>(i));
    store_frame(frames[i], p.string());
  }
}

}  // namespace stasis::io
