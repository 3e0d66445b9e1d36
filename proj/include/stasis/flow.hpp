// Dense optical flow: coarse-to-fine Horn-Schunck with a per-pixel block
// Jacobi solver, plus warping and forward/backward consistency utilities.
//
// Solver notes. At each pyramid level the second image is warped by the
// current flow estimate once, the brightness constraint is linearized around
// that warp, and `iterations` Jacobi sweeps refine the total flow w:
//
//   (alpha_eff^2 D I + g g^T) w_x = alpha_eff^2 D m - c g
//   w_x = m - g (g.m + c) / (alpha_eff^2 D + |g|^2)
//
// where g = (Ix, Iy), c = It - g.w0, m is the kernel-weighted average of the
// neighboring flow (weights 1/6 cardinal, 1/12 diagonal), and D the sum of
// in-bounds neighbor weights (1 in the interior). Because the update is the
// exact minimizer of the energy in w_x with neighbors frozen, and the kernel
// satisfies 2D - A >= 0, the discrete energy never increases across sweeps.
//
// Intensities are normalized to [0,1] internally; the user-facing alpha is
// quoted in 8-bit intensity units, so the solver uses alpha/255.
#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "stasis/error.hpp"
#include "stasis/image.hpp"

namespace stasis::flow {

struct FlowParams {
  int levels = 4;
  double alpha = 15.0;
  int iterations = 200;
};

namespace detail {

struct Grid {
  int w = 0;
  int h = 0;
  std::vector<float> v;

  float at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline Grid to_grid(const Frame& f) {
  Grid g;
  g.w = f.width;
  g.h = f.height;
  g.v.resize(f.pixels.size());
  for (std::size_t i = 0; i < f.pixels.size(); ++i) g.v[i] = f.pixels[i] / 255.0f;
  return g;
}

// 2x2 box average; odd sizes replicate the last row/column.
inline Grid downsample_box(const Grid& in) {
  Grid out;
  out.w = (in.w + 1) / 2;
  out.h = (in.h + 1) / 2;
  out.v.resize(static_cast<std::size_t>(out.w) * out.h);
  for (int y = 0; y < out.h; ++y) {
    int y0 = 2 * y;
    int y1 = std::min(2 * y + 1, in.h - 1);
    for (int x = 0; x < out.w; ++x) {
      int x0 = 2 * x;
      int x1 = std::min(2 * x + 1, in.w - 1);
      out.v[static_cast<std::size_t>(y) * out.w + x] =
          0.25f * (in.at(x0, y0) + in.at(x1, y0) + in.at(x0, y1) + in.at(x1, y1));
    }
  }
  return out;
}

// Bilinear x2 upsample to the exact finer dimensions; displacement values
// double because they are measured in pixels of the new grid.
inline FlowField upsample_flow_x2(const FlowField& coarse, int fine_w, int fine_h) {
  FlowField out(fine_w, fine_h);
  for (int y = 0; y < fine_h; ++y) {
    for (int x = 0; x < fine_w; ++x) {
      double sx = 0.5 * x;
      double sy = 0.5 * y;
      out.u[out.idx(x, y)] = 2.0f * sample_bilinear(coarse.u, coarse.width, coarse.height, sx, sy);
      out.v[out.idx(x, y)] = 2.0f * sample_bilinear(coarse.v, coarse.width, coarse.height, sx, sy);
    }
  }
  return out;
}

struct LinearizedLevel {
  std::vector<float> ix, iy, c;  // g and the constant term of g.w + c
  int w = 0, h = 0;
};

inline LinearizedLevel linearize(const Grid& i1, const Grid& i2, const FlowField& w0) {
  LinearizedLevel lin;
  lin.w = i1.w;
  lin.h = i1.h;
  std::size_t n = i1.v.size();
  std::vector<float> i2w(n), avg(n);
  for (int y = 0; y < i1.h; ++y) {
    for (int x = 0; x < i1.w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * i1.w + x;
      i2w[i] = sample_bilinear(i2.v, i2.w, i2.h, x + w0.u[i], y + w0.v[i]);
      avg[i] = 0.5f * (i1.v[i] + i2w[i]);
    }
  }
  lin.ix.resize(n);
  lin.iy.resize(n);
  lin.c.resize(n);
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  for (int y = 0; y < i1.h; ++y) {
    for (int x = 0; x < i1.w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * i1.w + x;
      float gx = 0.5f * (avg[static_cast<std::size_t>(y) * i1.w + clampi(x + 1, 0, i1.w - 1)] -
                         avg[static_cast<std::size_t>(y) * i1.w + clampi(x - 1, 0, i1.w - 1)]);
      float gy = 0.5f * (avg[static_cast<std::size_t>(clampi(y + 1, 0, i1.h - 1)) * i1.w + x] -
                         avg[static_cast<std::size_t>(clampi(y - 1, 0, i1.h - 1)) * i1.w + x]);
      lin.ix[i] = gx;
      lin.iy[i] = gy;
      lin.c[i] = (i2w[i] - i1.v[i]) - gx * w0.u[i] - gy * w0.v[i];
    }
  }
  return lin;
}

// Neighbor offsets with Horn-Schunck kernel weights.
struct NeighborTap {
  int dx, dy;
  float k;
};
inline constexpr NeighborTap kTaps[8] = {
    {-1, 0, 1.0f / 6.0f}, {1, 0, 1.0f / 6.0f},   {0, -1, 1.0f / 6.0f},  {0, 1, 1.0f / 6.0f},
    {-1, -1, 1.0f / 12.0f}, {1, -1, 1.0f / 12.0f}, {-1, 1, 1.0f / 12.0f}, {1, 1, 1.0f / 12.0f}};

// Energy of the linearized functional: data term plus alpha^2 times the
// kernel-weighted squared flow differences, each undirected edge once.
inline double level_energy(const LinearizedLevel& lin, const FlowField& f, double alpha2) {
  double data = 0.0, smooth = 0.0;
  for (int y = 0; y < lin.h; ++y) {
    for (int x = 0; x < lin.w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * lin.w + x;
      double r = lin.ix[i] * f.u[i] + lin.iy[i] * f.v[i] + lin.c[i];
      data += r * r;
      // Forward edges only: right, down, down-right, down-left.
      constexpr NeighborTap fwd[4] = {
          {1, 0, 1.0f / 6.0f}, {0, 1, 1.0f / 6.0f}, {1, 1, 1.0f / 12.0f}, {-1, 1, 1.0f / 12.0f}};
      for (const auto& t : fwd) {
        int nx = x + t.dx, ny = y + t.dy;
        if (nx < 0 || nx >= lin.w || ny >= lin.h) continue;
        std::size_t j = static_cast<std::size_t>(ny) * lin.w + nx;
        double du = f.u[i] - f.u[j];
        double dv = f.v[i] - f.v[j];
        smooth += t.k * (du * du + dv * dv);
      }
    }
  }
  return data + alpha2 * smooth;
}

inline void jacobi_sweeps(const LinearizedLevel& lin, FlowField& f, double alpha2, int iters,
                          std::vector<double>* energies) {
  const int w = lin.w, h = lin.h;
  FlowField next(w, h);
  if (energies) energies->push_back(level_energy(lin, f, alpha2));
  for (int it = 0; it < iters; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::size_t i = static_cast<std::size_t>(y) * w + x;
        float mu = 0.0f, mv = 0.0f, d = 0.0f;
        for (const auto& t : kTaps) {
          int nx = x + t.dx, ny = y + t.dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          std::size_t j = static_cast<std::size_t>(ny) * w + nx;
          mu += t.k * f.u[j];
          mv += t.k * f.v[j];
          d += t.k;
        }
        mu /= d;
        mv /= d;
        float gx = lin.ix[i], gy = lin.iy[i];
        float proj = (gx * mu + gy * mv + lin.c[i]) /
                     static_cast<float>(alpha2 * d + gx * gx + gy * gy);
        next.u[i] = mu - gx * proj;
        next.v[i] = mv - gy * proj;
      }
    }
    std::swap(f.u, next.u);
    std::swap(f.v, next.v);
    if (energies) energies->push_back(level_energy(lin, f, alpha2));
  }
}

}  // namespace detail

// Coarse-to-fine dense flow f1 -> f2. When `coarse_energies` is given it
// receives the energy after every Jacobi sweep at the coarsest level
// (iterations+1 entries including the initial state).
inline FlowField dense_flow(const Frame& f1, const Frame& f2, const FlowParams& params,
                            std::vector<double>* coarse_energies = nullptr) {
  require(f1.same_size(f2), Errc::dimension_mismatch, "dense_flow frames");
  require(params.levels >= 1, Errc::bad_parameter, "levels >= 1");
  require(params.alpha > 0.0, Errc::bad_parameter, "alpha > 0");
  require(params.iterations >= 1, Errc::bad_parameter, "iterations >= 1");

  // Clamp the pyramid so the coarsest level keeps at least 2 px per axis.
  int levels = params.levels;
  while (levels > 1 && (std::min(f1.width, f1.height) >> (levels - 1)) < 2) --levels;

  std::vector<detail::Grid> pyr1(static_cast<std::size_t>(levels));
  std::vector<detail::Grid> pyr2(static_cast<std::size_t>(levels));
  pyr1[0] = detail::to_grid(f1);
  pyr2[0] = detail::to_grid(f2);
  for (int l = 1; l < levels; ++l) {
    pyr1[static_cast<std::size_t>(l)] = detail::downsample_box(pyr1[static_cast<std::size_t>(l - 1)]);
    pyr2[static_cast<std::size_t>(l)] = detail::downsample_box(pyr2[static_cast<std::size_t>(l - 1)]);
  }

  const double alpha_eff = params.alpha / 255.0;
  const double alpha2 = alpha_eff * alpha_eff;

  FlowField flow;
  for (int l = levels - 1; l >= 0; --l) {
    const detail::Grid& g1 = pyr1[static_cast<std::size_t>(l)];
    const detail::Grid& g2 = pyr2[static_cast<std::size_t>(l)];
    if (l == levels - 1) {
      flow = FlowField(g1.w, g1.h);
    } else {
      flow = detail::upsample_flow_x2(flow, g1.w, g1.h);
    }
    detail::LinearizedLevel lin = detail::linearize(g1, g2, flow);
    detail::jacobi_sweeps(lin, flow, alpha2, params.iterations,
                          l == levels - 1 ? coarse_energies : nullptr);
  }
  return flow;
}

// output(x) = img(x + flow(x)); samples leaving the image are invalid and 0.
inline std::pair<Frame, Mask> warp_image(const Frame& img, const FlowField& flow) {
  require(img.width == flow.width && img.height == flow.height, Errc::dimension_mismatch,
          "warp_image");
  Frame out(img.width, img.height);
  out.index = img.index;
  out.timestamp = img.timestamp;
  Mask valid(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      std::size_t i = flow.idx(x, y);
      double sx = x + flow.u[i];
      double sy = y + flow.v[i];
      if (sx < 0.0 || sx > img.width - 1.0 || sy < 0.0 || sy > img.height - 1.0) continue;
      out.pixels[i] = to_u8(sample_bilinear(img, sx, sy));
      valid.bits[i] = 1;
    }
  }
  return {std::move(out), std::move(valid)};
}

// e(x) = |fwd(x) + bwd(x + fwd(x))|; +inf where x + fwd(x) leaves the image.
inline ScalarField flow_consistency(const FlowField& fwd, const FlowField& bwd) {
  require(fwd.width == bwd.width && fwd.height == bwd.height, Errc::dimension_mismatch,
          "flow_consistency");
  ScalarField e(fwd.width, fwd.height);
  for (int y = 0; y < fwd.height; ++y) {
    for (int x = 0; x < fwd.width; ++x) {
      std::size_t i = fwd.idx(x, y);
      double tx = x + fwd.u[i];
      double ty = y + fwd.v[i];
      if (tx < 0.0 || tx > fwd.width - 1.0 || ty < 0.0 || ty > fwd.height - 1.0) {
        e.values[i] = std::numeric_limits<float>::infinity();
        continue;
      }
      double bu = sample_bilinear(bwd.u, bwd.width, bwd.height, tx, ty);
      double bv = sample_bilinear(bwd.v, bwd.width, bwd.height, tx, ty);
      double du = fwd.u[i] + bu;
      double dv = fwd.v[i] + bv;
      e.values[i] = static_cast<float>(std::sqrt(du * du + dv * dv));
    }
  }
  return e;
}

}  // namespace stasis::flow
