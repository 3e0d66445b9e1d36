#pragma once

// Flow-guided temporal inpainting: masked pixels borrow from the nearest frame
// where the same surface point is visible, chained through pairwise flow;
// anything unreachable is filled by Laplace diffusion. Flow inside a mask
// describes the object being removed, not the background behind it, so each
// field is first extended harmonically across its mask.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "stasis/error.hpp"
#include "stasis/flow.hpp"
#include "stasis/image.hpp"

namespace stasis::inpaint {

struct InpaintParams {
  int max_hops = 10;              // temporal search radius, frames
  double diffusion_tol = 1e-3;    // max Jacobi update, [0,1] intensity
  int diffusion_max_iters = 10000;
  double consistency_thresh = 1.0;  // forward-backward flow agreement, px

  void validate() const {
    require(max_hops >= 1, Errc::bad_parameter, "max_hops must be at least 1");
    require(diffusion_tol > 0.0, Errc::bad_parameter, "diffusion_tol must be positive");
    require(diffusion_max_iters >= 1, Errc::bad_parameter,
            "diffusion_max_iters must be positive");
    require(consistency_thresh > 0.0, Errc::bad_parameter,
            "consistency_thresh must be positive");
  }
};

namespace detail {

// Scanline initialization: hole runs lerp between their nearest unmasked row
// neighbors, leftovers take column neighbors, anything else the fallback. Rows
// solve the 1-D Laplace problem exactly, so pure-horizontal holes converge in
// one sweep.
inline void scanline_init(std::vector<double>& g, const Mask& holes, double fallback) {
  const int w = holes.width, h = holes.height;
  std::vector<std::uint8_t> pending(holes.bits);
  for (int y = 0; y < h; ++y) {
    int x = 0;
    while (x < w) {
      if (!holes.at(x, y)) {
        ++x;
        continue;
      }
      int a = x;
      while (x < w && holes.at(x, y)) ++x;
      int b = x - 1;  // hole run [a, b]
      bool has_l = a > 0, has_r = b + 1 < w;
      if (has_l && has_r) {
        double lv = g[static_cast<std::size_t>(y) * w + a - 1];
        double rv = g[static_cast<std::size_t>(y) * w + b + 1];
        for (int i = a; i <= b; ++i) {
          double s = static_cast<double>(i - a + 1) / (b - a + 2);
          g[static_cast<std::size_t>(y) * w + i] = lv + s * (rv - lv);
          pending[static_cast<std::size_t>(y) * w + i] = 0;
        }
      } else if (has_l || has_r) {
        double v = g[static_cast<std::size_t>(y) * w + (has_l ? a - 1 : b + 1)];
        for (int i = a; i <= b; ++i) {
          g[static_cast<std::size_t>(y) * w + i] = v;
          pending[static_cast<std::size_t>(y) * w + i] = 0;
        }
      }
    }
  }
  for (int x = 0; x < w; ++x) {
    int y = 0;
    while (y < h) {
      if (!pending[static_cast<std::size_t>(y) * w + x]) {
        ++y;
        continue;
      }
      int a = y;
      while (y < h && pending[static_cast<std::size_t>(y) * w + x]) ++y;
      int b = y - 1;
      bool has_u = a > 0 && !holes.at(x, a - 1);
      bool has_d = b + 1 < h && !holes.at(x, b + 1);
      double uv = has_u ? g[static_cast<std::size_t>(a - 1) * w + x] : fallback;
      double dv = has_d ? g[static_cast<std::size_t>(b + 1) * w + x] : fallback;
      if (!has_u && !has_d) uv = dv = fallback;
      for (int i = a; i <= b; ++i) {
        double s = static_cast<double>(i - a + 1) / (b - a + 2);
        g[static_cast<std::size_t>(i) * w + x] = uv + s * (dv - uv);
      }
    }
  }
}

// Jacobi solve of the discrete Laplace equation on the hole pixels, Dirichlet
// elsewhere, replicated edges at the image border. Returns iterations used.
inline int laplace_fill(std::vector<double>& g, const Mask& holes, double tol, int max_iters,
                        double fallback, bool init = true) {
  const int w = holes.width, h = holes.height;
  require(g.size() == holes.bits.size(), Errc::dimension_mismatch, "laplace_fill");
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < holes.bits.size(); ++k)
    if (holes.bits[k]) idx.push_back(k);
  if (idx.empty()) return 0;

  if (init) scanline_init(g, holes, fallback);
  std::vector<double> next(g);
  for (int it = 1; it <= max_iters; ++it) {
    double worst = 0.0;
    for (std::size_t k : idx) {
      int x = static_cast<int>(k % w), y = static_cast<int>(k / w);
      double sum = 0.0;
      int cnt = 0;
      if (x > 0) sum += g[k - 1], ++cnt;
      if (x + 1 < w) sum += g[k + 1], ++cnt;
      if (y > 0) sum += g[k - w], ++cnt;
      if (y + 1 < h) sum += g[k + w], ++cnt;
      double v = sum / cnt;
      worst = std::max(worst, std::abs(v - g[k]));
      next[k] = v;
    }
    for (std::size_t k : idx) g[k] = next[k];
    if (worst < tol) return it;
  }
  return max_iters;
}

// Coarse-to-fine Laplace solve: a half-resolution solution seeds the fine
// Jacobi sweeps, so wide holes converge in a few hundred iterations instead of
// the tens of thousands plain Jacobi needs.
inline void laplace_fill_multilevel(std::vector<double>& g, const Mask& holes, int w, int h,
                                    double tol, double fallback) {
  const int kSweeps = 300;
  if (w < 16 || h < 16 || holes.count() <= 256) {
    laplace_fill(g, holes, tol, 20000, fallback);
    return;
  }
  int cw = w / 2, ch = h / 2;
  std::vector<double> cg(static_cast<std::size_t>(cw) * ch, fallback);
  Mask choles(cw, ch);
  for (int cy = 0; cy < ch; ++cy) {
    for (int cx = 0; cx < cw; ++cx) {
      double sum = 0.0;
      int cnt = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          int x = std::min(2 * cx + dx, w - 1), y = std::min(2 * cy + dy, h - 1);
          if (holes.at(x, y)) continue;
          sum += g[static_cast<std::size_t>(y) * w + x];
          ++cnt;
        }
      }
      if (cnt == 0)
        choles.at(cx, cy) = 1;
      else
        cg[static_cast<std::size_t>(cy) * cw + cx] = sum / cnt;
    }
  }
  laplace_fill_multilevel(cg, choles, cw, ch, tol, fallback);
  auto coarse_at = [&](double x, double y) {
    double fx = std::clamp(x, 0.0, cw - 1.0), fy = std::clamp(y, 0.0, ch - 1.0);
    int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    int x1 = std::min(x0 + 1, cw - 1), y1 = std::min(y0 + 1, ch - 1);
    double ax = fx - x0, ay = fy - y0;
    double top = (1 - ax) * cg[static_cast<std::size_t>(y0) * cw + x0] +
                 ax * cg[static_cast<std::size_t>(y0) * cw + x1];
    double bot = (1 - ax) * cg[static_cast<std::size_t>(y1) * cw + x0] +
                 ax * cg[static_cast<std::size_t>(y1) * cw + x1];
    return (1 - ay) * top + ay * bot;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (holes.at(x, y))
        g[static_cast<std::size_t>(y) * w + x] = coarse_at((x - 0.5) / 2.0, (y - 0.5) / 2.0);
  laplace_fill(g, holes, tol, kSweeps, fallback, /*init=*/false);
}

// harmonic extension of a flow field across the mask of its source frame
inline FlowField extend_flow(const FlowField& flow, const Mask& holes) {
  require(flow.width == holes.width && flow.height == holes.height, Errc::dimension_mismatch,
          "extend_flow");
  if (holes.count() == 0) return flow;
  FlowField out = flow;
  std::vector<double> g(flow.u.size());
  for (int c = 0; c < 2; ++c) {
    const std::vector<float>& src = c == 0 ? flow.u : flow.v;
    std::vector<float>& dst = c == 0 ? out.u : out.v;
    for (std::size_t k = 0; k < src.size(); ++k) g[k] = src[k];
    laplace_fill_multilevel(g, holes, flow.width, flow.height, 1e-3, 0.0);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<float>(g[k]);
  }
  return out;
}

inline bool donor_clear(const Mask& mask, double x, double y) {
  int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  int x1 = std::min(x0 + 1, mask.width - 1), y1 = std::min(y0 + 1, mask.height - 1);
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  return !mask.at(x0, y0) && !mask.at(x1, y0) && !mask.at(x0, y1) && !mask.at(x1, y1);
}

struct ChainState {
  double x = 0.0, y = 0.0;
  bool alive = true;
};

// one flow hop with a forward-backward agreement gate
inline void advance(ChainState& s, const FlowField& hop, const FlowField& back, int w, int h,
                    double thresh) {
  if (!s.alive) return;
  float du = sample_bilinear(hop.u, w, h, s.x, s.y);
  float dv = sample_bilinear(hop.v, w, h, s.x, s.y);
  double nx = s.x + du, ny = s.y + dv;
  if (!(nx >= 0.0 && nx <= w - 1.0 && ny >= 0.0 && ny <= h - 1.0)) {
    s.alive = false;
    return;
  }
  float bu = sample_bilinear(back.u, w, h, nx, ny);
  float bv = sample_bilinear(back.v, w, h, nx, ny);
  if (std::hypot(du + bu, dv + bv) > thresh) {
    s.alive = false;
    return;
  }
  s.x = nx;
  s.y = ny;
}

inline void check_sequences(const std::vector<Frame>& frames, const std::vector<Mask>& masks,
                            const std::vector<FlowField>& fwd,
                            const std::vector<FlowField>& bwd) {
  require(!frames.empty(), Errc::empty_input, "empty frame sequence");
  require(frames.size() == masks.size(), Errc::dimension_mismatch,
          "frame/mask sequence lengths differ");
  require(fwd.size() == frames.size() - 1 && bwd.size() == frames.size() - 1,
          Errc::dimension_mismatch, "flow sequence length must be frames-1");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    require(frames[t].width == frames[0].width && frames[t].height == frames[0].height,
            Errc::dimension_mismatch, "frame sizes differ");
    require(masks[t].width == frames[0].width && masks[t].height == frames[0].height,
            Errc::dimension_mismatch, "mask size differs from frames");
  }
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    require(fwd[t].width == frames[0].width && fwd[t].height == frames[0].height &&
                bwd[t].width == frames[0].width && bwd[t].height == frames[0].height,
            Errc::dimension_mismatch, "flow size differs from frames");
  }
}

}  // namespace detail

struct PropagateResult {
  std::vector<Frame> frames;
  std::vector<Mask> holes;  // masked pixels no donor could fill
};

// fwd[t] maps frame t to t+1 on frame t's grid; bwd[t] maps frame t+1 to t on
// frame t+1's grid. Donors are searched at hops 1..max_hops, nearer first,
// the future direction before the past at equal distance.
inline PropagateResult propagate_pixels(const std::vector<Frame>& frames,
                                        const std::vector<Mask>& masks,
                                        const std::vector<FlowField>& fwd,
                                        const std::vector<FlowField>& bwd,
                                        const InpaintParams& params = {}) {
  params.validate();
  detail::check_sequences(frames, masks, fwd, bwd);
  const int n = static_cast<int>(frames.size());
  const int w = frames[0].width, h = frames[0].height;

  std::vector<FlowField> efwd, ebwd;
  efwd.reserve(fwd.size());
  ebwd.reserve(bwd.size());
  for (int t = 0; t + 1 < n; ++t) {
    efwd.push_back(detail::extend_flow(fwd[t], masks[t]));
    ebwd.push_back(detail::extend_flow(bwd[t], masks[t + 1]));
  }

  PropagateResult res;
  res.frames = frames;
  res.holes.reserve(n);
  for (int t = 0; t < n; ++t) res.holes.emplace_back(w, h);

  for (int t = 0; t < n; ++t) {
    if (masks[t].count() == 0) continue;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!masks[t].at(x, y)) continue;
        detail::ChainState fwd_chain{double(x), double(y), true};
        detail::ChainState bwd_chain{double(x), double(y), true};
        bool filled = false;
        for (int hop = 1; hop <= params.max_hops && !filled; ++hop) {
          int tf = t + hop;
          if (tf < n && fwd_chain.alive) {
            detail::advance(fwd_chain, efwd[tf - 1], ebwd[tf - 1], w, h,
                            params.consistency_thresh);
            if (fwd_chain.alive && detail::donor_clear(masks[tf], fwd_chain.x, fwd_chain.y)) {
              res.frames[t].at(x, y) =
                  to_u8(sample_bilinear(frames[tf], fwd_chain.x, fwd_chain.y));
              filled = true;
              break;
            }
          }
          int tb = t - hop;
          if (tb >= 0 && bwd_chain.alive) {
            detail::advance(bwd_chain, ebwd[tb], efwd[tb], w, h, params.consistency_thresh);
            if (bwd_chain.alive && detail::donor_clear(masks[tb], bwd_chain.x, bwd_chain.y)) {
              res.frames[t].at(x, y) =
                  to_u8(sample_bilinear(frames[tb], bwd_chain.x, bwd_chain.y));
              filled = true;
            }
          }
        }
        if (!filled) res.holes[t].at(x, y) = 1;
      }
    }
  }
  return res;
}

inline Frame diffuse_fill(const Frame& frame, const Mask& holes, const InpaintParams& params = {}) {
  params.validate();
  require(frame.width == holes.width && frame.height == holes.height, Errc::dimension_mismatch,
          "diffuse_fill mask size");
  if (holes.count() == 0) return frame;
  std::vector<double> g(frame.pixels.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = frame.pixels[k] / 255.0;
  detail::laplace_fill(g, holes, params.diffusion_tol, params.diffusion_max_iters, 0.5);
  Frame out = frame;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (holes.bits[k]) out.pixels[k] = to_u8(255.0 * g[k]);
  return out;
}

inline std::vector<Frame> inpaint_sequence(const std::vector<Frame>& frames,
                                           const std::vector<Mask>& masks,
                                           const std::vector<FlowField>& fwd,
                                           const std::vector<FlowField>& bwd,
                                           const InpaintParams& params = {}) {
  PropagateResult res = propagate_pixels(frames, masks, fwd, bwd, params);
  for (std::size_t t = 0; t < res.frames.size(); ++t)
    res.frames[t] = diffuse_fill(res.frames[t], res.holes[t], params);
  return std::move(res.frames);
}

namespace detail {

inline std::pair<std::vector<FlowField>, std::vector<FlowField>> pairwise_flows(
    const std::vector<Frame>& frames, const flow::FlowParams& fp) {
  std::vector<FlowField> fwd, bwd;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    fwd.push_back(flow::dense_flow(frames[t], frames[t + 1], fp));
    bwd.push_back(flow::dense_flow(frames[t + 1], frames[t], fp));
  }
  return {std::move(fwd), std::move(bwd)};
}

}  // namespace detail

// convenience overloads estimating the pairwise flow internally
inline PropagateResult propagate_pixels(const std::vector<Frame>& frames,
                                        const std::vector<Mask>& masks,
                                        const InpaintParams& params = {},
                                        const flow::FlowParams& fp = {}) {
  require(!frames.empty(), Errc::empty_input, "empty frame sequence");
  auto [fwd, bwd] = detail::pairwise_flows(frames, fp);
  return propagate_pixels(frames, masks, fwd, bwd, params);
}

inline std::vector<Frame> inpaint_sequence(const std::vector<Frame>& frames,
                                           const std::vector<Mask>& masks,
                                           const InpaintParams& params = {},
                                           const flow::FlowParams& fp = {}) {
  require(!frames.empty(), Errc::empty_input, "empty frame sequence");
  auto [fwd, bwd] = detail::pairwise_flows(frames, fp);
  return inpaint_sequence(frames, masks, fwd, bwd, params);
}

inline double psnr(const Frame& a, const Frame& b, const Mask* region = nullptr) {
  require(a.same_size(b), Errc::dimension_mismatch, "psnr frame sizes differ");
  if (region) {
    require(region->width == a.width && region->height == a.height, Errc::dimension_mismatch,
            "psnr region size differs");
    require(region->count() > 0, Errc::empty_region, "psnr region is empty");
  }
  double sum = 0.0;
  std::size_t cnt = 0;
  for (std::size_t k = 0; k < a.pixels.size(); ++k) {
    if (region && !region->bits[k]) continue;
    double d = static_cast<double>(a.pixels[k]) - b.pixels[k];
    sum += d * d;
    ++cnt;
  }
  double mse = sum / cnt;
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(255.0 * 255.0 / mse));
}

inline double psnr(const Frame& a, const Frame& b, const Mask& region) {
  return psnr(a, b, &region);
}

// mean local SSIM over 8x8 sliding windows, stride 1, population statistics
inline double ssim(const Frame& a, const Frame& b) {
  require(a.same_size(b), Errc::dimension_mismatch, "ssim frame sizes differ");
  require(a.width >= 8 && a.height >= 8, Errc::bad_dimensions, "ssim needs at least 8x8");
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  constexpr int win = 8;
  constexpr double n = win * win;
  double total = 0.0;
  std::size_t windows = 0;
  for (int y0 = 0; y0 + win <= a.height; ++y0) {
    for (int x0 = 0; x0 + win <= a.width; ++x0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = y0; y < y0 + win; ++y) {
        for (int x = x0; x < x0 + win; ++x) {
          double va = a.at(x, y), vb = b.at(x, y);
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      }
      double mu_a = sa / n, mu_b = sb / n;
      double var_a = saa / n - mu_a * mu_a;
      double var_b = sbb / n - mu_b * mu_b;
      double cov = sab / n - mu_a * mu_b;
      total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++windows;
    }
  }
  return total / windows;
}

}  // namespace stasis::inpaint
