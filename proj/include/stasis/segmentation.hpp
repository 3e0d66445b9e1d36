// Dynamic-object segmentation: robust residual thresholding, morphological
// cleanup, area filtering, and temporal voting across flow-aligned masks.
#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "stasis/egomotion.hpp"
#include "stasis/error.hpp"
#include "stasis/flow.hpp"
#include "stasis/image.hpp"

namespace stasis::segmentation {

struct SegParams {
  double mad_k = 6.0;
  int min_area = 64;
  int morph_radius = 2;
  int vote_window = 5;
  double vote_quorum = 0.5;
  double consistency_thresh = 1.0;  // px, forward-backward roundtrip gate
};

inline void validate(const SegParams& p) {
  require(p.mad_k > 0.0, Errc::bad_parameter, "mad_k > 0");
  require(p.min_area >= 0, Errc::bad_parameter, "min_area >= 0");
  require(p.morph_radius >= 0, Errc::bad_parameter, "morph_radius >= 0");
  require(p.vote_window >= 1 && p.vote_window % 2 == 1, Errc::bad_parameter,
          "vote_window odd >= 1");
  require(p.vote_quorum > 0.0 && p.vote_quorum <= 1.0, Errc::bad_parameter,
          "vote_quorum in (0,1]");
  require(p.consistency_thresh > 0.0, Errc::bad_parameter, "consistency_thresh > 0");
}

namespace detail {

// Median with the averaged-middles convention for even counts. Infinities
// participate; an infinite middle makes the median infinite.
inline double median_of(std::vector<float>& v) {
  std::size_t n = v.size();
  std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + (mid - 1), v.begin() + mid);
  double lo = v[mid - 1];
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Adaptive threshold: dynamic iff r > median + mad_k * MAD. A MAD below 1e-6
// means the residuals carry no motion evidence and the mask stays empty.
// Infinite sentinels vote through the median of their 8-neighborhood.
inline Mask threshold_residuals(const ScalarField& residuals, const SegParams& params) {
  validate(params);
  require(!residuals.values.empty(), Errc::empty_input, "residual map is empty");

  std::vector<float> work = residuals.values;
  double med = detail::median_of(work);

  Mask mask(residuals.width, residuals.height);
  if (!std::isfinite(med)) return mask;

  for (std::size_t i = 0; i < work.size(); ++i) {
    float r = residuals.values[i];
    work[i] = std::isfinite(r) ? std::abs(r - static_cast<float>(med))
                               : std::numeric_limits<float>::infinity();
  }
  double mad = detail::median_of(work);
  if (!(mad >= 1e-6) || !std::isfinite(mad)) return mask;

  double thresh = med + params.mad_k * mad;
  for (int y = 0; y < residuals.height; ++y) {
    for (int x = 0; x < residuals.width; ++x) {
      float r = residuals.at(x, y);
      if (std::isfinite(r)) {
        mask.at(x, y) = r > thresh ? 1 : 0;
        continue;
      }
      // Sentinel: consult the neighborhood median instead of the pixel.
      std::vector<float> nb;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= residuals.width || ny < 0 || ny >= residuals.height) continue;
          nb.push_back(residuals.at(nx, ny));
        }
      }
      if (nb.empty()) continue;
      mask.at(x, y) = detail::median_of(nb) > thresh ? 1 : 0;
    }
  }
  return mask;
}

namespace detail {

// Separable square max/min filter; outside the image counts as background.
inline Mask dilate(const Mask& m, int radius) {
  if (radius == 0) return m;
  Mask tmp(m.width, m.height), out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      std::uint8_t v = 0;
      for (int dx = -radius; dx <= radius && !v; ++dx) {
        int nx = x + dx;
        if (nx >= 0 && nx < m.width) v = m.at(nx, y);
      }
      tmp.at(x, y) = v;
    }
  }
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      std::uint8_t v = 0;
      for (int dy = -radius; dy <= radius && !v; ++dy) {
        int ny = y + dy;
        if (ny >= 0 && ny < m.height) v = tmp.at(x, ny);
      }
      out.at(x, y) = v;
    }
  }
  return out;
}

inline Mask erode(const Mask& m, int radius) {
  if (radius == 0) return m;
  Mask tmp(m.width, m.height), out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      std::uint8_t v = 1;
      for (int dx = -radius; dx <= radius && v; ++dx) {
        int nx = x + dx;
        v = (nx >= 0 && nx < m.width) ? m.at(nx, y) : 0;
      }
      tmp.at(x, y) = v;
    }
  }
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      std::uint8_t v = 1;
      for (int dy = -radius; dy <= radius && v; ++dy) {
        int ny = y + dy;
        v = (ny >= 0 && ny < m.height) ? tmp.at(x, ny) : 0;
      }
      out.at(x, y) = v;
    }
  }
  return out;
}

}  // namespace detail

// Closing then opening with a (2r+1)^2 square element.
inline Mask morph_clean(const Mask& mask, int radius) {
  require(radius >= 0, Errc::bad_parameter, "radius >= 0");
  if (radius == 0) return mask;
  Mask closed = detail::erode(detail::dilate(mask, radius), radius);
  return detail::dilate(detail::erode(closed, radius), radius);
}

struct Component {
  std::size_t area = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive bounding box
};

struct ComponentResult {
  Mask mask;  // only components with area >= min_area
  std::vector<Component> components;
};

// 8-connectivity labeling. Components are reported sorted by area
// descending; ties keep raster order of their first pixel.
inline ComponentResult connected_components(const Mask& mask, int min_area) {
  require(min_area >= 0, Errc::bad_parameter, "min_area >= 0");
  ComponentResult out;
  out.mask = Mask(mask.width, mask.height);
  std::vector<int> label(mask.bits.size(), -1);
  std::vector<Component> comps;
  std::vector<std::size_t> stack;

  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      std::size_t start = static_cast<std::size_t>(y) * mask.width + x;
      if (!mask.bits[start] || label[start] >= 0) continue;
      int id = static_cast<int>(comps.size());
      Component c;
      c.x0 = c.x1 = x;
      c.y0 = c.y1 = y;
      stack.push_back(start);
      label[start] = id;
      while (!stack.empty()) {
        std::size_t i = stack.back();
        stack.pop_back();
        int cx = static_cast<int>(i % mask.width);
        int cy = static_cast<int>(i / mask.width);
        ++c.area;
        c.x0 = std::min(c.x0, cx);
        c.x1 = std::max(c.x1, cx);
        c.y0 = std::min(c.y0, cy);
        c.y1 = std::max(c.y1, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || nx >= mask.width || ny < 0 || ny >= mask.height) continue;
            std::size_t j = static_cast<std::size_t>(ny) * mask.width + nx;
            if (mask.bits[j] && label[j] < 0) {
              label[j] = id;
              stack.push_back(j);
            }
          }
        }
      }
      comps.push_back(c);
    }
  }

  std::vector<bool> keep(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    keep[k] = comps[k].area >= static_cast<std::size_t>(min_area);
  }
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (mask.bits[i] && keep[static_cast<std::size_t>(label[i])]) out.mask.bits[i] = 1;
  }
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (keep[k]) out.components.push_back(comps[k]);
  }
  std::stable_sort(out.components.begin(), out.components.end(),
                   [](const Component& a, const Component& b) { return a.area > b.area; });
  return out;
}

// Flow evidence is trustworthy only where the dominant model keeps the
// pixel's correspondence inside the far frame and the forward flow survives a
// backward roundtrip. Elsewhere (camera-motion disocclusion bands, occlusion
// fringes) the residual measures missing data, not independent motion, so
// detection must abstain there.
inline Mask flow_validity(const FlowField& fwd, const FlowField& bwd,
                          const egomotion::MotionModel& model, double roundtrip_thresh) {
  require(fwd.width == bwd.width && fwd.height == bwd.height, Errc::dimension_mismatch,
          "flow_validity: forward/backward sizes differ");
  require(roundtrip_thresh > 0.0, Errc::bad_parameter, "roundtrip_thresh > 0");

  Mask valid(fwd.width, fwd.height);
  FlowField mf = egomotion::model_flow(model, fwd.width, fwd.height);
  const double xmax = fwd.width - 1.0;
  const double ymax = fwd.height - 1.0;
  const double tol2 = roundtrip_thresh * roundtrip_thresh;
  for (int y = 0; y < fwd.height; ++y) {
    for (int x = 0; x < fwd.width; ++x) {
      std::size_t i = fwd.idx(x, y);
      double mx = x + mf.u[i];
      double my = y + mf.v[i];
      if (!std::isfinite(mx) || !std::isfinite(my)) continue;
      if (mx < 0.0 || mx > xmax || my < 0.0 || my > ymax) continue;
      double tx = x + fwd.u[i];
      double ty = y + fwd.v[i];
      if (!std::isfinite(tx) || !std::isfinite(ty)) continue;
      if (tx < 0.0 || tx > xmax || ty < 0.0 || ty > ymax) continue;
      double ru = fwd.u[i] + sample_bilinear(bwd.u, bwd.width, bwd.height, tx, ty);
      double rv = fwd.v[i] + sample_bilinear(bwd.v, bwd.width, bwd.height, tx, ty);
      if (ru * ru + rv * rv <= tol2) valid.at(x, y) = 1;
    }
  }
  return valid;
}

// Compose two consecutive flows: out(x) = ab(x) + bc(x + ab(x)). Chains that
// leave the image turn into +inf sentinels so later lookups abstain.
inline FlowField chain_flows(const FlowField& ab, const FlowField& bc) {
  require(ab.width == bc.width && ab.height == bc.height, Errc::dimension_mismatch,
          "chain_flows");
  FlowField out(ab.width, ab.height);
  const float inf = std::numeric_limits<float>::infinity();
  for (int y = 0; y < ab.height; ++y) {
    for (int x = 0; x < ab.width; ++x) {
      std::size_t i = ab.idx(x, y);
      double tx = x + ab.u[i];
      double ty = y + ab.v[i];
      if (!std::isfinite(tx) || !std::isfinite(ty) || tx < 0.0 || tx > ab.width - 1.0 ||
          ty < 0.0 || ty > ab.height - 1.0) {
        out.u[i] = inf;
        out.v[i] = inf;
        continue;
      }
      out.u[i] = ab.u[i] + sample_bilinear(bc.u, bc.width, bc.height, tx, ty);
      out.v[i] = ab.v[i] + sample_bilinear(bc.v, bc.width, bc.height, tx, ty);
    }
  }
  return out;
}

// Majority vote across a window of masks aligned to the center frame.
// flows[k] maps center-frame pixels into frame k of the window; masks are
// sampled nearest-neighbor and out-of-bounds samples abstain.
inline Mask temporal_vote(const std::vector<Mask>& masks, const std::vector<FlowField>& flows,
                          std::size_t center, const SegParams& params) {
  validate(params);
  require(masks.size() == static_cast<std::size_t>(params.vote_window), Errc::dimension_mismatch,
          "window size != vote_window");
  require(flows.size() == masks.size(), Errc::dimension_mismatch,
          "flow count != window size");
  require(center < masks.size(), Errc::bad_parameter, "center outside window");

  const Mask& c = masks[center];
  Mask out(c.width, c.height);
  for (int y = 0; y < c.height; ++y) {
    for (int x = 0; x < c.width; ++x) {
      int votes = 0, voters = 0;
      for (std::size_t k = 0; k < masks.size(); ++k) {
        const FlowField& f = flows[k];
        std::size_t i = f.idx(x, y);
        double tx = x + f.u[i];
        double ty = y + f.v[i];
        if (!std::isfinite(tx) || !std::isfinite(ty)) continue;
        int nx = static_cast<int>(std::lround(tx));
        int ny = static_cast<int>(std::lround(ty));
        if (nx < 0 || nx >= masks[k].width || ny < 0 || ny >= masks[k].height) continue;
        ++voters;
        votes += masks[k].at(nx, ny) ? 1 : 0;
      }
      if (voters > 0 && static_cast<double>(votes) / voters >= params.vote_quorum) {
        out.at(x, y) = 1;
      }
    }
  }
  return out;
}

struct DetectionResult {
  std::vector<Mask> masks;            // one per frame, post-vote, post-dilation
  std::vector<FlowField> fwd_flows;   // [k]: frame k -> k+1
  std::vector<FlowField> bwd_flows;   // [k]: frame k+1 -> k
  std::vector<bool> ransac_ok;        // per pair
};

// Full detection pass. Pairwise: dense flow both directions, dominant-motion
// RANSAC on the forward flow, residual threshold gated by flow_validity (no
// dynamic verdict where the flow itself is unmeasurable), morphological
// cleanup, and area filtering; then a temporal vote across flow-chained
// windows (neighbors past either end of the sequence abstain), and finally
// one dilation by morph_radius so inpainting covers flow-boundary bleed.
inline DetectionResult detect_dynamic_masks_full(const std::vector<Frame>& frames,
                                                 const flow::FlowParams& flow_params,
                                                 const egomotion::RansacParams& ransac_params,
                                                 const SegParams& seg_params) {
  validate(seg_params);
  require(frames.size() >= 2, Errc::insufficient_frames, "need at least 2 frames");
  const std::size_t n = frames.size();

  DetectionResult res;
  res.fwd_flows.reserve(n - 1);
  res.bwd_flows.reserve(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    require(frames[k].same_size(frames[k + 1]), Errc::dimension_mismatch,
            "frame size changes mid-sequence");
    res.fwd_flows.push_back(flow::dense_flow(frames[k], frames[k + 1], flow_params));
    res.bwd_flows.push_back(flow::dense_flow(frames[k + 1], frames[k], flow_params));
  }

  std::vector<Mask> pairwise(n);
  res.ransac_ok.assign(n - 1, false);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    egomotion::RansacParams rp = ransac_params;
    rp.seed = ransac_params.seed + k;
    try {
      auto dom = egomotion::ransac_dominant_motion(res.fwd_flows[k], rp);
      ScalarField r = egomotion::residual_map(res.fwd_flows[k], dom.model);
      Mask m = threshold_residuals(r, seg_params);
      Mask valid = flow_validity(res.fwd_flows[k], res.bwd_flows[k], dom.model,
                                 seg_params.consistency_thresh);
      for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] &= valid.bits[i];
      m = morph_clean(m, seg_params.morph_radius);
      pairwise[k] = connected_components(m, seg_params.min_area).mask;
      res.ransac_ok[k] = true;
    } catch (const Error& e) {
      std::cerr << "warning: frame pair " << k << ": " << e.what() << "; empty mask\n";
      pairwise[k] = Mask(frames[k].width, frames[k].height);
    }
  }
  pairwise[n - 1] = pairwise[n - 2];

  const int h = (seg_params.vote_window - 1) / 2;
  const float inf = std::numeric_limits<float>::infinity();

  res.masks.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<Mask> window;
    std::vector<FlowField> chains;
    for (int o = -h; o <= h; ++o) {
      long sj = static_cast<long>(t) + o;
      if (sj < 0 || sj >= static_cast<long>(n)) {
        // no such frame: an all-sentinel chain makes this slot abstain
        window.emplace_back(frames[t].width, frames[t].height);
        FlowField none(frames[t].width, frames[t].height);
        std::fill(none.u.begin(), none.u.end(), inf);
        std::fill(none.v.begin(), none.v.end(), inf);
        chains.push_back(std::move(none));
        continue;
      }
      std::size_t j = static_cast<std::size_t>(sj);
      window.push_back(pairwise[j]);
      FlowField chain(frames[t].width, frames[t].height);  // zero: identity
      if (j > t) {
        chain = res.fwd_flows[t];
        for (std::size_t k = t + 1; k < j; ++k) chain = chain_flows(chain, res.fwd_flows[k]);
      } else if (j < t) {
        chain = res.bwd_flows[t - 1];
        for (std::size_t k = t - 1; k > j; --k) chain = chain_flows(chain, res.bwd_flows[k - 1]);
      }
      chains.push_back(std::move(chain));
    }
    Mask voted = temporal_vote(window, chains, static_cast<std::size_t>(h), seg_params);
    res.masks[t] = detail::dilate(voted, seg_params.morph_radius);
  }
  return res;
}

inline std::vector<Mask> detect_dynamic_masks(const std::vector<Frame>& frames,
                                              const flow::FlowParams& flow_params,
                                              const egomotion::RansacParams& ransac_params,
                                              const SegParams& seg_params) {
  return detect_dynamic_masks_full(frames, flow_params, ransac_params, seg_params).masks;
}

}  // namespace stasis::segmentation
