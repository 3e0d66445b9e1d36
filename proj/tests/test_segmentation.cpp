#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "stasis/rng.hpp"
#include "stasis/segmentation.hpp"

using namespace stasis;
using segmentation::SegParams;

namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();

ScalarField noise_field(int w, int h, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  ScalarField f(w, h);
  for (auto& v : f.values) v = static_cast<float>(rng.uniform(lo, hi));
  return f;
}

double mask_iou(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    bool pa = a.bits[i], pb = b.bits[i];
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST_CASE("threshold_residuals returns empty on constant residuals", "[segmentation]") {
  ScalarField r(30, 20, 2.5f);
  Mask m = segmentation::threshold_residuals(r, {});
  CHECK(m.count() == 0);
}

TEST_CASE("threshold_residuals flags exactly a planted blob", "[segmentation]") {
  ScalarField r = noise_field(60, 40, derive_seed(40, "seg"), 0.0, 0.01);
  for (int y = 10; y < 30; ++y) {
    for (int x = 20; x < 40; ++x) r.at(x, y) = 5.0f;
  }
  Mask m = segmentation::threshold_residuals(r, {});
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 60; ++x) {
      bool in_blob = x >= 20 && x < 40 && y >= 10 && y < 30;
      REQUIRE(m.at(x, y) == (in_blob ? 1 : 0));
    }
  }
}

TEST_CASE("threshold_residuals rejects empty maps and validates params", "[segmentation]") {
  ScalarField empty;
  CHECK_THROWS_AS(segmentation::threshold_residuals(empty, {}), Error);

  ScalarField r(8, 8, 1.0f);
  SegParams bad;
  bad.mad_k = 0.0;
  CHECK_THROWS_AS(segmentation::threshold_residuals(r, bad), Error);
  bad = {};
  bad.vote_window = 4;
  CHECK_THROWS_AS(segmentation::threshold_residuals(r, bad), Error);
  bad = {};
  bad.vote_quorum = 0.0;
  CHECK_THROWS_AS(segmentation::threshold_residuals(r, bad), Error);
}

TEST_CASE("threshold_residuals resolves sentinels through their neighborhood", "[segmentation]") {
  ScalarField r = noise_field(40, 30, derive_seed(41, "seg"), 0.0, 0.01);
  for (int y = 5; y < 15; ++y) {
    for (int x = 5; x < 15; ++x) r.at(x, y) = 4.0f;
  }
  r.at(8, 8) = kInf;    // inside the hot blob: neighbors are high
  r.at(30, 25) = kInf;  // isolated in calm background
  Mask m = segmentation::threshold_residuals(r, {});
  CHECK(m.at(8, 8) == 1);
  CHECK(m.at(30, 25) == 0);
}

TEST_CASE("raising mad_k never adds thresholded pixels", "[segmentation]") {
  ScalarField r = noise_field(50, 50, derive_seed(42, "seg"), 0.0, 1.0);
  for (int y = 20; y < 30; ++y) {
    for (int x = 20; x < 30; ++x) r.at(x, y) += 10.0f;
  }
  SegParams lo, hi;
  lo.mad_k = 3.0;
  hi.mad_k = 8.0;
  Mask a = segmentation::threshold_residuals(r, lo);
  Mask b = segmentation::threshold_residuals(r, hi);
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    if (b.bits[i]) REQUIRE(a.bits[i] == 1);
  }
  CHECK(b.count() <= a.count());
}

TEST_CASE("morph_clean is identity at radius 0 and on stable shapes", "[segmentation]") {
  Mask empty(20, 20);
  CHECK(segmentation::morph_clean(empty, 2).count() == 0);

  Mask square(30, 30);
  for (int y = 10; y < 20; ++y) {
    for (int x = 10; x < 20; ++x) square.at(x, y) = 1;
  }
  Mask cleaned = segmentation::morph_clean(square, 2);
  CHECK(cleaned.bits == square.bits);
  CHECK(segmentation::morph_clean(square, 0).bits == square.bits);
}

TEST_CASE("morph_clean removes sub-element specks and fills small holes", "[segmentation]") {
  Mask speck(20, 20);
  speck.at(10, 10) = 1;
  CHECK(segmentation::morph_clean(speck, 1).count() == 0);

  Mask holed(20, 20);
  for (int y = 5; y < 12; ++y) {
    for (int x = 5; x < 12; ++x) holed.at(x, y) = 1;
  }
  holed.at(8, 8) = 0;
  Mask cleaned = segmentation::morph_clean(holed, 1);
  CHECK(cleaned.at(8, 8) == 1);
  CHECK(cleaned.count() == 49);
}

TEST_CASE("connected_components labels with 8-connectivity and filters by area",
          "[segmentation]") {
  Mask empty(10, 10);
  auto r0 = segmentation::connected_components(empty, 1);
  CHECK(r0.components.empty());
  CHECK(r0.mask.count() == 0);

  Mask diag(10, 10);
  diag.at(3, 3) = 1;
  diag.at(4, 4) = 1;
  auto r1 = segmentation::connected_components(diag, 1);
  REQUIRE(r1.components.size() == 1);
  CHECK(r1.components[0].area == 2);
  auto r2 = segmentation::connected_components(diag, 3);
  CHECK(r2.components.empty());
  CHECK(r2.mask.count() == 0);
}

TEST_CASE("connected_components keeps large blobs and sorts by area", "[segmentation]") {
  Mask m(40, 30);
  // Area-100 blob.
  for (int y = 2; y < 12; ++y) {
    for (int x = 2; x < 12; ++x) m.at(x, y) = 1;
  }
  // Area-10 blob.
  for (int x = 20; x < 30; ++x) m.at(x, 20) = 1;
  auto res = segmentation::connected_components(m, 64);
  REQUIRE(res.components.size() == 1);
  CHECK(res.components[0].area == 100);
  CHECK(res.components[0].x0 == 2);
  CHECK(res.components[0].y0 == 2);
  CHECK(res.components[0].x1 == 11);
  CHECK(res.components[0].y1 == 11);
  CHECK(res.mask.count() == 100);

  auto all = segmentation::connected_components(m, 0);
  REQUIRE(all.components.size() == 2);
  CHECK(all.components[0].area == 100);
  CHECK(all.components[1].area == 10);
}

TEST_CASE("connected_components breaks area ties by raster order", "[segmentation]") {
  Mask m(20, 10);
  m.at(5, 2) = 1;  // first in raster order
  m.at(2, 7) = 1;
  auto res = segmentation::connected_components(m, 1);
  REQUIRE(res.components.size() == 2);
  CHECK(res.components[0].y0 == 2);
  CHECK(res.components[1].y0 == 7);
}

TEST_CASE("temporal_vote with identical masks and zero flows is identity", "[segmentation]") {
  Mask m(16, 12);
  for (int y = 3; y < 8; ++y) {
    for (int x = 4; x < 10; ++x) m.at(x, y) = 1;
  }
  std::vector<Mask> window(5, m);
  std::vector<FlowField> flows(5, FlowField(16, 12));
  Mask voted = segmentation::temporal_vote(window, flows, 2, {});
  CHECK(voted.bits == m.bits);
}

TEST_CASE("temporal_vote removes a blob present in one frame of five", "[segmentation]") {
  Mask clean(16, 12), spur(16, 12);
  for (int y = 2; y < 6; ++y) {
    for (int x = 2; x < 6; ++x) spur.at(x, y) = 1;
  }
  std::vector<Mask> window = {clean, clean, spur, clean, clean};
  std::vector<FlowField> flows(5, FlowField(16, 12));
  Mask voted = segmentation::temporal_vote(window, flows, 2, {});
  CHECK(voted.count() == 0);
}

TEST_CASE("temporal_vote window of one is identity", "[segmentation]") {
  Mask m(10, 10);
  m.at(5, 5) = 1;
  SegParams p;
  p.vote_window = 1;
  Mask voted = segmentation::temporal_vote({m}, {FlowField(10, 10)}, 0, p);
  CHECK(voted.bits == m.bits);
}

TEST_CASE("temporal_vote aligns shifted masks through the chain flows", "[segmentation]") {
  // The blob sits 2 px right in the "next" frame; the chain flow (+2,0)
  // brings the vote back into center coordinates.
  Mask center(20, 10), next(20, 10);
  for (int y = 3; y < 6; ++y) {
    for (int x = 4; x < 8; ++x) center.at(x, y) = 1;
    for (int x = 6; x < 10; ++x) next.at(x, y) = 1;
  }
  FlowField shift(20, 10);
  for (auto& u : shift.u) u = 2.0f;
  SegParams p;
  p.vote_window = 3;
  Mask voted = segmentation::temporal_vote({center, center, next},
                                           {FlowField(20, 10), FlowField(20, 10), shift}, 1, p);
  // All three voters agree inside the original blob.
  for (int y = 3; y < 6; ++y) {
    for (int x = 4; x < 8; ++x) REQUIRE(voted.at(x, y) == 1);
  }
}

TEST_CASE("temporal_vote output is a subset of the union of warped masks", "[segmentation]") {
  Rng rng(derive_seed(43, "seg"));
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Mask> window;
    std::vector<FlowField> flows;
    for (int k = 0; k < 5; ++k) {
      Mask m(24, 18);
      for (auto& b : m.bits) b = rng.below(5) == 0 ? 1 : 0;
      window.push_back(m);
      FlowField f(24, 18);
      for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] = static_cast<float>(rng.uniform(-3.0, 3.0));
        f.v[i] = static_cast<float>(rng.uniform(-3.0, 3.0));
      }
      flows.push_back(f);
    }
    Mask voted = segmentation::temporal_vote(window, flows, 2, {});

    // Union of warped masks under the same nearest-neighbor rule.
    Mask uni(24, 18);
    for (int y = 0; y < 18; ++y) {
      for (int x = 0; x < 24; ++x) {
        for (int k = 0; k < 5; ++k) {
          const FlowField& f = flows[static_cast<std::size_t>(k)];
          std::size_t i = f.idx(x, y);
          int nx = static_cast<int>(std::lround(x + f.u[i]));
          int ny = static_cast<int>(std::lround(y + f.v[i]));
          if (nx < 0 || nx >= 24 || ny < 0 || ny >= 18) continue;
          if (window[static_cast<std::size_t>(k)].at(nx, ny)) uni.at(x, y) = 1;
        }
      }
    }
    for (std::size_t i = 0; i < voted.bits.size(); ++i) {
      if (voted.bits[i]) REQUIRE(uni.bits[i] == 1);
    }
  }
}

TEST_CASE("temporal_vote validates window sizes", "[segmentation]") {
  std::vector<Mask> window(5, Mask(8, 8));
  std::vector<FlowField> flows(4, FlowField(8, 8));
  CHECK_THROWS_AS(segmentation::temporal_vote(window, flows, 2, {}), Error);
  SegParams p;
  p.vote_window = 3;
  CHECK_THROWS_AS(segmentation::temporal_vote(window, {5, FlowField(8, 8)}, 2, p), Error);
}

TEST_CASE("flow_validity gates roundtrip failures and model disocclusion", "[segmentation]") {
  const int w = 32, h = 24;
  egomotion::MotionModel identity{Mat3::Identity()};

  SECTION("consistent translation is valid wherever the target stays in frame") {
    FlowField fwd(w, h), bwd(w, h);
    for (auto& u : fwd.u) u = 3.0f;
    for (auto& u : bwd.u) u = -3.0f;
    Mask valid = segmentation::flow_validity(fwd, bwd, identity, 1.0);
    // the rightmost 3 columns land outside the far frame
    CHECK(valid.count() == static_cast<std::size_t>((w - 3) * h));
    for (int y = 0; y < h; ++y) {
      CHECK(valid.at(0, y) == 1);
      CHECK(valid.at(w - 3, y) == 0);
    }
  }

  SECTION("a broken backward flow fails the roundtrip everywhere") {
    FlowField fwd(w, h), bwd(w, h);
    for (auto& u : fwd.u) u = 3.0f;
    Mask valid = segmentation::flow_validity(fwd, bwd, identity, 1.0);
    CHECK(valid.count() == 0);
    // a looser tolerance admits the same flow again
    valid = segmentation::flow_validity(fwd, bwd, identity, 3.5);
    CHECK(valid.count() == static_cast<std::size_t>((w - 3) * h));
  }

  SECTION("model sending pixels out of frame marks them unmeasurable") {
    FlowField fwd(w, h), bwd(w, h);
    Mat3 shift = Mat3::Identity();
    shift(0, 2) = -6.0;
    Mask valid = segmentation::flow_validity(fwd, bwd, {shift}, 1.0);
    CHECK(valid.count() == static_cast<std::size_t>((w - 6) * h));
    for (int y = 0; y < h; ++y) {
      CHECK(valid.at(5, y) == 0);
      CHECK(valid.at(6, y) == 1);
    }
  }

  SECTION("parameter validation") {
    CHECK_THROWS_AS(segmentation::flow_validity(FlowField(4, 4), FlowField(5, 4), identity, 1.0),
                    Error);
    CHECK_THROWS_AS(segmentation::flow_validity(FlowField(4, 4), FlowField(4, 4), identity, 0.0),
                    Error);
  }
}

TEST_CASE("detect_dynamic_masks stays quiet under a strafing camera", "[segmentation]") {
  // Pure lateral camera motion over static texture: each frame is a window
  // sliding 4 px across a panorama. Pixels leaving the view have no
  // correspondence; their residuals must be vetoed, not reported as motion.
  const int w = 96, h = 72, pan_w = 140, n = 6, step = 4;
  Frame pano(pan_w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < pan_w; ++x) {
      pano.at(x, y) = to_u8(128 + 55 * std::sin(x * 0.27) * std::cos(y * 0.23) +
                            25 * std::cos((2 * x - y) * 0.11));
    }
  }
  std::vector<Frame> frames;
  for (int t = 0; t < n; ++t) {
    Frame f(w, h);
    f.index = t;
    f.timestamp = t / 30.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) f.at(x, y) = pano.at(x + step * t, y);
    }
    frames.push_back(f);
  }

  egomotion::RansacParams rp;
  rp.seed = derive_seed(21, "ransac");
  auto masks = segmentation::detect_dynamic_masks(frames, {}, rp, {});
  double mean_fraction = 0.0;
  for (const Mask& m : masks) mean_fraction += m.fraction();
  mean_fraction /= static_cast<double>(masks.size());
  CHECK(mean_fraction < 0.01);
}

TEST_CASE("detect_dynamic_masks finds a moving sprite over a static background",
          "[segmentation]") {
  // Static textured background; a 24x24 textured square marches right by
  // 3 px per frame. The dominant motion is identity, so the sprite is the
  // only residual source. Masks legitimately over-cover by the dilation
  // radius plus the occlusion strip, so the sprite must dwarf both.
  Rng rng(derive_seed(44, "seg"));
  Frame bg(96, 72);
  for (int y = 0; y < 72; ++y) {
    for (int x = 0; x < 96; ++x) {
      bg.at(x, y) = to_u8(120 + 50 * std::sin(x * 0.35) * std::cos(y * 0.3) +
                          30 * std::sin((x + y) * 0.15));
    }
  }
  auto sprite_px = [&rng]() { return to_u8(rng.uniform(0.0, 255.0)); };
  std::vector<std::uint8_t> sprite_tex;
  for (int i = 0; i < 24 * 24; ++i) sprite_tex.push_back(sprite_px());

  const int n = 6;
  std::vector<Frame> frames;
  std::vector<Mask> gt;
  for (int t = 0; t < n; ++t) {
    Frame f = bg;
    f.index = t;
    f.timestamp = t / 30.0;
    Mask g(96, 72);
    int ox = 20 + 3 * t, oy = 24;
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) {
        f.at(ox + x, oy + y) = sprite_tex[static_cast<std::size_t>(y) * 24 + x];
        g.at(ox + x, oy + y) = 1;
      }
    }
    frames.push_back(f);
    gt.push_back(g);
  }

  egomotion::RansacParams rp;
  rp.seed = derive_seed(9, "ransac");
  auto masks = segmentation::detect_dynamic_masks(frames, {}, rp, {});
  REQUIRE(masks.size() == static_cast<std::size_t>(n));
  int hits = 0;
  for (int t = 0; t < n; ++t) {
    if (mask_iou(masks[static_cast<std::size_t>(t)], gt[static_cast<std::size_t>(t)]) >= 0.5) {
      ++hits;
    }
  }
  CHECK(hits >= n - 1);

  // Determinism: a second run is bit-identical.
  auto again = segmentation::detect_dynamic_masks(frames, {}, rp, {});
  for (int t = 0; t < n; ++t) {
    CHECK(again[static_cast<std::size_t>(t)].bits == masks[static_cast<std::size_t>(t)].bits);
  }

  CHECK_THROWS_AS(segmentation::detect_dynamic_masks({frames[0]}, {}, rp, {}), Error);
}
