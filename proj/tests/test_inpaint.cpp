#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "stasis/inpaint.hpp"
#include "stasis/rng.hpp"
#include "stasis/synthbench.hpp"

using namespace stasis;
using namespace stasis::inpaint;

namespace {

Frame textured(int w, int h, std::uint64_t seed) {
  Frame f(w, h);
  Rng rng(seed);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return f;
}

FlowField uniform_flow(int w, int h, float u, float v) {
  FlowField f(w, h);
  std::fill(f.u.begin(), f.u.end(), u);
  std::fill(f.v.begin(), f.v.end(), v);
  return f;
}

template <typename F>
void check_throws_code(F&& f, Errc code) {
  try {
    f();
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

const std::vector<FlowField> kNoFlows;

}  // namespace

TEST_CASE("inpaint parameter validation", "[inpaint]") {
  InpaintParams p;
  p.max_hops = 0;
  check_throws_code([&] { p.validate(); }, Errc::bad_parameter);
  p = {};
  p.diffusion_tol = 0.0;
  check_throws_code([&] { p.validate(); }, Errc::bad_parameter);
  p = {};
  p.consistency_thresh = -1.0;
  check_throws_code([&] { p.validate(); }, Errc::bad_parameter);
}

TEST_CASE("empty masks are an identity", "[inpaint]") {
  std::vector<Frame> frames{textured(32, 24, 1), textured(32, 24, 2), textured(32, 24, 3)};
  std::vector<Mask> masks(3, Mask(32, 24));
  std::vector<FlowField> fwd(2, uniform_flow(32, 24, 0.5f, 0.0f));
  std::vector<FlowField> bwd(2, uniform_flow(32, 24, -0.5f, 0.0f));

  PropagateResult res = propagate_pixels(frames, masks, fwd, bwd);
  for (int t = 0; t < 3; ++t) {
    CHECK(res.frames[t].pixels == frames[t].pixels);
    CHECK(res.holes[t].count() == 0);
  }
  std::vector<Frame> out = inpaint_sequence(frames, masks, fwd, bwd);
  for (int t = 0; t < 3; ++t) CHECK(out[t].pixels == frames[t].pixels);
}

TEST_CASE("sequence shape errors", "[inpaint]") {
  std::vector<Frame> frames{textured(32, 24, 1), textured(32, 24, 2)};
  std::vector<Mask> masks(2, Mask(32, 24));
  std::vector<FlowField> one(1, uniform_flow(32, 24, 0, 0));

  check_throws_code([&] { propagate_pixels({}, {}, kNoFlows, kNoFlows); }, Errc::empty_input);
  check_throws_code(
      [&] {
        std::vector<Mask> bad(1, Mask(32, 24));
        propagate_pixels(frames, bad, one, one);
      },
      Errc::dimension_mismatch);
  check_throws_code(
      [&] {
        std::vector<Mask> bad(2, Mask(16, 24));
        propagate_pixels(frames, bad, one, one);
      },
      Errc::dimension_mismatch);
  check_throws_code(
      [&] {
        std::vector<FlowField> bad(2, uniform_flow(32, 24, 0, 0));
        propagate_pixels(frames, masks, bad, one);
      },
      Errc::dimension_mismatch);
}

TEST_CASE("static donor fills masked pixels exactly", "[inpaint]") {
  // identical background in every frame; frame 1 has a painted-over blob and
  // zero flow, so the donor is the same pixel one frame away
  Frame bg = textured(40, 30, 9);
  std::vector<Frame> frames(3, bg);
  Mask blob(40, 30);
  for (int y = 10; y < 20; ++y)
    for (int x = 15; x < 30; ++x) {
      blob.at(x, y) = 1;
      frames[1].at(x, y) = 0;
    }
  std::vector<Mask> masks{Mask(40, 30), blob, Mask(40, 30)};
  std::vector<FlowField> zero(2, uniform_flow(40, 30, 0, 0));

  PropagateResult res = propagate_pixels(frames, masks, zero, zero);
  CHECK(res.holes[1].count() == 0);
  CHECK(res.frames[1].pixels == bg.pixels);
  CHECK(res.frames[0].pixels == frames[0].pixels);
  CHECK(res.frames[2].pixels == frames[2].pixels);
}

TEST_CASE("nearest donor wins and the future breaks ties", "[inpaint]") {
  std::vector<Frame> frames{Frame(16, 16, 100), Frame(16, 16, 50), Frame(16, 16, 200)};
  Mask m(16, 16);
  m.at(8, 8) = 1;
  std::vector<Mask> masks{Mask(16, 16), m, Mask(16, 16)};
  std::vector<FlowField> zero(2, uniform_flow(16, 16, 0, 0));

  PropagateResult res = propagate_pixels(frames, masks, zero, zero);
  CHECK(res.frames[1].at(8, 8) == 200);

  // with the future donor masked out the past one is used instead
  masks[2].at(8, 8) = 1;
  res = propagate_pixels(frames, masks, zero, zero);
  CHECK(res.frames[1].at(8, 8) == 100);
}

TEST_CASE("forward-backward disagreement kills a chain", "[inpaint]") {
  std::vector<Frame> frames{Frame(16, 16, 100), Frame(16, 16, 50)};
  Mask m(16, 16);
  m.at(8, 8) = 1;
  std::vector<Mask> masks{Mask(16, 16), m};
  // the backward hop says -3 px but the forward field at the target says +1 px
  std::vector<FlowField> fwd{uniform_flow(16, 16, 1.0f, 0.0f)};
  std::vector<FlowField> bwd{uniform_flow(16, 16, -3.0f, 0.0f)};

  PropagateResult res = propagate_pixels(frames, masks, fwd, bwd);
  CHECK(res.holes[1].at(8, 8) == 1);
  CHECK(res.frames[1].at(8, 8) == 50);
}

TEST_CASE("a region masked in every frame comes back as holes", "[inpaint]") {
  Frame bg = textured(24, 18, 4);
  std::vector<Frame> frames(4, bg);
  Mask m(24, 18);
  for (int y = 5; y < 10; ++y)
    for (int x = 8; x < 16; ++x) m.at(x, y) = 1;
  std::vector<Mask> masks(4, m);
  std::vector<FlowField> zero(3, uniform_flow(24, 18, 0, 0));

  PropagateResult res = propagate_pixels(frames, masks, zero, zero);
  for (int t = 0; t < 4; ++t) CHECK(res.holes[t].bits == m.bits);
}

TEST_CASE("donors blending masked taps are rejected", "[inpaint]") {
  Frame bg = textured(20, 12, 11);
  std::vector<Frame> frames(3, bg);
  Mask m(20, 12);
  m.at(10, 6) = 1;
  std::vector<Mask> masks{Mask(20, 12), m, Mask(20, 12)};
  // the forward chain lands at x=10.5 in frame 2 where both bilinear columns
  // are masked; the backward chain lands at a clean x=9.5 in frame 0
  std::vector<FlowField> fwd(2, uniform_flow(20, 12, 0.5f, 0.0f));
  std::vector<FlowField> bwd(2, uniform_flow(20, 12, -0.5f, 0.0f));
  masks[2].at(10, 6) = 1;
  masks[2].at(11, 6) = 1;

  PropagateResult res = propagate_pixels(frames, masks, fwd, bwd);
  CHECK(res.holes[1].count() == 0);
  CHECK(std::abs(int(res.frames[1].at(10, 6)) -
                 int(std::lround(sample_bilinear(bg, 9.5, 6.0)))) <= 1);
}

TEST_CASE("diffusion fill solves the Laplace equation", "[inpaint]") {
  SECTION("empty holes are the identity") {
    Frame f = textured(12, 9, 3);
    Frame out = diffuse_fill(f, Mask(12, 9));
    CHECK(out.pixels == f.pixels);
  }
  SECTION("uniform boundary fills exactly") {
    Frame f(15, 11, 77);
    Mask holes(15, 11);
    for (int y = 3; y < 8; ++y)
      for (int x = 4; x < 11; ++x) {
        f.at(x, y) = 0;
        holes.at(x, y) = 1;
      }
    Frame out = diffuse_fill(f, holes);
    for (auto p : out.pixels) CHECK(p == 77);
  }
  SECTION("one-dimensional ramp between 0 and 100") {
    Frame f(21, 1, 0);
    f.at(20, 0) = 100;
    Mask holes(21, 1);
    for (int x = 1; x < 20; ++x) holes.at(x, 0) = 1;
    InpaintParams p;
    Frame out = diffuse_fill(f, holes, p);
    for (int x = 0; x <= 20; ++x)
      CHECK(std::abs(out.at(x, 0) - 5.0 * x) <= p.diffusion_tol * 255.0);
  }
  SECTION("max principle with a noisy boundary") {
    Frame f = textured(26, 22, 8);
    Mask holes(26, 22);
    for (int y = 6; y < 16; ++y)
      for (int x = 7; x < 19; ++x) holes.at(x, y) = 1;
    int lo = 255, hi = 0;
    for (int y = 5; y < 17; ++y)
      for (int x = 6; x < 20; ++x)
        if (!holes.at(x, y)) {
          lo = std::min(lo, int(f.at(x, y)));
          hi = std::max(hi, int(f.at(x, y)));
        }
    Frame out = diffuse_fill(f, holes);
    for (int y = 6; y < 16; ++y)
      for (int x = 7; x < 19; ++x) {
        CHECK(out.at(x, y) >= lo - 1);
        CHECK(out.at(x, y) <= hi + 1);
      }
  }
  SECTION("hole on the image border uses replicated edges") {
    // column-constant data: the whole left column must converge to f(1, y)
    Frame f(9, 7, 0);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) f.at(x, y) = static_cast<std::uint8_t>(25 * x);
    Mask holes(9, 7);
    for (int y = 0; y < 7; ++y) holes.at(0, y) = 1;
    Frame out = diffuse_fill(f, holes);
    for (int y = 0; y < 7; ++y) CHECK(std::abs(int(out.at(0, y)) - 25) <= 1);
  }
}

TEST_CASE("converged diffusion satisfies the discrete residual bound", "[inpaint]") {
  Rng rng(21);
  int w = 30, h = 24;
  std::vector<double> g(static_cast<std::size_t>(w) * h);
  for (auto& v : g) v = rng.uniform();
  Mask holes(w, h);
  for (int y = 8; y < 18; ++y)
    for (int x = 9; x < 21; ++x) holes.at(x, y) = 1;
  double tol = 1e-8;
  int iters = inpaint::detail::laplace_fill(g, holes, tol, 200000, 0.5);
  REQUIRE(iters < 200000);
  for (int y = 9; y < 17; ++y)
    for (int x = 10; x < 20; ++x) {
      double r = 4.0 * g[static_cast<std::size_t>(y) * w + x] -
                 g[static_cast<std::size_t>(y) * w + x - 1] -
                 g[static_cast<std::size_t>(y) * w + x + 1] -
                 g[static_cast<std::size_t>(y - 1) * w + x] -
                 g[static_cast<std::size_t>(y + 1) * w + x];
      CHECK(std::abs(r) <= 4.0 * tol);
    }
}

TEST_CASE("single frame with a mask is pure diffusion", "[inpaint]") {
  Frame f = textured(18, 14, 6);
  Mask m(18, 14);
  for (int y = 4; y < 9; ++y)
    for (int x = 5; x < 12; ++x) m.at(x, y) = 1;
  std::vector<Frame> frames{f};
  std::vector<Mask> masks{m};

  PropagateResult res = propagate_pixels(frames, masks, kNoFlows, kNoFlows);
  CHECK(res.holes[0].bits == m.bits);

  std::vector<Frame> out = inpaint_sequence(frames, masks, kNoFlows, kNoFlows);
  Frame expect = diffuse_fill(f, m);
  CHECK(out[0].pixels == expect.pixels);
}

TEST_CASE("ground-truth flows recover the occluded background", "[inpaint]") {
  synth::SceneSpec spec = synth::preset("moving_cam_dynamic_large");
  spec.frame_count = 12;
  synth::SceneData data = synth::generate_scene(spec);

  PropagateResult res =
      propagate_pixels(data.frames, data.gt_masks, data.gt_flows, data.gt_flows_bwd);

  double err = 0.0;
  std::size_t outside_mismatch = 0, filled = 0, holes = 0, masked = 0;
  for (int t = 0; t < spec.frame_count; ++t) {
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        if (!data.gt_masks[t].at(x, y)) {
          if (res.frames[t].at(x, y) != data.frames[t].at(x, y)) ++outside_mismatch;
          continue;
        }
        ++masked;
        if (res.holes[t].at(x, y)) {
          ++holes;
          continue;
        }
        ++filled;
        err += std::abs(int(res.frames[t].at(x, y)) - int(data.clean_frames[t].at(x, y)));
      }
  }
  CHECK(outside_mismatch == 0);
  REQUIRE(masked > 50000);
  CHECK(filled > 0.9 * masked);
  CHECK(err / filled < 3.0);

  std::vector<Frame> out =
      inpaint_sequence(data.frames, data.gt_masks, data.gt_flows, data.gt_flows_bwd);
  for (int t = 0; t < spec.frame_count; ++t) {
    if (data.gt_masks[t].count() == 0) continue;
    CHECK(psnr(out[t], data.clean_frames[t], data.gt_masks[t]) >= 25.0);
  }
}

TEST_CASE("internally estimated flows track a moving background", "[inpaint]") {
  // lateral camera: background shifts 2.5 px per frame, the mask covers real
  // background so flow is well posed and fills should match the original
  synth::SceneSpec spec;
  spec.width = 64;
  spec.height = 48;
  spec.focal = 60.0;
  spec.background_depth = 10.0;
  spec.camera.kind = synth::CameraPath::Kind::straight;
  spec.camera.velocity = Vec3(12.5, 0.0, 0.0);
  spec.frame_count = 3;
  spec.seed = 5;
  synth::SceneData data = synth::generate_scene(spec);

  Mask m(64, 48);
  for (int y = 20; y < 30; ++y)
    for (int x = 25; x < 40; ++x) m.at(x, y) = 1;
  std::vector<Mask> masks{Mask(64, 48), m, Mask(64, 48)};

  std::vector<Frame> out = inpaint_sequence(data.frames, masks);
  CHECK(out[0].pixels == data.frames[0].pixels);
  CHECK(out[2].pixels == data.frames[2].pixels);
  double err = 0.0;
  for (int y = 20; y < 30; ++y)
    for (int x = 25; x < 40; ++x)
      err += std::abs(int(out[1].at(x, y)) - int(data.frames[1].at(x, y)));
  CHECK(err / 150.0 < 4.0);
}

TEST_CASE("psnr arithmetic and errors", "[inpaint]") {
  Frame a(16, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) a.at(x, y) = static_cast<std::uint8_t>((x * 7 + y * 3) % 240);

  SECTION("identical frames cap at 99 dB") { CHECK(psnr(a, a) == 99.0); }
  SECTION("uniform offset of 10") {
    Frame b = a;
    for (auto& p : b.pixels) p = static_cast<std::uint8_t>(p + 10);
    CHECK(psnr(a, b) == Catch::Approx(28.13).margin(0.01));
  }
  SECTION("region restricts the comparison") {
    Frame b = a;
    b.at(0, 0) = static_cast<std::uint8_t>(a.at(0, 0) + 40);
    Mask region(16, 12);
    region.at(5, 5) = 1;
    CHECK(psnr(a, b, region) == 99.0);
    CHECK(psnr(a, b) < 99.0);
  }
  SECTION("empty region") {
    check_throws_code([&] { psnr(a, a, Mask(16, 12)); }, Errc::empty_region);
  }
  SECTION("dimension mismatch") {
    check_throws_code([&] { psnr(a, Frame(8, 12)); }, Errc::dimension_mismatch);
  }
}

TEST_CASE("ssim matches direct evaluation", "[inpaint]") {
  SECTION("identical frames score one") {
    Frame a = textured(20, 16, 13);
    CHECK(ssim(a, a) == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("inverting a high-variance texture destroys structure") {
    Frame a = textured(32, 32, 17);
    Frame b = a;
    for (auto& p : b.pixels) p = static_cast<std::uint8_t>(255 - p);
    CHECK(ssim(a, b) < 0.2);
  }
  SECTION("constant frames reduce to the luminance term") {
    Frame a(10, 10, 100), b(10, 10, 150);
    double c1 = 6.5025;
    double expect = (2.0 * 100 * 150 + c1) / (100.0 * 100 + 150.0 * 150 + c1);
    CHECK(ssim(a, b) == Catch::Approx(expect).margin(1e-12));
  }
  SECTION("too small or mismatched") {
    check_throws_code([] { ssim(Frame(7, 8), Frame(7, 8)); }, Errc::bad_dimensions);
    check_throws_code([] { ssim(Frame(8, 8), Frame(9, 8)); }, Errc::dimension_mismatch);
  }
}
