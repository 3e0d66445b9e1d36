#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "stasis/flow.hpp"
#include "stasis/rng.hpp"

using namespace stasis;

namespace {

// Smooth texture that is periodic in both axes, so circular shifts are exact
// translations. Integer frequencies keep the periodicity exact.
Frame make_periodic_texture(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  struct Wave {
    double fx, fy, ax, px, py;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 6; ++k) {
    waves.push_back({static_cast<double>(1 + rng.below(4)), static_cast<double>(1 + rng.below(4)),
                     rng.uniform(10.0, 20.0), rng.uniform(0.0, 6.28), rng.uniform(0.0, 6.28)});
  }
  Frame f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 128.0;
      for (const auto& wv : waves) {
        v += wv.ax * std::sin(2.0 * M_PI * wv.fx * x / w + wv.px) *
             std::cos(2.0 * M_PI * wv.fy * y / h + wv.py);
      }
      f.at(x, y) = to_u8(v);
    }
  }
  return f;
}

Frame circular_shift(const Frame& f, int dx, int dy) {
  Frame out(f.width, f.height);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      int sx = ((x - dx) % f.width + f.width) % f.width;
      int sy = ((y - dy) % f.height + f.height) % f.height;
      out.at(x, y) = f.at(sx, sy);
    }
  }
  return out;
}

struct MeanFlow {
  double u, v;
};

MeanFlow interior_mean(const FlowField& flow, int margin) {
  double su = 0.0, sv = 0.0;
  long n = 0;
  for (int y = margin; y < flow.height - margin; ++y) {
    for (int x = margin; x < flow.width - margin; ++x) {
      su += flow.u[flow.idx(x, y)];
      sv += flow.v[flow.idx(x, y)];
      ++n;
    }
  }
  return {su / n, sv / n};
}

}  // namespace

TEST_CASE("identical frames give near-zero flow", "[flow]") {
  Frame f = make_periodic_texture(96, 72, derive_seed(20, "flow"));
  FlowField fl = flow::dense_flow(f, f, {});
  double mean_mag = 0.0;
  for (std::size_t i = 0; i < fl.u.size(); ++i) {
    mean_mag += std::sqrt(static_cast<double>(fl.u[i]) * fl.u[i] +
                          static_cast<double>(fl.v[i]) * fl.v[i]);
  }
  mean_mag /= static_cast<double>(fl.u.size());
  CHECK(mean_mag < 0.05);
}

TEST_CASE("integer circular shifts are recovered within a quarter pixel", "[flow]") {
  Frame f1 = make_periodic_texture(160, 120, derive_seed(21, "flow"));

  SECTION("horizontal shift (2,0)") {
    Frame f2 = circular_shift(f1, 2, 0);
    FlowField fl = flow::dense_flow(f1, f2, {});
    MeanFlow m = interior_mean(fl, 16);
    CHECK(std::abs(m.u - 2.0) < 0.25);
    CHECK(std::abs(m.v - 0.0) < 0.25);
  }

  SECTION("vertical shift (0,3)") {
    Frame f2 = circular_shift(f1, 0, 3);
    FlowField fl = flow::dense_flow(f1, f2, {});
    MeanFlow m = interior_mean(fl, 16);
    CHECK(std::abs(m.u - 0.0) < 0.25);
    CHECK(std::abs(m.v - 3.0) < 0.25);
  }
}

TEST_CASE("jacobi sweeps never increase the level energy", "[flow]") {
  Frame f1 = make_periodic_texture(80, 60, derive_seed(22, "flow"));
  Frame f2 = circular_shift(f1, 1, 2);
  std::vector<double> energies;
  flow::dense_flow(f1, f2, {}, &energies);
  REQUIRE(energies.size() == 201);  // initial + one per sweep
  for (std::size_t i = 1; i < energies.size(); ++i) {
    CHECK(energies[i] <= energies[i - 1] + 1e-6 * std::max(1.0, std::abs(energies[i - 1])));
  }
  CHECK(energies.back() < energies.front());
}

TEST_CASE("dense_flow validates inputs", "[flow]") {
  Frame a(16, 16), b(16, 12);
  CHECK_THROWS_AS(flow::dense_flow(a, b, {}), Error);
  flow::FlowParams bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(flow::dense_flow(a, a, bad), Error);
  bad = {};
  bad.iterations = 0;
  CHECK_THROWS_AS(flow::dense_flow(a, a, bad), Error);
  bad = {};
  bad.levels = 0;
  CHECK_THROWS_AS(flow::dense_flow(a, a, bad), Error);
}

TEST_CASE("warp_image with zero flow is the identity", "[flow]") {
  Frame f = make_periodic_texture(40, 30, derive_seed(23, "flow"));
  FlowField zero(40, 30);
  auto [out, valid] = flow::warp_image(f, zero);
  CHECK(out.pixels == f.pixels);
  CHECK(valid.count() == valid.bits.size());
}

TEST_CASE("warp_image recovers an integer shift on the interior grid", "[flow]") {
  Frame f = make_periodic_texture(40, 30, derive_seed(24, "flow"));
  // g(x,y) = f(x-1,y); warping g with constant flow (1,0) asks for
  // g(x+1,y) = f(x,y).
  Frame g(40, 30);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) g.at(x, y) = f.at(std::max(x - 1, 0), y);
  }
  FlowField one(40, 30);
  for (auto& u : one.u) u = 1.0f;
  auto [out, valid] = flow::warp_image(g, one);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 39; ++x) {
      REQUIRE(valid.at(x, y) == 1);
      REQUIRE(out.at(x, y) == f.at(x, y));
    }
    // x = 39 samples at 40, out of bounds.
    CHECK(valid.at(39, y) == 0);
    CHECK(out.at(39, y) == 0);
  }
}

TEST_CASE("warp_image marks fully out-of-bounds flow invalid", "[flow]") {
  Frame f(8, 8, 200);
  FlowField off(8, 8);
  for (auto& u : off.u) u = 8.0f;
  auto [out, valid] = flow::warp_image(f, off);
  CHECK(valid.count() == 0);
  for (auto px : out.pixels) CHECK(px == 0);

  FlowField wrong(8, 7);
  CHECK_THROWS_AS(flow::warp_image(f, wrong), Error);
}

TEST_CASE("flow_consistency of exact inverse fields is zero", "[flow]") {
  FlowField fwd(12, 10), bwd(12, 10);
  for (auto& u : fwd.u) u = 1.5f;
  for (auto& u : bwd.u) u = -1.5f;
  ScalarField e = flow::flow_consistency(fwd, bwd);
  // Pixels whose target x + 1.5 stays in bounds must read exactly zero.
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) CHECK(e.at(x, y) == 0.0f);
    CHECK(std::isinf(e.at(11, y)));
  }
}

TEST_CASE("flow_consistency measures mismatch magnitude", "[flow]") {
  FlowField fwd(10, 6), bwd(10, 6);
  for (auto& u : fwd.u) u = 2.0f;
  for (auto& u : bwd.u) u = -1.0f;
  ScalarField e = flow::flow_consistency(fwd, bwd);
  CHECK(e.at(3, 3) == Catch::Approx(1.0));

  FlowField small(10, 5);
  CHECK_THROWS_AS(flow::flow_consistency(fwd, small), Error);
}
