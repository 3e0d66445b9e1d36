#include <catch2/catch_amalgamated.hpp>

#include "stasis/error.hpp"
#include "stasis/image.hpp"

using namespace stasis;

TEST_CASE("Frame construction and indexing", "[image]") {
  Frame f(4, 3, 7);
  CHECK(f.pixels.size() == 12);
  CHECK(f.at(0, 0) == 7);
  f.at(2, 1) = 200;
  CHECK(f.pixels[1 * 4 + 2] == 200);
  CHECK_THROWS_AS(Frame(0, 5), Error);
  CHECK_THROWS_AS(Frame(5, -1), Error);
}

TEST_CASE("Mask count and fraction", "[image]") {
  Mask m(10, 10);
  CHECK(m.count() == 0);
  CHECK(m.fraction() == 0.0);
  m.at(3, 4) = 1;
  m.at(9, 9) = 1;
  CHECK(m.count() == 2);
  CHECK(m.fraction() == Catch::Approx(0.02));
}

TEST_CASE("bilinear sampling interpolates and clamps at borders", "[image]") {
  Frame f(3, 2);
  // 10 20 30
  // 40 50 60
  f.at(0, 0) = 10; f.at(1, 0) = 20; f.at(2, 0) = 30;
  f.at(0, 1) = 40; f.at(1, 1) = 50; f.at(2, 1) = 60;

  CHECK(sample_bilinear(f, 0.0, 0.0) == Catch::Approx(10.0));
  CHECK(sample_bilinear(f, 2.0, 1.0) == Catch::Approx(60.0));
  CHECK(sample_bilinear(f, 0.5, 0.0) == Catch::Approx(15.0));
  CHECK(sample_bilinear(f, 0.0, 0.5) == Catch::Approx(25.0));
  CHECK(sample_bilinear(f, 0.5, 0.5) == Catch::Approx(30.0));
  // Outside the grid clamps to the nearest valid sample.
  CHECK(sample_bilinear(f, -5.0, -5.0) == Catch::Approx(10.0));
  CHECK(sample_bilinear(f, 10.0, 10.0) == Catch::Approx(60.0));
  CHECK(sample_bilinear(f, 1.0, 1.7) == Catch::Approx(50.0));
}

TEST_CASE("bilinear sampling of float grids", "[image]") {
  std::vector<float> g = {0.0f, 1.0f, 2.0f, 3.0f};  // 2x2
  CHECK(sample_bilinear(g, 2, 2, 0.5, 0.5) == Catch::Approx(1.5));
  CHECK(sample_bilinear(g, 2, 2, 1.0, 0.0) == Catch::Approx(1.0));
  CHECK(sample_bilinear(g, 2, 2, -1.0, 2.0) == Catch::Approx(2.0));
}

TEST_CASE("to_u8 rounds to nearest and saturates", "[image]") {
  CHECK(to_u8(0.4) == 0);
  CHECK(to_u8(0.5) == 1);
  CHECK(to_u8(127.49) == 127);
  CHECK(to_u8(254.6) == 255);
  CHECK(to_u8(300.0) == 255);
  CHECK(to_u8(-3.0) == 0);
}
