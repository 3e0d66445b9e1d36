// Core raster types: grayscale frames, dense flow fields, binary masks.
//
// Pixel (x, y) of a W x H image lives at row-major index y * W + x. Sample
// coordinates are measured at pixel centers, i.e. the continuous coordinate
// (x, y) = (j, i) is the exact center of pixel column j, row i.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stasis/error.hpp"

namespace stasis {

struct Frame {
  int index = 0;
  double timestamp = 0.0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  Frame(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
    require(w > 0 && h > 0, Errc::bad_dimensions, "frame size must be positive");
    pixels.assign(static_cast<std::size_t>(w) * h, fill);
  }

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool same_size(const Frame& o) const { return width == o.width && height == o.height; }
};

struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;  // horizontal displacement, +x to the right
  std::vector<float> v;  // vertical displacement, +y downward

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h) {
    require(w > 0 && h > 0, Errc::bad_dimensions, "flow size must be positive");
    u.assign(static_cast<std::size_t>(w) * h, 0.0f);
    v.assign(static_cast<std::size_t>(w) * h, 0.0f);
  }

  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1 per pixel

  Mask() = default;
  Mask(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
    require(w > 0 && h > 0, Errc::bad_dimensions, "mask size must be positive");
    bits.assign(static_cast<std::size_t>(w) * h, fill);
  }

  std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b ? 1 : 0;
    return n;
  }

  double fraction() const {
    return bits.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits.size());
  }
};

// Per-pixel real-valued map (flow residuals, consistency errors).
struct ScalarField {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  ScalarField() = default;
  ScalarField(int w, int h, float fill = 0.0f) : width(w), height(h) {
    require(w > 0 && h > 0, Errc::bad_dimensions, "field size must be positive");
    values.assign(static_cast<std::size_t>(w) * h, fill);
  }

  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {
inline double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }
}  // namespace detail

// Bilinear sample with replicate-border clamping. Coordinates are at pixel
// centers; samples outside the image clamp to the nearest edge pixel.
inline double sample_bilinear(const std::uint8_t* data, int w, int h, double x, double y) {
  x = detail::clampd(x, 0.0, w - 1.0);
  y = detail::clampd(y, 0.0, h - 1.0);
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = std::min(x0 + 1, w - 1);
  int y1 = std::min(y0 + 1, h - 1);
  double fx = x - x0;
  double fy = y - y0;
  double a = data[static_cast<std::size_t>(y0) * w + x0];
  double b = data[static_cast<std::size_t>(y0) * w + x1];
  double c = data[static_cast<std::size_t>(y1) * w + x0];
  double d = data[static_cast<std::size_t>(y1) * w + x1];
  return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

inline double sample_bilinear(const Frame& f, double x, double y) {
  return sample_bilinear(f.pixels.data(), f.width, f.height, x, y);
}

inline float sample_bilinear(const std::vector<float>& data, int w, int h, double x, double y) {
  x = detail::clampd(x, 0.0, w - 1.0);
  y = detail::clampd(y, 0.0, h - 1.0);
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = std::min(x0 + 1, w - 1);
  int y1 = std::min(y0 + 1, h - 1);
  double fx = x - x0;
  double fy = y - y0;
  double a = data[static_cast<std::size_t>(y0) * w + x0];
  double b = data[static_cast<std::size_t>(y0) * w + x1];
  double c = data[static_cast<std::size_t>(y1) * w + x0];
  double d = data[static_cast<std::size_t>(y1) * w + x1];
  return static_cast<float>((1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d));
}

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(detail::clampd(std::lround(v), 0.0, 255.0));
}

}  // namespace stasis
