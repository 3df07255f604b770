#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace flowseries {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Row-major single-channel image.
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }

  // Edge-replicated read.
  const T& clamped(int x, int y) const {
    x = x < 0 ? 0 : (x >= width ? width - 1 : x);
    y = y < 0 ? 0 : (y >= height ? height - 1 : y);
    return at(x, y);
  }

  std::size_t size() const noexcept { return data.size(); }
  bool same_shape(int w, int h) const noexcept { return w == width && h == height; }
  template <typename U>
  bool same_shape(const Raster<U>& o) const noexcept {
    return o.width == width && o.height == height;
  }

  friend bool operator==(const Raster&, const Raster&) = default;
};

using FloatRaster = Raster<float>;
using ByteRaster = Raster<std::uint8_t>;

// 8-bit grayscale frame with its ordinal in the sequence.
struct Frame {
  ByteRaster pixels;
  int index = 0;

  int width() const noexcept { return pixels.width; }
  int height() const noexcept { return pixels.height; }
};

FloatRaster to_float(const ByteRaster& r);

}  // namespace flowseries
