#pragma once

#include <vector>

#include "flowseries/raster.hpp"

namespace flowseries {

// Dyadic Gaussian pyramid; levels[0] is the full-resolution image.
struct ImagePyramid {
  std::vector<FloatRaster> levels;

  int level_count() const noexcept { return static_cast<int>(levels.size()); }
  const FloatRaster& level(int i) const { return levels.at(static_cast<std::size_t>(i)); }
};

struct GradientField {
  FloatRaster ix;
  FloatRaster iy;
};

inline constexpr int kMinPyramidSide = 8;

// Each level is the previous one blurred by a 5x5 Gaussian (sigma 1) and
// decimated by two. Stops early, without error, once a level would fall
// below 8x8.
ImagePyramid build_pyramid(const FloatRaster& image, int depth);
ImagePyramid build_pyramid(const Frame& frame, int depth);

// Separable 5x5 Gaussian, sigma 1, edge replicated.
FloatRaster gaussian_blur5(const FloatRaster& image);

// Scharr 3x3 derivatives scaled so that v(x, y) = x gives ix = 1.
GradientField spatial_gradients(const FloatRaster& image);

// Bilinear interpolation. Throws on coordinates outside [0, w-1] x [0, h-1].
float sample_bilinear(const FloatRaster& image, double x, double y);

// Same interpolation with coordinates clamped to the raster (edge replication).
float sample_bilinear_clamped(const FloatRaster& image, double x, double y) noexcept;

}  // namespace flowseries
