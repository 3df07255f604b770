#include "flowseries/vision.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "flowseries/error.hpp"

namespace flowseries {

namespace {

std::array<float, 5> gaussian_taps() {
  std::array<float, 5> k{};
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double d = i - 2;
    k[i] = static_cast<float>(std::exp(-0.5 * d * d));
    sum += k[i];
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

inline float lerp_sample(const FloatRaster& img, double x, double y) noexcept {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const double bottom = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

}  // namespace

FloatRaster gaussian_blur5(const FloatRaster& image) {
  static const auto taps = gaussian_taps();
  const int w = image.width;
  const int h = image.height;
  FloatRaster tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int k = -2; k <= 2; ++k) acc += taps[k + 2] * image.clamped(x + k, y);
      tmp.at(x, y) = acc;
    }
  }
  FloatRaster out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int k = -2; k <= 2; ++k) acc += taps[k + 2] * tmp.clamped(x, y + k);
      out.at(x, y) = acc;
    }
  }
  return out;
}

ImagePyramid build_pyramid(const FloatRaster& image, int depth) {
  if (depth < 1) throw Error("vision-core", "pyramid depth must be >= 1");
  if (image.width < kMinPyramidSide || image.height < kMinPyramidSide)
    throw Error("vision-core", "image smaller than 8x8: " + std::to_string(image.width) + "x" +
                                   std::to_string(image.height));
  ImagePyramid pyr;
  pyr.levels.push_back(image);
  while (pyr.level_count() < depth) {
    const FloatRaster& prev = pyr.levels.back();
    const int w = prev.width / 2;
    const int h = prev.height / 2;
    if (w < kMinPyramidSide || h < kMinPyramidSide) break;
    const FloatRaster blurred = gaussian_blur5(prev);
    FloatRaster next(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) next.at(x, y) = blurred.at(2 * x, 2 * y);
    pyr.levels.push_back(std::move(next));
  }
  return pyr;
}

ImagePyramid build_pyramid(const Frame& frame, int depth) {
  return build_pyramid(to_float(frame.pixels), depth);
}

GradientField spatial_gradients(const FloatRaster& image) {
  if (image.width < 3 || image.height < 3)
    throw Error("vision-core", "gradient input must be at least 3x3, got " +
                                   std::to_string(image.width) + "x" +
                                   std::to_string(image.height));
  // Scharr: [3 10 3] smoothing across, [-1 0 1] difference along; the
  // response to a unit ramp is 2 * 16 = 32.
  constexpr float kNorm = 1.f / 32.f;
  const int w = image.width;
  const int h = image.height;
  GradientField g{FloatRaster(w, h), FloatRaster(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto p = [&](int dx, int dy) { return image.clamped(x + dx, y + dy); };
      const float gx = 3.f * (p(1, -1) - p(-1, -1)) + 10.f * (p(1, 0) - p(-1, 0)) +
                       3.f * (p(1, 1) - p(-1, 1));
      const float gy = 3.f * (p(-1, 1) - p(-1, -1)) + 10.f * (p(0, 1) - p(0, -1)) +
                       3.f * (p(1, 1) - p(1, -1));
      g.ix.at(x, y) = gx * kNorm;
      g.iy.at(x, y) = gy * kNorm;
    }
  }
  return g;
}

float sample_bilinear(const FloatRaster& image, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0 && x <= image.width - 1 && y <= image.height - 1))
    throw Error("vision-core", "bilinear sample out of bounds at (" + std::to_string(x) + ", " +
                                   std::to_string(y) + ")");
  return lerp_sample(image, x, y);
}

float sample_bilinear_clamped(const FloatRaster& image, double x, double y) noexcept {
  if (std::isnan(x)) x = 0.0;
  if (std::isnan(y)) y = 0.0;
  x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
  return lerp_sample(image, x, y);
}

}  // namespace flowseries
