#include "flowseries/corners.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowseries/error.hpp"

namespace flowseries {

FloatRaster min_eigenvalue_map(const GradientField& g, int block_size) {
  if (block_size < 3 || block_size % 2 == 0)
    throw Error("corners-shitomasi", "block size must be odd and >= 3, got " +
                                         std::to_string(block_size));
  const int w = g.ix.width;
  const int h = g.ix.height;
  const int r = block_size / 2;
  FloatRaster out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double gx = g.ix.clamped(x + dx, y + dy);
          const double gy = g.iy.clamped(x + dx, y + dy);
          sxx += gx * gx;
          syy += gy * gy;
          sxy += gx * gy;
        }
      }
      const double half_tr = 0.5 * (sxx + syy);
      const double half_diff = 0.5 * (sxx - syy);
      const double lambda = half_tr - std::sqrt(half_diff * half_diff + sxy * sxy);
      out.at(x, y) = static_cast<float>(std::max(0.0, lambda));
    }
  }
  return out;
}

std::vector<Keypoint> select_corners(const FloatRaster& eig, const ForegroundMask& mask,
                                     const CornerParams& p, const std::vector<Point2>& exclude) {
  if (!(p.quality_level > 0.0 && p.quality_level < 1.0))
    throw Error("corners-shitomasi", "quality level must lie in (0, 1)");
  if (p.max_corners < 1) throw Error("corners-shitomasi", "max_corners must be >= 1");
  if (!eig.same_shape(mask)) throw Error("corners-shitomasi", "mask dimensions do not match frame");

  float best = 0.f;
  for (std::size_t i = 0; i < eig.size(); ++i)
    if (mask.data[i]) best = std::max(best, eig.data[i]);
  if (best <= 0.f) return {};
  const float threshold = static_cast<float>(p.quality_level * best);

  struct Candidate {
    float score;
    int x, y;
  };
  std::vector<Candidate> cands;
  for (int y = 0; y < eig.height; ++y) {
    for (int x = 0; x < eig.width; ++x) {
      const float v = eig.at(x, y);
      if (mask.at(x, y) && v > 0.f && v >= threshold) cands.push_back({v, x, y});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  const double min_d2 = p.min_distance * p.min_distance;
  auto too_close = [&](double x, double y, const auto& pts) {
    return std::any_of(pts.begin(), pts.end(), [&](const auto& q) {
      const double dx = q.x - x, dy = q.y - y;
      return dx * dx + dy * dy < min_d2;
    });
  };

  std::vector<Keypoint> out;
  for (const auto& c : cands) {
    if (static_cast<int>(out.size()) >= p.max_corners) break;
    if (too_close(c.x, c.y, out) || too_close(c.x, c.y, exclude)) continue;
    out.push_back({static_cast<double>(c.x), static_cast<double>(c.y), c.score,
                   static_cast<int>(out.size())});
  }
  return out;
}

std::vector<Keypoint> detect_corners(const Frame& frame, const ForegroundMask& mask,
                                     const CornerParams& params) {
  const auto g = spatial_gradients(to_float(frame.pixels));
  return select_corners(min_eigenvalue_map(g, params.block_size), mask, params);
}

}  // namespace flowseries
