#pragma once

#include <vector>

#include "flowseries/mog2.hpp"
#include "flowseries/raster.hpp"
#include "flowseries/vision.hpp"

namespace flowseries {

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;  // minimum eigenvalue of the structure matrix
  int id = 0;
};

struct CornerParams {
  int max_corners = 30;
  double quality_level = 0.01;
  double min_distance = 10.0;
  int block_size = 3;
};

// Smaller eigenvalue of the block-summed structure matrix at every pixel.
FloatRaster min_eigenvalue_map(const GradientField& gradients, int block_size);

/// Shi-Tomasi selection over pixels where `mask` is set. The quality
/// threshold is relative to the strongest response inside the mask. Greedy
/// in order (score desc, y asc, x asc); ids are assigned 0..n-1 in that order.
std::vector<Keypoint> detect_corners(const Frame& frame, const ForegroundMask& mask,
                                     const CornerParams& params);

// Same, on a precomputed eigenvalue map. Candidates closer than
// params.min_distance to any point in `exclude` are rejected.
std::vector<Keypoint> select_corners(const FloatRaster& eigen_map, const ForegroundMask& mask,
                                     const CornerParams& params,
                                     const std::vector<Point2>& exclude = {});

}  // namespace flowseries
