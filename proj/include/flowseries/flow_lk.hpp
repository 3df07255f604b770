#pragma once

#include <vector>

#include "flowseries/corners.hpp"
#include "flowseries/raster.hpp"
#include "flowseries/vision.hpp"

namespace flowseries {

struct LkParams {
  int window = 40;  // sampled as a (window+1)^2 grid centred on the point
  int pyramid_levels = 3;
  int max_iter = 30;      // per level
  double eps = 0.01;      // px, per level
  double min_eig = 1e-4;  // on the window-averaged gradient matrix
};

struct FbParams {
  double fb_threshold = 50.0;
  double residual_threshold = 80.0;
};

enum class TrackStatus { tracked, lost };

struct FlowResult {
  Point2 position;
  TrackStatus status = TrackStatus::lost;
  double residual = 0.0;  // mean |I_prev - I_next| over the level-0 window
  int iterations = 0;     // summed over levels
};

struct FbCheckResult {
  double e_fb = 0.0;  // +inf when either direction was lost
  bool passed = false;
};

struct FbOutcome {
  FbCheckResult check;
  FlowResult forward;
  FlowResult backward;
};

// Image pyramid plus per-level gradients, built once per frame and shared by
// every keypoint tracked from or to that frame.
struct FlowPyramid {
  ImagePyramid images;
  std::vector<GradientField> gradients;

  int level_count() const noexcept { return images.level_count(); }
};

FlowPyramid make_flow_pyramid(const FloatRaster& image, int levels);
FlowPyramid make_flow_pyramid(const Frame& frame, int levels);

/// Coarse-to-fine Lucas-Kanade. At each level the 2x2 system G d = b is
/// solved iteratively with G from the previous image's gradients and b from
/// the bilinearly sampled temporal difference at the current estimate. Loss
/// (near-singular G, estimate leaving the frame) is reported through status.
FlowResult track_point_lk(const FlowPyramid& prev, const FlowPyramid& next, Point2 p,
                          const LkParams& params);
FlowResult track_point_lk(const ImagePyramid& prev, const ImagePyramid& next, Point2 p,
                          const LkParams& params);

// || p0 - p_roundtrip ||_2
double forward_backward_error(Point2 p0, Point2 p_roundtrip) noexcept;

// Accept/reject given already computed forward and backward results.
FbCheckResult fb_decide(Point2 p0, const FlowResult& forward, const FlowResult& backward,
                        const FbParams& params) noexcept;

// Forward track prev->next, backward track next->prev from the forward
// result, then fb_decide.
FbOutcome fb_filter(const FlowPyramid& prev, const FlowPyramid& next, Point2 p,
                    const LkParams& lk, const FbParams& fb);

}  // namespace flowseries
