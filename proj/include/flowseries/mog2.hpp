#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowseries/raster.hpp"

namespace flowseries {

// Binary raster, 1 = foreground.
using ForegroundMask = ByteRaster;

struct Mog2Params {
  int max_components = 5;
  double background_ratio = 0.9;  // T_bg
  double match_sigmas = 2.5;
  double var_init = 15.0 * 15.0;
  double var_min = 4.0;
  double alpha = 0.005;
  bool mask_cleanup = false;  // 3x3 majority filter on the output mask
};

struct GaussianComponent {
  double weight = 0.0;
  double mean = 0.0;
  double var = 0.0;
};

// Per-pixel grayscale mixture-of-Gaussians background model.
//
// The first frame seeds a single full-weight component per pixel and is
// classified as background. Components are kept sorted by weight/sigma,
// descending; a pixel is background when its matching component lies in the
// shortest prefix whose cumulative weight exceeds background_ratio.
class PixelMixtureModel {
 public:
  PixelMixtureModel(int width, int height, Mog2Params params = {});

  // Classifies `frame` against the current model, then folds it in.
  ForegroundMask update_and_classify(const ByteRaster& frame, double alpha);
  ForegroundMask update_and_classify(const ByteRaster& frame) {
    return update_and_classify(frame, params_.alpha);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const Mog2Params& params() const noexcept { return params_; }
  bool initialized() const noexcept { return initialized_; }

  std::span<const GaussianComponent> components(int x, int y) const;

 private:
  bool update_pixel(std::size_t pixel, double value, double alpha);

  int width_;
  int height_;
  Mog2Params params_;
  bool initialized_ = false;
  std::vector<GaussianComponent> comps_;  // width*height*max_components
  std::vector<std::uint8_t> counts_;
};

ForegroundMask mog2_update_and_classify(PixelMixtureModel& model, const Frame& frame,
                                        double alpha);

ForegroundMask majority_filter3(const ForegroundMask& mask);

// Zeroes background pixels.
Frame apply_mask(const Frame& frame, const ForegroundMask& mask);

double foreground_fraction(const ForegroundMask& mask);

}  // namespace flowseries
