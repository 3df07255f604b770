#include "flowseries/mog2.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowseries/error.hpp"

namespace flowseries {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("background-mog2", msg); }

double sort_key(const GaussianComponent& c) { return c.weight / std::sqrt(c.var); }

}  // namespace

PixelMixtureModel::PixelMixtureModel(int width, int height, Mog2Params params)
    : width_(width), height_(height), params_(params) {
  if (width <= 0 || height <= 0) fail("model dimensions must be positive");
  if (params_.max_components < 1) fail("max_components must be >= 1");
  if (!(params_.alpha > 0.0 && params_.alpha < 1.0))
    fail("learning rate alpha must lie in (0, 1), got " + std::to_string(params_.alpha));
  if (!(params_.background_ratio > 0.0 && params_.background_ratio <= 1.0))
    fail("background ratio must lie in (0, 1]");
  if (params_.var_min <= 0.0 || params_.var_init < params_.var_min)
    fail("variance floor must be positive and not exceed the initial variance");
  const std::size_t n = static_cast<std::size_t>(width) * height;
  comps_.resize(n * params_.max_components);
  counts_.assign(n, 0);
}

std::span<const GaussianComponent> PixelMixtureModel::components(int x, int y) const {
  const std::size_t p = static_cast<std::size_t>(y) * width_ + x;
  return {comps_.data() + p * params_.max_components, counts_[p]};
}

bool PixelMixtureModel::update_pixel(std::size_t pixel, double x, double alpha) {
  const int kmax = params_.max_components;
  GaussianComponent* c = comps_.data() + pixel * kmax;
  int n = counts_[pixel];

  if (n == 0) {
    c[0] = {1.0, x, params_.var_init};
    counts_[pixel] = 1;
    return false;
  }

  int background_count = n;
  double cum = 0.0;
  for (int k = 0; k < n; ++k) {
    cum += c[k].weight;
    if (cum > params_.background_ratio) {
      background_count = k + 1;
      break;
    }
  }

  const double gate = params_.match_sigmas * params_.match_sigmas;
  int matched = -1;
  for (int k = 0; k < n; ++k) {
    const double d = x - c[k].mean;
    if (d * d <= gate * c[k].var) {
      matched = k;
      break;
    }
  }
  const bool foreground = matched < 0 || matched >= background_count;

  for (int k = 0; k < n; ++k) c[k].weight *= (1.0 - alpha);
  if (matched >= 0) {
    GaussianComponent& m = c[matched];
    m.weight += alpha;
    const double rho = alpha / m.weight;
    const double d = x - m.mean;
    m.mean += rho * d;
    m.var = std::max(params_.var_min, m.var + rho * (d * d - m.var));
  } else {
    int slot = n;
    if (n < kmax) {
      ++n;
    } else {
      slot = static_cast<int>(std::min_element(c, c + n, [](const auto& a, const auto& b) {
                                return a.weight < b.weight;
                              }) - c);
    }
    c[slot] = {alpha, x, params_.var_init};
  }

  double total = 0.0;
  for (int k = 0; k < n; ++k) total += c[k].weight;
  for (int k = 0; k < n; ++k) c[k].weight /= total;
  std::stable_sort(c, c + n, [](const auto& a, const auto& b) { return sort_key(a) > sort_key(b); });
  counts_[pixel] = static_cast<std::uint8_t>(n);
  return foreground;
}

ForegroundMask PixelMixtureModel::update_and_classify(const ByteRaster& frame, double alpha) {
  if (!frame.same_shape(width_, height_))
    fail("frame is " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
         " but model is " + std::to_string(width_) + "x" + std::to_string(height_));
  if (!(alpha > 0.0 && alpha < 1.0))
    fail("learning rate alpha must lie in (0, 1), got " + std::to_string(alpha));
  ForegroundMask mask(width_, height_, 0);
  for (std::size_t p = 0; p < frame.size(); ++p)
    mask.data[p] = update_pixel(p, frame.data[p], alpha) ? 1 : 0;
  initialized_ = true;
  return params_.mask_cleanup ? majority_filter3(mask) : mask;
}

ForegroundMask mog2_update_and_classify(PixelMixtureModel& model, const Frame& frame,
                                        double alpha) {
  return model.update_and_classify(frame.pixels, alpha);
}

ForegroundMask majority_filter3(const ForegroundMask& mask) {
  ForegroundMask out(mask.width, mask.height, 0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      int votes = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) votes += mask.clamped(x + dx, y + dy) ? 1 : 0;
      out.at(x, y) = votes >= 5 ? 1 : 0;
    }
  }
  return out;
}

Frame apply_mask(const Frame& frame, const ForegroundMask& mask) {
  if (!frame.pixels.same_shape(mask))
    throw Error("background-mog2", "mask dimensions do not match frame");
  Frame out = frame;
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    if (!mask.data[i]) out.pixels.data[i] = 0;
  return out;
}

double foreground_fraction(const ForegroundMask& mask) {
  if (mask.size() == 0) return 0.0;
  const auto fg = std::count_if(mask.data.begin(), mask.data.end(), [](auto v) { return v != 0; });
  return static_cast<double>(fg) / static_cast<double>(mask.size());
}

}  // namespace flowseries
