#include "flowseries/flow_lk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowseries/error.hpp"

namespace flowseries {

namespace {

// Samples the (2*half+1)^2 grid centred at (cx, cy). All samples share the
// same fractional offset, so the bilinear weights are computed once.
void sample_window(const FloatRaster& img, double cx, double cy, int half, float* out) {
  const double fx0 = std::floor(cx);
  const double fy0 = std::floor(cy);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const float ax = static_cast<float>(cx - fx0);
  const float ay = static_cast<float>(cy - fy0);
  const float w00 = (1.f - ax) * (1.f - ay);
  const float w10 = ax * (1.f - ay);
  const float w01 = (1.f - ax) * ay;
  const float w11 = ax * ay;
  const int side = 2 * half + 1;

  const bool inside = x0 - half >= 0 && y0 - half >= 0 && x0 + half + 1 < img.width &&
                      y0 + half + 1 < img.height;
  if (inside) {
    for (int j = 0; j < side; ++j) {
      const float* row0 = &img.at(x0 - half, y0 - half + j);
      const float* row1 = row0 + img.width;
      float* dst = out + static_cast<std::size_t>(j) * side;
      for (int i = 0; i < side; ++i)
        dst[i] = w00 * row0[i] + w10 * row0[i + 1] + w01 * row1[i] + w11 * row1[i + 1];
    }
    return;
  }
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i)
      out[static_cast<std::size_t>(j) * side + i] =
          sample_bilinear_clamped(img, cx - half + i, cy - half + j);
}

// Index range [lo, hi] of window samples whose coordinate c - half + i lies
// inside [0, size - 1]. Empty when lo > hi.
struct Span {
  int lo, hi;
};
Span inside_span(double c, int half, int size) {
  const int side = 2 * half + 1;
  const int lo = std::max(0, static_cast<int>(std::ceil(half - c)));
  const int hi = std::min(side - 1, static_cast<int>(std::floor(size - 1 - c + half)));
  return {lo, hi};
}
Span intersect(Span a, Span b) { return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)}; }

struct Normal {
  double a11 = 0.0, a12 = 0.0, a22 = 0.0;
  std::size_t count = 0;
  double det() const { return a11 * a22 - a12 * a12; }
  double min_eig_per_sample() const {
    const double half_tr = 0.5 * (a11 + a22);
    const double half_diff = 0.5 * (a11 - a22);
    return count ? (half_tr - std::sqrt(half_diff * half_diff + a12 * a12)) / count : 0.0;
  }
};

Normal normal_matrix(const float* gx, const float* gy, int side, Span cols, Span rows) {
  Normal g;
  for (int j = rows.lo; j <= rows.hi; ++j)
    for (int i = cols.lo; i <= cols.hi; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * side + i;
      g.a11 += static_cast<double>(gx[k]) * gx[k];
      g.a12 += static_cast<double>(gx[k]) * gy[k];
      g.a22 += static_cast<double>(gy[k]) * gy[k];
      ++g.count;
    }
  return g;
}

bool finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

}  // namespace

FlowPyramid make_flow_pyramid(const FloatRaster& image, int levels) {
  FlowPyramid fp{build_pyramid(image, levels), {}};
  fp.gradients.reserve(fp.images.levels.size());
  for (const auto& lvl : fp.images.levels) fp.gradients.push_back(spatial_gradients(lvl));
  return fp;
}

FlowPyramid make_flow_pyramid(const Frame& frame, int levels) {
  return make_flow_pyramid(to_float(frame.pixels), levels);
}

FlowResult track_point_lk(const FlowPyramid& prev, const FlowPyramid& next, Point2 p,
                          const LkParams& params) {
  if (prev.level_count() != next.level_count() ||
      !prev.images.level(0).same_shape(next.images.level(0)))
    throw Error("flow-lk", "pyramids do not share geometry");
  if (params.window < 2 || params.max_iter < 1 || params.eps <= 0.0)
    throw Error("flow-lk", "invalid Lucas-Kanade parameters");

  FlowResult result;
  result.position = p;
  {
    const FloatRaster& base = prev.images.level(0);
    if (!finite(p) || p.x < 0.0 || p.y < 0.0 || p.x > base.width - 1 || p.y > base.height - 1)
      return result;
  }
  const int half = params.window / 2;
  const int side = 2 * half + 1;
  const std::size_t n = static_cast<std::size_t>(side) * side;
  std::vector<float> tmpl(n), gx(n), gy(n), warped(n);

  const int top = std::min(params.pyramid_levels, prev.level_count()) - 1;
  double gxs = 0.0, gys = 0.0;  // displacement guess at the current level

  for (int level = top; level >= 0; --level) {
    const double scale = 1.0 / static_cast<double>(1 << level);
    const double px = p.x * scale;
    const double py = p.y * scale;
    const FloatRaster& img_prev = prev.images.level(level);
    const FloatRaster& img_next = next.images.level(level);

    sample_window(img_prev, px, py, half, tmpl.data());
    sample_window(prev.gradients[level].ix, px, py, half, gx.data());
    sample_window(prev.gradients[level].iy, px, py, half, gy.data());

    // Only samples inside the image take part; at coarse levels the window
    // can be larger than the image, and replicated borders do not move with
    // the content.
    const Span cols_prev = inside_span(px, half, img_prev.width);
    const Span rows_prev = inside_span(py, half, img_prev.height);
    const Normal g_prev = normal_matrix(gx.data(), gy.data(), side, cols_prev, rows_prev);
    if (g_prev.count == 0 || g_prev.min_eig_per_sample() < params.min_eig || g_prev.det() <= 0.0) {
      result.status = TrackStatus::lost;
      result.position = {p.x + gxs / scale, p.y + gys / scale};
      return result;
    }

    double dx = gxs, dy = gys;
    for (int it = 0; it < params.max_iter; ++it) {
      ++result.iterations;
      const Span cols = intersect(cols_prev, inside_span(px + dx, half, img_next.width));
      const Span rows = intersect(rows_prev, inside_span(py + dy, half, img_next.height));
      const bool full = cols.lo == cols_prev.lo && cols.hi == cols_prev.hi &&
                        rows.lo == rows_prev.lo && rows.hi == rows_prev.hi;
      const Normal g = full ? g_prev : normal_matrix(gx.data(), gy.data(), side, cols, rows);
      if (g.count == 0 || g.min_eig_per_sample() < params.min_eig || g.det() <= 0.0) {
        result.status = TrackStatus::lost;
        result.position = {p.x + dx / scale, p.y + dy / scale};
        return result;
      }
      sample_window(img_next, px + dx, py + dy, half, warped.data());
      double bx = 0.0, by = 0.0;
      for (int j = rows.lo; j <= rows.hi; ++j)
        for (int i = cols.lo; i <= cols.hi; ++i) {
          const std::size_t k = static_cast<std::size_t>(j) * side + i;
          const double diff = static_cast<double>(tmpl[k]) - warped[k];
          bx += diff * gx[k];
          by += diff * gy[k];
        }
      const double det = g.det();
      const double ex = (g.a22 * bx - g.a12 * by) / det;
      const double ey = (g.a11 * by - g.a12 * bx) / det;
      dx += ex;
      dy += ey;
      if (!std::isfinite(dx) || !std::isfinite(dy)) break;
      if (ex * ex + ey * ey < params.eps * params.eps) break;
    }
    if (level > 0) {
      gxs = 2.0 * dx;
      gys = 2.0 * dy;
    } else {
      gxs = dx;
      gys = dy;
    }
  }

  result.position = {p.x + gxs, p.y + gys};
  const FloatRaster& img0 = next.images.level(0);
  if (!finite(result.position) || result.position.x < 0.0 || result.position.y < 0.0 ||
      result.position.x > img0.width - 1 || result.position.y > img0.height - 1) {
    result.status = TrackStatus::lost;
    return result;
  }

  sample_window(prev.images.level(0), p.x, p.y, half, tmpl.data());
  sample_window(img0, result.position.x, result.position.y, half, warped.data());
  const Span cols = intersect(inside_span(p.x, half, img0.width),
                              inside_span(result.position.x, half, img0.width));
  const Span rows = intersect(inside_span(p.y, half, img0.height),
                              inside_span(result.position.y, half, img0.height));
  double err = 0.0;
  std::size_t count = 0;
  for (int j = rows.lo; j <= rows.hi; ++j)
    for (int i = cols.lo; i <= cols.hi; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * side + i;
      err += std::abs(static_cast<double>(tmpl[k]) - warped[k]);
      ++count;
    }
  result.residual = count ? err / static_cast<double>(count) : 0.0;
  result.status = TrackStatus::tracked;
  return result;
}

FlowResult track_point_lk(const ImagePyramid& prev, const ImagePyramid& next, Point2 p,
                          const LkParams& params) {
  auto with_gradients = [](const ImagePyramid& pyr) {
    FlowPyramid fp{pyr, {}};
    for (const auto& lvl : pyr.levels) fp.gradients.push_back(spatial_gradients(lvl));
    return fp;
  };
  return track_point_lk(with_gradients(prev), with_gradients(next), p, params);
}

double forward_backward_error(Point2 p0, Point2 p_roundtrip) noexcept {
  return std::hypot(p0.x - p_roundtrip.x, p0.y - p_roundtrip.y);
}

FbCheckResult fb_decide(Point2 p0, const FlowResult& forward, const FlowResult& backward,
                        const FbParams& params) noexcept {
  FbCheckResult r;
  if (forward.status != TrackStatus::tracked || backward.status != TrackStatus::tracked) {
    r.e_fb = std::numeric_limits<double>::infinity();
    r.passed = false;
    return r;
  }
  r.e_fb = forward_backward_error(p0, backward.position);
  r.passed = r.e_fb < params.fb_threshold && forward.residual < params.residual_threshold &&
             backward.residual < params.residual_threshold;
  return r;
}

FbOutcome fb_filter(const FlowPyramid& prev, const FlowPyramid& next, Point2 p,
                    const LkParams& lk, const FbParams& fb) {
  if (fb.fb_threshold <= 0.0 || fb.residual_threshold <= 0.0)
    throw Error("flow-lk", "forward-backward thresholds must be positive");
  FbOutcome out;
  out.forward = track_point_lk(prev, next, p, lk);
  if (out.forward.status == TrackStatus::tracked) {
    out.backward = track_point_lk(next, prev, out.forward.position, lk);
  } else {
    out.backward.position = out.forward.position;
    out.backward.status = TrackStatus::lost;
  }
  out.check = fb_decide(p, out.forward, out.backward, fb);
  return out;
}

}  // namespace flowseries
