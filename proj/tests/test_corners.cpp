#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <tuple>

#include "flowseries/corners.hpp"
#include "flowseries/error.hpp"
#include "test_support.hpp"

using namespace flowseries;
using flowseries::testing::square_image;

namespace {

// Brute-force oracle: explicit structure matrix per pixel, eigenvalues from
// a general symmetric solver.
FloatRaster oracle_min_eig(const GradientField& g, int block) {
  const int r = block / 2;
  FloatRaster out(g.ix.width, g.ix.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          Eigen::Vector2d v(g.ix.clamped(x + dx, y + dy), g.iy.clamped(x + dx, y + dy));
          m += v * v.transpose();
        }
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m, Eigen::EigenvaluesOnly);
      out.at(x, y) = static_cast<float>(std::max(0.0, es.eigenvalues()(0)));
    }
  return out;
}

Frame frame_of(ByteRaster r) { return Frame{std::move(r), 0}; }

ByteRaster textured(int w, int h, std::uint64_t seed) {
  const testing::WaveTexture tex(seed);
  ByteRaster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      r.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(tex(x, y)), 0L, 255L));
  return r;
}

}  // namespace

TEST_CASE("constant image gives a zero map") {
  const auto g = spatial_gradients(FloatRaster(20, 20, 77.f));
  for (float v : min_eigenvalue_map(g, 3).data) CHECK(v == 0.f);
}

TEST_CASE("horizontal ramp is rank one") {
  FloatRaster ramp(30, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 30; ++x) ramp.at(x, y) = static_cast<float>(4 * x);
  const auto map = min_eigenvalue_map(spatial_gradients(ramp), 3);
  for (float v : map.data) CHECK(std::abs(v) <= 1e-4f);
}

TEST_CASE("block size validation") {
  const auto g = spatial_gradients(FloatRaster(8, 8, 1.f));
  CHECK_THROWS_AS(min_eigenvalue_map(g, 2), Error);
  CHECK_THROWS_AS(min_eigenvalue_map(g, 1), Error);
  CHECK_NOTHROW(min_eigenvalue_map(g, 5));
}

TEST_CASE("closed form agrees with the brute-force eigen oracle") {
  const auto img = to_float(textured(40, 32, 9));
  const auto g = spatial_gradients(img);
  for (int block : {3, 5}) {
    const auto a = min_eigenvalue_map(g, block);
    const auto b = oracle_min_eig(g, block);
    float peak = 0.f;
    for (float v : b.data) peak = std::max(peak, v);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(a.data[i] - b.data[i]) <= 1e-4f * peak);
  }
}

TEST_CASE("white square corners are the response maxima") {
  const auto img = square_image(60, 60, 20, 20, 20, 255, 0);
  const auto g = spatial_gradients(to_float(img));
  const auto oracle = oracle_min_eig(g, 3);
  const Point2 geometric[4] = {{19.5, 19.5}, {39.5, 19.5}, {19.5, 39.5}, {39.5, 39.5}};
  for (const auto& c : geometric) {
    // Oracle argmax over the quadrant around this corner.
    const int cx = c.x < 30 ? 0 : 30, cy = c.y < 30 ? 0 : 30;
    float best = -1.f;
    int bx = 0, by = 0;
    for (int y = cy; y < cy + 30; ++y)
      for (int x = cx; x < cx + 30; ++x)
        if (oracle.at(x, y) > best) best = oracle.at(x, y), bx = x, by = y;
    CHECK(std::hypot(bx - c.x, by - c.y) <= 2.0);
  }
  CornerParams p;
  p.max_corners = 4;
  const auto kps = detect_corners(frame_of(img), ForegroundMask(60, 60, 1), p);
  REQUIRE(kps.size() == 4);
  for (const auto& c : geometric) {
    double nearest = 1e9;
    for (const auto& k : kps) nearest = std::min(nearest, std::hypot(k.x - c.x, k.y - c.y));
    CHECK(nearest <= 2.0);
  }
}

TEST_CASE("empty results") {
  CornerParams p;
  CHECK(detect_corners(frame_of(ByteRaster(40, 40, 90)), ForegroundMask(40, 40, 1), p).empty());
  CHECK(detect_corners(frame_of(textured(40, 40, 2)), ForegroundMask(40, 40, 0), p).empty());
}

TEST_CASE("identical blobs tie-break by row then column") {
  // Two identical squares 100 px apart horizontally.
  ByteRaster img(160, 40, 0);
  for (int ox : {20, 120})
    for (int y = 15; y < 25; ++y)
      for (int x = ox; x < ox + 10; ++x) img.at(x, y) = 200;
  CornerParams p;
  p.max_corners = 1;
  const auto kps = detect_corners(frame_of(img), ForegroundMask(160, 40, 1), p);
  REQUIRE(kps.size() == 1);

  // Exhaustive candidate sort.
  const auto map = min_eigenvalue_map(spatial_gradients(to_float(img)), 3);
  std::vector<std::tuple<float, int, int>> cand;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 160; ++x) cand.emplace_back(map.at(x, y), y, x);
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  CHECK(kps[0].x == std::get<2>(cand[0]));
  CHECK(kps[0].y == std::get<1>(cand[0]));
  CHECK(kps[0].x < 80);  // left blob wins the tie
  CHECK(kps[0].id == 0);
}

TEST_CASE("map is invariant to a constant offset") {
  auto img = to_float(textured(32, 32, 4));
  const auto a = min_eigenvalue_map(spatial_gradients(img), 3);
  for (auto& v : img.data) v += 37.f;
  const auto b = min_eigenvalue_map(spatial_gradients(img), 3);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(a.data[i] - b.data[i]) <= 1e-6f * std::max(1.f, a.data[i]));
}

TEST_CASE("selection properties on random textures") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    CornerParams p;
    p.max_corners = 1 + static_cast<int>(rng.uniform() * 40);
    p.min_distance = rng.uniform(2.0, 15.0);
    p.quality_level = rng.uniform(0.001, 0.3);
    const auto img = textured(64, 48, seed + 100);
    ForegroundMask mask(64, 48, 0);
    for (int y = 8; y < 40; ++y)
      for (int x = 4; x < 50; ++x) mask.at(x, y) = 1;
    const auto kps = detect_corners(frame_of(img), mask, p);
    const auto map = min_eigenvalue_map(spatial_gradients(to_float(img)), 3);
    float masked_max = 0.f;
    for (std::size_t i = 0; i < map.size(); ++i)
      if (mask.data[i]) masked_max = std::max(masked_max, map.data[i]);
    REQUIRE(static_cast<int>(kps.size()) <= p.max_corners);
    for (std::size_t i = 0; i < kps.size(); ++i) {
      REQUIRE(kps[i].score > 0.0);
      REQUIRE(kps[i].score >= p.quality_level * masked_max - 1e-6);
      REQUIRE(mask.at(static_cast<int>(kps[i].x), static_cast<int>(kps[i].y)) == 1);
      REQUIRE(kps[i].id == static_cast<int>(i));
      for (std::size_t j = 0; j < i; ++j)
        REQUIRE(std::hypot(kps[i].x - kps[j].x, kps[i].y - kps[j].y) >= p.min_distance);
    }
  }
}

TEST_CASE("exclusion zone rejects nearby candidates") {
  const auto img = square_image(60, 60, 20, 20, 20, 255, 0);
  const auto map = min_eigenvalue_map(spatial_gradients(to_float(img)), 3);
  CornerParams p;
  const auto all = select_corners(map, ForegroundMask(60, 60, 1), p);
  const auto some = select_corners(map, ForegroundMask(60, 60, 1), p, {{20.0, 20.0}});
  CHECK(some.size() < all.size());
  for (const auto& k : some) CHECK(std::hypot(k.x - 20.0, k.y - 20.0) >= p.min_distance);
}
