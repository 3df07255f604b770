#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "flowseries/error.hpp"
#include "flowseries/synth.hpp"
#include "test_support.hpp"

using namespace flowseries;

namespace {

SceneSpec linear_scene() {
  SceneSpec s;
  s.frame_count = 100;
  s.width = 200;
  s.height = 128;
  SceneObject o;
  o.texture_seed = 3;
  o.size = 16;
  o.trajectory.kind = Trajectory::Kind::linear;
  o.trajectory.start = {40.0, 40.0};
  o.trajectory.velocity = {1.0, 0.5};
  s.objects.push_back(o);
  return s;
}

double ssd(const ByteRaster& a, int ax, int ay, const ByteRaster& b, int bx, int by, int half) {
  double s = 0.0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) {
      const double d = double(a.at(ax + dx, ay + dy)) - double(b.at(bx + dx, by + dy));
      s += d * d;
    }
  return s;
}

// Subpixel peak of a 1-D cost around its minimum via parabola fit.
double parabolic(double cm, double c0, double cp) {
  const double den = cm - 2.0 * c0 + cp;
  return den > 0.0 ? 0.5 * (cm - cp) / den : 0.0;
}

}  // namespace

TEST_CASE("static background without objects gives identical frames") {
  SceneSpec s;
  s.frame_count = 10;
  s.background.kind = SceneBackground::Kind::noise;
  s.background.seed = 8;
  const auto r = render_scene(s, 1);
  REQUIRE(r.sequence.size() == 10);
  for (const auto& f : r.sequence.frames) CHECK(f.pixels == r.sequence.frames[0].pixels);
}

TEST_CASE("linear ground truth") {
  const auto r = render_scene(linear_scene(), 5);
  REQUIRE(r.ground_truth.size() == 1);
  REQUIRE(r.ground_truth[0].size() == 100);
  for (int t = 0; t < 100; ++t) {
    CHECK(r.ground_truth[0][t].x == doctest::Approx(40.0 + t * 1.0));
    CHECK(r.ground_truth[0][t].y == doctest::Approx(40.0 + t * 0.5));
  }
}

TEST_CASE("rendering is deterministic per (spec, seed)") {
  auto spec = linear_scene();
  spec.camera_shake = CameraShake{1.5, 4};
  spec.background.kind = SceneBackground::Kind::noise;
  const auto a = render_scene(spec, 11);
  const auto b = render_scene(spec, 11);
  for (std::size_t i = 0; i < a.sequence.size(); ++i)
    REQUIRE(a.sequence.frames[i].pixels == b.sequence.frames[i].pixels);
  testing::TempDir d1, d2;
  write_scene(a, d1.path());
  write_scene(b, d2.path());
  for (const char* name : {"frame_0000.pgm", "frame_0057.pgm", "ground_truth.json"}) {
    std::ifstream f1(d1 / name, std::ios::binary), f2(d2 / name, std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
    REQUIRE(!s1.empty());
    CHECK(s1 == s2);
  }
}

TEST_CASE("trajectory leaving the safe region is rejected before rendering") {
  auto spec = linear_scene();
  spec.objects[0].trajectory.velocity = {2.0, 0.0};  // reaches x = 238
  CHECK_THROWS_AS(validate_scene(spec), Error);
  CHECK_THROWS_AS(render_scene(spec, 1), Error);
  spec = linear_scene();
  spec.objects[0].trajectory.start = {20.0, 40.0};  // margin is 8 + 20
  CHECK_THROWS_AS(render_scene(spec, 1), Error);
  spec = linear_scene();
  spec.frame_count = 1;
  CHECK_THROWS_AS(validate_scene(spec), Error);
}

TEST_CASE("cross-correlation peak sits at the ground-truth displacement") {
  auto spec = linear_scene();
  spec.objects[0].trajectory.velocity = {0.73, 0.41};
  const auto r = render_scene(spec, 2);
  const auto& f0 = r.sequence.frames[0].pixels;
  const Point2 g0 = r.ground_truth[0][0];
  const int cx = static_cast<int>(std::lround(g0.x)), cy = static_cast<int>(std::lround(g0.y));
  for (int t : {5, 17, 40, 66, 99}) {
    const auto& ft = r.sequence.frames[t].pixels;
    const Point2 gt = r.ground_truth[0][t];
    const double ex = gt.x - g0.x, ey = gt.y - g0.y;
    int bx = 0, by = 0;
    double best = 1e300;
    for (int dy = static_cast<int>(ey) - 3; dy <= static_cast<int>(ey) + 3; ++dy)
      for (int dx = static_cast<int>(ex) - 3; dx <= static_cast<int>(ex) + 3; ++dx) {
        const double c = ssd(f0, cx, cy, ft, cx + dx, cy + dy, 5);
        if (c < best) best = c, bx = dx, by = dy;
      }
    const double sx = bx + parabolic(ssd(f0, cx, cy, ft, cx + bx - 1, cy + by, 5), best,
                                     ssd(f0, cx, cy, ft, cx + bx + 1, cy + by, 5));
    const double sy = by + parabolic(ssd(f0, cx, cy, ft, cx + bx, cy + by - 1, 5), best,
                                     ssd(f0, cx, cy, ft, cx + bx, cy + by + 1, 5));
    CHECK(std::abs(sx - ex) <= 0.5);
    CHECK(std::abs(sy - ey) <= 0.5);
  }
}

TEST_CASE("scene json round trip") {
  auto spec = linear_scene();
  spec.camera_shake = CameraShake{0.5, 9};
  spec.object_tag = "car";
  SceneObject sine;
  sine.trajectory.kind = Trajectory::Kind::sinusoidal;
  sine.trajectory.center = {100, 64};
  sine.trajectory.amplitude = {10, 5};
  spec.objects.push_back(sine);
  const auto back = scene_from_json(scene_to_json(spec));
  CHECK(scene_to_json(back) == scene_to_json(spec));
  const auto a = render_scene(spec, 3), b = render_scene(back, 3);
  CHECK(a.sequence.frames[20].pixels == b.sequence.frames[20].pixels);
  CHECK_THROWS_AS(scene_from_json(nlohmann::json::parse(R"({"objects":[{"trajectory":{"type":"spiral"}}]})")), Error);
}

TEST_CASE("piecewise trajectory holds past its ends") {
  Trajectory t;
  t.kind = Trajectory::Kind::piecewise;
  t.waypoints = {{10, {0, 0}}, {20, {10, 20}}};
  CHECK(t.at(0) == Point2{0, 0});
  CHECK(t.at(15) == Point2{5, 10});
  CHECK(t.at(50) == Point2{10, 20});
}
