#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowseries/error.hpp"
#include "flowseries/pipeline.hpp"
#include "flowseries/synth.hpp"
#include "test_support.hpp"

using namespace flowseries;
using flowseries::testing::aligned_rms;

namespace {

Track make_track(int id, std::vector<double> xs, std::vector<double> ys, int birth = 0) {
  Track t;
  t.keypoint_id = id;
  t.birth_frame = birth;
  for (std::size_t i = 0; i < xs.size(); ++i) t.positions.push_back({xs[i], ys[i]});
  return t;
}

Track line_track(int id, std::vector<double> xs) {
  std::vector<double> ys(xs.size(), 0.0);
  return make_track(id, std::move(xs), std::move(ys));
}

std::vector<double> axis_of(const std::vector<Point2>& pts, Axis a) {
  std::vector<double> v;
  for (const auto& p : pts) v.push_back(a == Axis::x ? p.x : p.y);
  return v;
}

SceneSpec sinusoid_scene(std::uint64_t tex_seed) {
  SceneSpec s;
  SceneObject o;
  o.texture_seed = tex_seed;
  o.size = 16;
  o.trajectory.kind = Trajectory::Kind::sinusoidal;
  o.trajectory.center = {64.0, 64.0};
  o.trajectory.amplitude = {25.0, 15.0};
  o.trajectory.period = 60.0;
  o.trajectory.phase = {0.0, 1.0};
  s.objects.push_back(o);
  return s;
}

}  // namespace

TEST_CASE("interpolation examples") {
  auto out = interpolate_to_longest({line_track(0, {0, 2}), line_track(1, {5, 5, 5})});
  REQUIRE(out.size() == 2);
  CHECK(out[0].xs() == std::vector<double>{0, 1, 2});
  CHECK(out[1].xs() == std::vector<double>{5, 5, 5});

  out = interpolate_to_longest({line_track(0, {0, 3, 6, 9}), line_track(1, {0, 0, 0, 0, 0, 0, 0})});
  const std::vector<double> expect{0, 1.5, 3, 4.5, 6, 7.5, 9};
  REQUIRE(out[0].xs().size() == 7);
  for (int i = 0; i < 7; ++i) CHECK(out[0].xs()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("interpolation identity and length-1 drop") {
  const std::vector<Track> in{line_track(0, {1, 4, 2}), line_track(1, {7, 8, 9})};
  const auto out = interpolate_to_longest(in);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i].positions == in[i].positions);

  std::vector<std::string> warnings;
  const auto dropped = interpolate_to_longest({line_track(0, {1}), line_track(1, {1, 2, 3})}, &warnings);
  CHECK(dropped.size() == 1);
  CHECK(dropped[0].keypoint_id == 1);
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(interpolate_to_longest({}), Error);
}

TEST_CASE("interpolation preserves monotonicity and endpoints") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 30);
    std::vector<double> xs{rng.uniform(-10, 10)};
    for (int i = 1; i < n; ++i) xs.push_back(xs.back() + rng.uniform(0, 3));
    const auto out = interpolate_to_longest({line_track(0, xs), line_track(1, std::vector<double>(64, 0.0))});
    const auto r = out[0].xs();
    REQUIRE(r.size() == 64);
    REQUIRE(r.front() == xs.front());
    REQUIRE(r.back() == xs.back());
    for (std::size_t i = 1; i < r.size(); ++i) REQUIRE(r[i] >= r[i - 1]);
  }
}

TEST_CASE("least-correlated selection") {
  const auto a = testing::random_walk(1, 80), ay = testing::random_walk(2, 80);
  const auto c = testing::white_noise(3, 80), cy = testing::white_noise(4, 80);
  const Track A = make_track(0, a, ay), B = make_track(1, a, ay), C = make_track(2, c, cy);

  const auto sel = select_least_correlated({A, B, C}, 1);
  REQUIRE(sel.size() == 1);
  CHECK(sel[0].keypoint_id == 2);

  CHECK(select_least_correlated({A}, 5).size() == 1);
  for (int k = 1; k <= 4; ++k) CHECK(select_least_correlated({A, B, C}, k).size() == std::min<std::size_t>(k, 3));

  const Track K = make_track(3, std::vector<double>(80, 4.0), std::vector<double>(80, -1.0));
  const auto mac = mean_abs_correlation({A, B, C, K});
  CHECK(mac[3] == 0.0);
  CHECK(select_least_correlated({A, B, C, K}, 1)[0].keypoint_id == 3);

  // Brute-force Pearson check of the mean for A.
  auto pearson = [](const std::vector<double>& u, const std::vector<double>& v) {
    double mu = 0, mv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) mu += u[i], mv += v[i];
    mu /= u.size(), mv /= v.size();
    double suv = 0, suu = 0, svv = 0;
    for (std::size_t i = 0; i < u.size(); ++i)
      suv += (u[i] - mu) * (v[i] - mv), suu += (u[i] - mu) * (u[i] - mu), svv += (v[i] - mv) * (v[i] - mv);
    return suv / std::sqrt(suu * svv);
  };
  const double expect_a = (1.0 + (std::abs(pearson(a, c)) + std::abs(pearson(ay, cy))) / 2.0) / 2.0;
  CHECK(mean_abs_correlation({A, B, C})[0] == doctest::Approx(expect_a).epsilon(1e-9));
}

TEST_CASE("emission parity and pass-through") {
  FrameSequence seq;
  seq.source_id = "vid";
  seq.object_tag = "bird";
  const Track t = make_track(7, {10.0, 11.5, 13.0}, {1.0, 2.0, 3.0});
  const auto recs = emit_series({t}, seq);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].axis == Axis::x);
  CHECK(recs[0].values == std::vector<double>{10.0, 11.5, 13.0});
  CHECK(recs[1].values == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(recs[0].source_id == "vid");
  CHECK(recs[0].object_tag == "bird");
  CHECK(recs[0].series_id != recs[1].series_id);
  CHECK(emit_series({}, seq).empty());
  std::vector<Track> five(5, t);
  CHECK(emit_series(five, seq).size() == 10);
}

TEST_CASE("sequence too short") {
  SceneSpec s;
  s.frame_count = 31;
  const auto scene = render_scene(s, 1);
  try {
    run_extraction(scene.sequence, PipelineConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("sequence too short") != std::string::npos);
  }
}

TEST_CASE("static textured scene yields no tracks") {
  SceneSpec s;
  s.frame_count = 80;
  s.background.kind = SceneBackground::Kind::noise;
  s.background.seed = 5;
  const auto scene = render_scene(s, 3);
  PipelineConfig cfg;
  cfg.min_track_len = 2;
  CHECK(run_extraction(scene.sequence, cfg).empty());
}

TEST_CASE("moving blob is tracked within 1 px RMS") {
  const auto scene = render_scene(sinusoid_scene(42), 42);
  PipelineConfig cfg;
  cfg.jobs = 2;
  const auto res = extract_series(scene.sequence, cfg);
  REQUIRE(!res.tracks.empty());
  REQUIRE(!res.series.empty());
  CHECK(res.series.size() == 2 * res.selected.size());
  const auto gx = axis_of(scene.ground_truth[0], Axis::x);
  const auto gy = axis_of(scene.ground_truth[0], Axis::y);
  for (const auto& rec : res.series) {
    const double rms = std::min(aligned_rms(rec.values, gx), aligned_rms(rec.values, gy));
    CHECK(rms < 1.0);
  }
}

TEST_CASE("parallel tracking matches sequential") {
  const auto scene = render_scene(sinusoid_scene(9), 9);
  PipelineConfig a, b;
  b.jobs = 4;
  const auto ta = run_extraction(scene.sequence, a);
  const auto tb = run_extraction(scene.sequence, b);
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(ta[i].keypoint_id == tb[i].keypoint_id);
    CHECK(ta[i].positions == tb[i].positions);
  }
}

TEST_CASE("teleporting blob terminates its tracks at the jump") {
  SceneSpec s;
  s.width = 480;
  s.height = 128;
  SceneObject o;
  o.texture_seed = 77;
  o.size = 16;
  o.trajectory.kind = Trajectory::Kind::piecewise;
  o.trajectory.waypoints = {{0, {50.0, 60.0}}, {99, {100.0, 70.0}}, {100, {400.0, 70.0}}, {199, {420.0, 60.0}}};
  s.objects.push_back(o);
  const auto scene = render_scene(s, 1);
  PipelineConfig cfg;
  const auto tracks = run_extraction(scene.sequence, cfg);
  int crossing = 0;
  for (const auto& t : tracks) {
    if (t.birth_frame < 100) {
      CHECK(t.death_frame() >= 95);
      CHECK(t.death_frame() <= 100);
      ++crossing;
    }
  }
  CHECK(crossing > 0);
}
