#include "flowseries/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "flowseries/error.hpp"
#include "flowseries/rng.hpp"
#include "flowseries/vision.hpp"

namespace flowseries {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("synth-video", msg); }

FloatRaster box_blur3(const FloatRaster& in) {
  FloatRaster out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      float acc = 0.f;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) acc += in.clamped(x + dx, y + dy);
      out.at(x, y) = acc / 9.f;
    }
  return out;
}

// Texture padded by one pixel on each side; `alpha` is 1 inside, 0 on the pad.
struct Sprite {
  FloatRaster color;
  FloatRaster alpha;
  int size = 0;
};

Sprite make_sprite(const SceneObject& obj, std::uint64_t seed) {
  const int s = obj.size;
  FloatRaster tex(s, s, static_cast<float>(obj.flat_value));
  if (!obj.flat) {
    Rng rng(derive_seed(seed, "texture", obj.texture_seed));
    for (auto& v : tex.data) v = static_cast<float>(rng.uniform(obj.texture_low, obj.texture_high));
    tex = box_blur3(tex);
  }
  Sprite sp{FloatRaster(s + 2, s + 2, 0.f), FloatRaster(s + 2, s + 2, 0.f), s};
  for (int y = 0; y < s + 2; ++y)
    for (int x = 0; x < s + 2; ++x) sp.color.at(x, y) = tex.clamped(x - 1, y - 1);
  for (int y = 1; y <= s; ++y)
    for (int x = 1; x <= s; ++x) sp.alpha.at(x, y) = 1.f;
  return sp;
}

Point2 read_point(const json& j) {
  if (!j.is_array() || j.size() != 2) fail("expected [x, y] pair, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

json point_json(Point2 p) { return json::array({p.x, p.y}); }

}  // namespace

Point2 Trajectory::at(int frame) const {
  const double t = frame;
  switch (kind) {
    case Kind::linear:
      return {start.x + t * velocity.x, start.y + t * velocity.y};
    case Kind::sinusoidal: {
      const double w = 2.0 * std::numbers::pi / period;
      return {center.x + amplitude.x * std::sin(w * t + phase.x),
              center.y + amplitude.y * std::sin(w * t + phase.y)};
    }
    case Kind::piecewise: {
      if (waypoints.empty()) return {};
      if (t <= waypoints.front().frame) return waypoints.front().pos;
      if (t >= waypoints.back().frame) return waypoints.back().pos;
      for (std::size_t i = 1; i < waypoints.size(); ++i) {
        const auto& a = waypoints[i - 1];
        const auto& b = waypoints[i];
        if (t <= b.frame) {
          const double u = (t - a.frame) / (b.frame - a.frame);
          return {a.pos.x + u * (b.pos.x - a.pos.x), a.pos.y + u * (b.pos.y - a.pos.y)};
        }
      }
      return waypoints.back().pos;
    }
  }
  return {};
}

Point2 camera_offset(const CameraShake& shake, int frame) {
  Rng rng(derive_seed(shake.seed, "shake"));
  const double phx = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phy = rng.uniform(0.0, 2.0 * std::numbers::pi);
  // Two incommensurate periods give an irregular, smooth jitter.
  const double t = frame;
  return {shake.amplitude * 0.5 * (std::sin(t * 0.37 + phx) + std::sin(t * 0.11 + phy)),
          shake.amplitude * 0.5 * (std::sin(t * 0.29 + phy) + std::sin(t * 0.13 + phx))};
}

void validate_scene(const SceneSpec& spec) {
  if (spec.width < 8 || spec.height < 8) fail("scene must be at least 8x8");
  if (spec.frame_count < 2) fail("frame_count must be >= 2");
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& obj = spec.objects[i];
    if (obj.size < 1) fail("object size must be positive");
    if (obj.trajectory.kind == Trajectory::Kind::piecewise) {
      const auto& wp = obj.trajectory.waypoints;
      if (wp.empty()) fail("piecewise trajectory needs waypoints");
      for (std::size_t k = 1; k < wp.size(); ++k)
        if (!(wp[k].frame > wp[k - 1].frame)) fail("waypoint frames must increase");
    }
    const double margin = obj.size / 2.0 + spec.lk_window / 2.0;
    for (int t = 0; t < spec.frame_count; ++t) {
      Point2 p = obj.trajectory.at(t);
      if (spec.camera_shake) {
        const Point2 o = camera_offset(*spec.camera_shake, t);
        p = {p.x + o.x, p.y + o.y};
      }
      if (p.x < margin || p.y < margin || p.x > spec.width - 1 - margin ||
          p.y > spec.height - 1 - margin)
        fail("object " + std::to_string(i) + " leaves the safe region at frame " +
             std::to_string(t) + " (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
             "), margin " + std::to_string(margin));
    }
  }
}

RenderedScene render_scene(const SceneSpec& spec, std::uint64_t seed) {
  validate_scene(spec);
  const int w = spec.width;
  const int h = spec.height;

  // Noise backgrounds are generated with a margin so camera shake never
  // samples outside the texture.
  const int pad = spec.camera_shake ? static_cast<int>(std::ceil(spec.camera_shake->amplitude)) + 2 : 0;
  FloatRaster bg(w + 2 * pad, h + 2 * pad, static_cast<float>(spec.background.value));
  if (spec.background.kind == SceneBackground::Kind::noise) {
    Rng rng(derive_seed(seed, "background", spec.background.seed));
    for (auto& v : bg.data)
      v = static_cast<float>(spec.background.value +
                             rng.uniform(-spec.background.amplitude, spec.background.amplitude));
    bg = box_blur3(bg);
  }

  std::vector<Sprite> sprites;
  for (const auto& obj : spec.objects) sprites.push_back(make_sprite(obj, seed));

  RenderedScene scene;
  scene.sequence.source_id = spec.source_id;
  scene.sequence.object_tag = spec.object_tag;
  scene.ground_truth.assign(spec.objects.size(), {});

  FloatRaster canvas(w, h);
  for (int t = 0; t < spec.frame_count; ++t) {
    const Point2 shake = spec.camera_shake ? camera_offset(*spec.camera_shake, t) : Point2{};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        canvas.at(x, y) = pad ? sample_bilinear_clamped(bg, x + pad - shake.x, y + pad - shake.y)
                              : bg.at(x, y);

    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const Sprite& sp = sprites[i];
      const Point2 traj = spec.objects[i].trajectory.at(t);
      const Point2 c{traj.x + shake.x, traj.y + shake.y};
      scene.ground_truth[i].push_back(c);
      // Padded-sprite coordinate of image pixel (x, y).
      const double ox = c.x - (sp.size - 1) / 2.0 - 1.0;
      const double oy = c.y - (sp.size - 1) / 2.0 - 1.0;
      const int x_lo = std::max(0, static_cast<int>(std::floor(ox)));
      const int y_lo = std::max(0, static_cast<int>(std::floor(oy)));
      const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(ox + sp.size + 1)));
      const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(oy + sp.size + 1)));
      for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
          const double u = x - ox;
          const double v = y - oy;
          if (u < 0.0 || v < 0.0 || u > sp.size + 1 || v > sp.size + 1) continue;
          const float a = sample_bilinear(sp.alpha, u, v);
          if (a <= 0.f) continue;
          const float col = sample_bilinear(sp.color, u, v);
          canvas.at(x, y) = a * col + (1.f - a) * canvas.at(x, y);
        }
      }
    }

    Frame f{ByteRaster(w, h), t};
    for (std::size_t k = 0; k < canvas.size(); ++k)
      f.pixels.data[k] = static_cast<std::uint8_t>(std::clamp(std::lround(canvas.data[k]), 0L, 255L));
    scene.sequence.frames.push_back(std::move(f));
  }
  return scene;
}

SceneSpec scene_from_json(const json& j) {
  try {
    SceneSpec s;
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.frame_count = j.value("frame_count", s.frame_count);
    s.lk_window = j.value("lk_window", s.lk_window);
    s.source_id = j.value("source_id", s.source_id);
    if (j.contains("object_tag") && !j["object_tag"].is_null())
      s.object_tag = j["object_tag"].get<std::string>();
    if (j.contains("background")) {
      const auto& b = j["background"];
      const std::string type = b.value("type", "constant");
      if (type == "constant") {
        s.background.kind = SceneBackground::Kind::constant;
      } else if (type == "noise") {
        s.background.kind = SceneBackground::Kind::noise;
      } else {
        fail("unknown background type '" + type + "'");
      }
      s.background.value = b.value("value", s.background.value);
      s.background.amplitude = b.value("amplitude", s.background.amplitude);
      s.background.seed = b.value("seed", s.background.seed);
    }
    if (j.contains("camera_shake") && !j["camera_shake"].is_null()) {
      CameraShake cs;
      cs.amplitude = j["camera_shake"].value("amplitude", cs.amplitude);
      cs.seed = j["camera_shake"].value("seed", cs.seed);
      s.camera_shake = cs;
    }
    for (const auto& o : j.value("objects", json::array())) {
      SceneObject obj;
      obj.texture_seed = o.value("texture_seed", obj.texture_seed);
      obj.size = o.value("size", obj.size);
      obj.flat = o.value("flat", obj.flat);
      obj.flat_value = o.value("flat_value", obj.flat_value);
      obj.texture_low = o.value("texture_low", obj.texture_low);
      obj.texture_high = o.value("texture_high", obj.texture_high);
      const auto& tj = o.at("trajectory");
      const std::string type = tj.value("type", "linear");
      Trajectory& tr = obj.trajectory;
      if (type == "linear") {
        tr.kind = Trajectory::Kind::linear;
        tr.start = read_point(tj.at("start"));
        tr.velocity = read_point(tj.at("velocity"));
      } else if (type == "sinusoidal") {
        tr.kind = Trajectory::Kind::sinusoidal;
        tr.center = read_point(tj.at("center"));
        tr.amplitude = read_point(tj.at("amplitude"));
        tr.period = tj.value("period", tr.period);
        if (tj.contains("phase")) tr.phase = read_point(tj["phase"]);
      } else if (type == "piecewise") {
        tr.kind = Trajectory::Kind::piecewise;
        for (const auto& wp : tj.at("waypoints")) {
          if (!wp.is_array() || wp.size() != 3) fail("waypoint must be [frame, x, y]");
          tr.waypoints.push_back({wp[0].get<double>(), {wp[1].get<double>(), wp[2].get<double>()}});
        }
      } else {
        fail("unknown trajectory type '" + type + "'");
      }
      s.objects.push_back(std::move(obj));
    }
    return s;
  } catch (const json::exception& e) {
    fail(std::string("invalid scene spec: ") + e.what());
  }
}

json scene_to_json(const SceneSpec& s) {
  json j;
  j["width"] = s.width;
  j["height"] = s.height;
  j["frame_count"] = s.frame_count;
  j["lk_window"] = s.lk_window;
  j["source_id"] = s.source_id;
  if (s.object_tag) j["object_tag"] = *s.object_tag;
  j["background"] = {
      {"type", s.background.kind == SceneBackground::Kind::noise ? "noise" : "constant"},
      {"value", s.background.value},
      {"amplitude", s.background.amplitude},
      {"seed", s.background.seed}};
  if (s.camera_shake)
    j["camera_shake"] = {{"amplitude", s.camera_shake->amplitude}, {"seed", s.camera_shake->seed}};
  j["objects"] = json::array();
  for (const auto& o : s.objects) {
    json oj{{"texture_seed", o.texture_seed}, {"size", o.size},
            {"flat", o.flat},                 {"flat_value", o.flat_value},
            {"texture_low", o.texture_low},   {"texture_high", o.texture_high}};
    const auto& tr = o.trajectory;
    switch (tr.kind) {
      case Trajectory::Kind::linear:
        oj["trajectory"] = {{"type", "linear"}, {"start", point_json(tr.start)},
                            {"velocity", point_json(tr.velocity)}};
        break;
      case Trajectory::Kind::sinusoidal:
        oj["trajectory"] = {{"type", "sinusoidal"},
                            {"center", point_json(tr.center)},
                            {"amplitude", point_json(tr.amplitude)},
                            {"period", tr.period},
                            {"phase", point_json(tr.phase)}};
        break;
      case Trajectory::Kind::piecewise: {
        json wps = json::array();
        for (const auto& wp : tr.waypoints) wps.push_back({wp.frame, wp.pos.x, wp.pos.y});
        oj["trajectory"] = {{"type", "piecewise"}, {"waypoints", wps}};
        break;
      }
    }
    j["objects"].push_back(oj);
  }
  return j;
}

json ground_truth_to_json(const RenderedScene& scene) {
  json objs = json::array();
  for (std::size_t i = 0; i < scene.ground_truth.size(); ++i) {
    json pos = json::array();
    for (const auto& p : scene.ground_truth[i]) pos.push_back(point_json(p));
    objs.push_back({{"id", i}, {"positions", pos}});
  }
  return {{"frame_count", scene.sequence.size()}, {"objects", objs}};
}

void write_scene(const RenderedScene& scene, const fs::path& dir) {
  fs::create_directories(dir);
  char name[32];
  for (const auto& f : scene.sequence.frames) {
    std::snprintf(name, sizeof name, "frame_%04d.pgm", f.index);
    write_pgm(dir / name, f.pixels);
  }
  std::ofstream out(dir / "ground_truth.json");
  if (!out) fail("cannot write " + (dir / "ground_truth.json").string());
  out << ground_truth_to_json(scene).dump(2) << '\n';

  nlohmann::json meta{{"source_id", scene.sequence.source_id}};
  if (scene.sequence.object_tag) meta["object_tag"] = *scene.sequence.object_tag;
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

}  // namespace flowseries
