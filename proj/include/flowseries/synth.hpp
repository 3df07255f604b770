#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowseries/frame_io.hpp"
#include "flowseries/raster.hpp"

namespace flowseries {

struct Trajectory {
  enum class Kind { linear, sinusoidal, piecewise };
  Kind kind = Kind::linear;
  Point2 start;       // linear
  Point2 velocity;    // linear, px/frame
  Point2 center;      // sinusoidal
  Point2 amplitude;   // sinusoidal
  double period = 50.0;  // sinusoidal, frames
  Point2 phase;       // sinusoidal, radians per axis
  struct Waypoint {
    double frame;
    Point2 pos;
  };
  std::vector<Waypoint> waypoints;  // piecewise-linear, held constant past the ends

  Point2 at(int frame) const;
};

struct SceneObject {
  std::uint64_t texture_seed = 0;
  int size = 16;
  bool flat = false;  // uniform patch, for exercising loss paths
  double flat_value = 200.0;
  double texture_low = 40.0;
  double texture_high = 230.0;
  Trajectory trajectory;
};

struct SceneBackground {
  enum class Kind { constant, noise };
  Kind kind = Kind::constant;
  double value = 60.0;
  double amplitude = 40.0;  // noise: uniform in value +- amplitude, then smoothed
  std::uint64_t seed = 0;
};

struct CameraShake {
  double amplitude = 1.0;  // px
  std::uint64_t seed = 0;
};

struct SceneSpec {
  int width = 128;
  int height = 128;
  int frame_count = 200;
  SceneBackground background;
  std::vector<SceneObject> objects;
  std::optional<CameraShake> camera_shake;
  int lk_window = 40;  // keeps trajectories at least size/2 + window/2 from borders
  std::string source_id = "synth";
  std::optional<std::string> object_tag;
};

struct RenderedScene {
  FrameSequence sequence;
  // ground_truth[object][frame] = image-space centre of the object's texture.
  std::vector<std::vector<Point2>> ground_truth;
};

// Throws Error("synth-video", ...) when a trajectory leaves the safe region
// or the spec is otherwise invalid.
void validate_scene(const SceneSpec& spec);

// Deterministic in (spec, seed).
RenderedScene render_scene(const SceneSpec& spec, std::uint64_t seed);

Point2 camera_offset(const CameraShake& shake, int frame);

SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& spec);
nlohmann::json ground_truth_to_json(const RenderedScene& scene);

// frame_0000.pgm ... plus ground_truth.json.
void write_scene(const RenderedScene& scene, const std::filesystem::path& dir);

}  // namespace flowseries
