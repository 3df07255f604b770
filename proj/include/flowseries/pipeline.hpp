#pragma once

#include <functional>
#include <string>
#include <vector>

#include "flowseries/corners.hpp"
#include "flowseries/flow_lk.hpp"
#include "flowseries/frame_io.hpp"
#include "flowseries/mog2.hpp"

namespace flowseries {

struct PipelineConfig {
  Mog2Params mog2;
  CornerParams corners;
  LkParams lk;
  FbParams fb;
  int burn_in = 30;              // MOG2 frames before the first detection
  int min_live = 5;              // re-detect when fewer tracks are alive
  double redetect_radius = 10.0; // px around live tracks excluded on re-detection
  int min_track_len = 50;        // frames
  int keep_tracks = 5;           // least-correlated tracks kept per video
  int jobs = 1;
  // Called with (frame index, mask) for every classified frame, if set.
  std::function<void(int, const ForegroundMask&)> mask_sink;
};

// One keypoint followed over consecutive frames. A track ends at the first
// frame pair where the forward-backward check fails, so positions are
// contiguous from birth_frame.
struct Track {
  int keypoint_id = 0;
  int birth_frame = 0;
  std::vector<Point2> positions;

  int length() const noexcept { return static_cast<int>(positions.size()); }
  int death_frame() const noexcept { return birth_frame + length() - 1; }
  std::vector<double> xs() const;
  std::vector<double> ys() const;
};

enum class Axis { x, y };
const char* axis_name(Axis a) noexcept;

struct SeriesRecord {
  std::string series_id;
  std::string source_id;
  std::string object_tag;
  Axis axis = Axis::x;
  std::vector<double> values;

  std::size_t length() const noexcept { return values.size(); }
};

/// Runs background modelling, corner seeding and forward-backward filtered
/// tracking over the whole sequence. Returns every track that lived at least
/// config.min_track_len frames, ordered by keypoint id.
/// Throws Error("track-pipeline", "sequence too short ...") when the sequence
/// has fewer than burn_in + 2 frames.
std::vector<Track> run_extraction(const FrameSequence& seq, const PipelineConfig& config);

// Stretches every track onto N samples, N = longest track. Tracks of length 1
// are dropped and reported in `warnings`.
std::vector<Track> interpolate_to_longest(const std::vector<Track>& tracks,
                                          std::vector<std::string>* warnings = nullptr);

// Mean over other tracks of (|r_x| + |r_y|) / 2; input tracks must share a length.
std::vector<double> mean_abs_correlation(const std::vector<Track>& tracks);

// k tracks with the smallest mean absolute correlation, ties by keypoint id.
// Output is in selection order.
std::vector<Track> select_least_correlated(const std::vector<Track>& tracks, int k);

// Two records (x, then y) per track.
std::vector<SeriesRecord> emit_series(const std::vector<Track>& tracks, const FrameSequence& seq);

struct ExtractionResult {
  std::vector<Track> tracks;     // surviving min_track_len
  std::vector<Track> selected;   // interpolated and selected
  std::vector<SeriesRecord> series;
  std::vector<std::string> warnings;
};

// run_extraction followed by the post-processing chain.
ExtractionResult extract_series(const FrameSequence& seq, const PipelineConfig& config);

}  // namespace flowseries
