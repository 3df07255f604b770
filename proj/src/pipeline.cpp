#include "flowseries/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "flowseries/error.hpp"
#include "flowseries/numeric.hpp"
#include "flowseries/parallel.hpp"

namespace flowseries {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("track-pipeline", msg); }

struct LiveTrack {
  Track track;
  bool alive = true;
};

}  // namespace

std::vector<double> Track::xs() const {
  std::vector<double> v(positions.size());
  std::transform(positions.begin(), positions.end(), v.begin(), [](Point2 p) { return p.x; });
  return v;
}

std::vector<double> Track::ys() const {
  std::vector<double> v(positions.size());
  std::transform(positions.begin(), positions.end(), v.begin(), [](Point2 p) { return p.y; });
  return v;
}

const char* axis_name(Axis a) noexcept { return a == Axis::x ? "x" : "y"; }

std::vector<Track> run_extraction(const FrameSequence& seq, const PipelineConfig& cfg) {
  if (cfg.burn_in < 0) fail("burn-in must be non-negative");
  if (cfg.min_track_len < 1) fail("minimum track length must be >= 1");
  if (cfg.fb.fb_threshold <= 0.0 || cfg.fb.residual_threshold <= 0.0)
    fail("forward-backward thresholds must be positive");
  if (seq.size() < static_cast<std::size_t>(cfg.burn_in) + 2)
    fail("sequence too short: " + std::to_string(seq.size()) + " frames, need burn-in " +
         std::to_string(cfg.burn_in) + " + 2");

  PixelMixtureModel model(seq.width(), seq.height(), cfg.mog2);
  auto classify = [&](int t) {
    ForegroundMask mask = model.update_and_classify(seq.frames[t].pixels);
    if (cfg.mask_sink) cfg.mask_sink(t, mask);
    return mask;
  };
  for (int t = 0; t < cfg.burn_in; ++t) classify(t);

  std::vector<LiveTrack> tracks;
  int next_id = 0;
  auto seed_tracks = [&](const FlowPyramid& pyr, const ForegroundMask& mask, int frame,
                         int budget) {
    if (budget <= 0) return;
    std::vector<Point2> occupied;
    for (const auto& lt : tracks)
      if (lt.alive) occupied.push_back(lt.track.positions.back());
    CornerParams cp = cfg.corners;
    cp.max_corners = budget;
    const FloatRaster eig = min_eigenvalue_map(pyr.gradients[0], cp.block_size);
    // select_corners applies min_distance to the exclusion list as well.
    CornerParams excl = cp;
    excl.min_distance = std::max(cp.min_distance, cfg.redetect_radius);
    auto corners = select_corners(eig, mask, occupied.empty() ? cp : excl, occupied);
    for (const auto& kp : corners)
      tracks.push_back({Track{next_id++, frame, {{kp.x, kp.y}}}, true});
  };

  const int start = cfg.burn_in;
  FlowPyramid prev = make_flow_pyramid(seq.frames[start], cfg.lk.pyramid_levels);
  seed_tracks(prev, classify(start), start, cfg.corners.max_corners);

  for (int t = start + 1; t < static_cast<int>(seq.size()); ++t) {
    const ForegroundMask mask = classify(t);
    FlowPyramid next = make_flow_pyramid(seq.frames[t], cfg.lk.pyramid_levels);

    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < tracks.size(); ++i)
      if (tracks[i].alive) live.push_back(i);
    std::vector<FbOutcome> outcomes(live.size());
    parallel_for(live.size(), cfg.jobs, [&](std::size_t k) {
      outcomes[k] = fb_filter(prev, next, tracks[live[k]].track.positions.back(), cfg.lk, cfg.fb);
    });
    int alive_count = 0;
    for (std::size_t k = 0; k < live.size(); ++k) {
      LiveTrack& lt = tracks[live[k]];
      if (outcomes[k].check.passed) {
        lt.track.positions.push_back(outcomes[k].forward.position);
        ++alive_count;
      } else {
        lt.alive = false;
      }
    }
    if (alive_count < cfg.min_live)
      seed_tracks(next, mask, t, cfg.corners.max_corners - alive_count);
    prev = std::move(next);
  }

  std::vector<Track> out;
  for (auto& lt : tracks)
    if (lt.track.length() >= cfg.min_track_len) out.push_back(std::move(lt.track));
  return out;
}

std::vector<Track> interpolate_to_longest(const std::vector<Track>& tracks,
                                          std::vector<std::string>* warnings) {
  if (tracks.empty()) fail("interpolation needs at least one track");
  std::size_t longest = 0;
  for (const auto& t : tracks)
    if (t.length() >= 2) longest = std::max<std::size_t>(longest, t.positions.size());

  std::vector<Track> out;
  for (const auto& t : tracks) {
    if (t.length() < 2) {
      if (warnings)
        warnings->push_back("track " + std::to_string(t.keypoint_id) +
                            " has fewer than 2 positions; dropped before interpolation");
      continue;
    }
    const auto xs = resample_linear(t.xs(), longest);
    const auto ys = resample_linear(t.ys(), longest);
    Track r{t.keypoint_id, t.birth_frame, std::vector<Point2>(longest)};
    for (std::size_t i = 0; i < longest; ++i) r.positions[i] = {xs[i], ys[i]};
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<double> mean_abs_correlation(const std::vector<Track>& tracks) {
  const std::size_t n = tracks.size();
  std::vector<std::vector<double>> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (tracks[i].positions.size() != tracks.front().positions.size())
      fail("correlation needs equal-length tracks; interpolate first");
    xs[i] = tracks[i].xs();
    ys[i] = tracks[i].ys();
  }
  std::vector<double> score(n, 0.0);
  if (n < 2) return score;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = 0.5 * (std::abs(pearson(xs[i], xs[j])) + std::abs(pearson(ys[i], ys[j])));
      score[i] += c;
      score[j] += c;
    }
  }
  for (auto& s : score) s /= static_cast<double>(n - 1);
  return score;
}

std::vector<Track> select_least_correlated(const std::vector<Track>& tracks, int k) {
  if (k < 1) fail("selection count must be >= 1");
  const auto score = mean_abs_correlation(tracks);
  std::vector<std::size_t> order(tracks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return tracks[a].keypoint_id < tracks[b].keypoint_id;
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
  std::vector<Track> out;
  for (auto i : order) out.push_back(tracks[i]);
  return out;
}

std::vector<SeriesRecord> emit_series(const std::vector<Track>& tracks, const FrameSequence& seq) {
  std::vector<SeriesRecord> out;
  const std::string tag = seq.object_tag.value_or("unknown");
  for (const auto& t : tracks) {
    for (Axis a : {Axis::x, Axis::y}) {
      SeriesRecord r;
      r.series_id = seq.source_id + ":" + std::to_string(t.keypoint_id) + ":" + axis_name(a);
      r.source_id = seq.source_id;
      r.object_tag = tag;
      r.axis = a;
      r.values = a == Axis::x ? t.xs() : t.ys();
      out.push_back(std::move(r));
    }
  }
  return out;
}

ExtractionResult extract_series(const FrameSequence& seq, const PipelineConfig& config) {
  ExtractionResult res;
  res.tracks = run_extraction(seq, config);
  if (res.tracks.empty()) {
    res.warnings.push_back("no track survived " + std::to_string(config.min_track_len) +
                           " frames in " + seq.source_id);
    return res;
  }
  const auto resampled = interpolate_to_longest(res.tracks, &res.warnings);
  if (!resampled.empty()) res.selected = select_least_correlated(resampled, config.keep_tracks);
  res.series = emit_series(res.selected, seq);
  return res;
}

}  // namespace flowseries
