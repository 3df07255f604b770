#include "flowseries/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowseries/bench.hpp"
#include "flowseries/bridge.hpp"
#include "flowseries/dataset_io.hpp"
#include "flowseries/error.hpp"
#include "flowseries/frame_io.hpp"
#include "flowseries/stats.hpp"
#include "flowseries/synth.hpp"

namespace flowseries {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cli", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json manifest_base(const RunConfig& cfg, const std::string& sub, int argc,
                   const char* const* argv) {
  json cmd = json::array();
  for (int i = 0; i < argc; ++i) cmd.push_back(argv[i]);
  return {{"tool", "flowseries"},
          {"version", kToolVersion},
          {"subcommand", sub},
          {"command", cmd},
          {"seed", cfg.seed},
          {"config", run_config_to_json(cfg, sub)}};
}

void run_extract(RunConfig& cfg, int argc, const char* const* argv) {
  FrameSequence seq = load_frame_sequence(cfg.frames_dir, cfg.pattern);
  if (!cfg.source_id.empty()) seq.source_id = cfg.source_id;
  if (!cfg.object_tag.empty()) seq.object_tag = cfg.object_tag;

  PipelineConfig pc = cfg.pipeline;
  pc.jobs = cfg.jobs;
  if (!cfg.dump_masks.empty()) {
    fs::create_directories(cfg.dump_masks);
    const fs::path dir = cfg.dump_masks;
    pc.mask_sink = [dir](int frame, const ForegroundMask& mask) {
      ByteRaster img = mask;
      for (auto& v : img.data) v = v ? 255 : 0;
      char name[32];
      std::snprintf(name, sizeof name, "mask_%04d.pgm", frame);
      write_pgm(dir / name, img);
    };
  }

  const ExtractionResult res = extract_series(seq, pc);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';

  const fs::path out = cfg.out;
  fs::create_directories(out);
  write_jsonl(out / (seq.source_id + ".jsonl"), res.series);
  write_series_csv(out / (seq.source_id + ".csv"), res.series);

  // The manifest accumulates one entry per extracted video.
  const fs::path manifest_path = out / "manifest.json";
  json videos = json::array();
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    const json old = json::parse(in, nullptr, false);
    if (!old.is_discarded() && old.contains("videos"))
      for (const auto& v : old["videos"])
        if (v.value("source", "") != seq.source_id) videos.push_back(v);
  }
  json entry = manifest_base(cfg, "extract", argc, argv);
  entry["source"] = seq.source_id;
  entry["object"] = seq.object_tag.value_or("unknown");
  entry["frames"] = seq.size();
  entry["width"] = seq.width();
  entry["height"] = seq.height();
  entry["tracks_total"] = res.tracks.size();
  entry["tracks_selected"] = res.selected.size();
  entry["series"] = res.series.size();
  entry["series_file"] = seq.source_id + ".jsonl";
  videos.push_back(entry);

  json manifest{{"tool", "flowseries"}, {"version", kToolVersion}, {"videos", videos}};
  std::size_t total = 0;
  for (const auto& v : videos) total += v.value("series", std::size_t{0});
  manifest["series_total"] = total;
  write_json_file(manifest_path, manifest);
  std::cout << res.series.size() << " series from " << res.tracks.size() << " tracks ("
            << res.selected.size() << " selected) -> " << (out / (seq.source_id + ".jsonl")).string()
            << '\n';
}

void run_synth(RunConfig& cfg, int argc, const char* const* argv) {
  std::ifstream in(cfg.spec_path);
  if (!in) throw Error("synth-video", "cannot read spec " + cfg.spec_path);
  json spec_json;
  try {
    spec_json = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("synth-video", "spec is not valid JSON: " + std::string(e.what()));
  }
  const SceneSpec spec = scene_from_json(spec_json);
  const RenderedScene scene = render_scene(spec, cfg.seed);
  write_scene(scene, cfg.out);
  json manifest = manifest_base(cfg, "synth", argc, argv);
  manifest["scene"] = scene_to_json(spec);
  manifest["frames"] = scene.sequence.size();
  write_json_file(fs::path(cfg.out) / "manifest.json", manifest);
}

void run_stats(RunConfig& cfg) {
  const auto records = read_dataset_dir(cfg.data_dir);
  const DatasetSummary s = summarize_dataset(records, cfg.entropy_bins, cfg.jobs);
  const json j{{"series_count", s.series_count},
               {"object_count", s.object_count},
               {"mean_length", s.mean_length},
               {"length_cv", s.length_cv},
               {"min_length", s.min_length},
               {"max_length", s.max_length},
               {"value_mean", s.value_mean},
               {"value_std", s.value_std},
               {"stationary_fraction", s.stationary_fraction},
               {"adf_tested", s.adf_tested},
               {"adf_skipped", s.adf_skipped},
               {"mean_entropy_bits", s.mean_entropy_bits},
               {"entropy_bins", s.entropy_bins}};
  std::cout << j.dump(2) << '\n';
}

void run_pca(RunConfig& cfg, int argc, const char* const* argv) {
  const auto a = read_dataset_dir(cfg.pca_a);
  const auto b = read_dataset_dir(cfg.pca_b);
  const PcaProjection p = pca_compare(a, b, cfg.resample_len, "a", "b");
  const fs::path out = cfg.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream csv(out);
  if (!csv) throw Error("dataset-stats", "cannot write " + out.string());
  csv.precision(17);
  csv << "label,pc1,pc2\n";
  for (const auto& pt : p.points) csv << pt.label << ',' << pt.pc1 << ',' << pt.pc2 << '\n';
  json manifest = manifest_base(cfg, "pca", argc, argv);
  manifest["points"] = p.points.size();
  manifest["dropped_constant"] = p.dropped_constant;
  manifest["explained_variance_ratio"] = {p.explained_ratio[0], p.explained_ratio[1]};
  write_json_file(out.parent_path().empty() ? fs::path("pca_manifest.json")
                                            : out.parent_path() / "pca_manifest.json",
                  manifest);
}

std::unique_ptr<Forecaster> make_forecaster(const std::string& spec, const RunConfig& cfg) {
  std::string label;
  std::string body = spec;
  const auto eq = spec.find('=');
  const auto colon = spec.find(':');
  if (eq != std::string::npos && (colon == std::string::npos || eq < colon)) {
    label = spec.substr(0, eq);
    body = spec.substr(eq + 1);
  }
  if (body.rfind("builtin:", 0) == 0) {
    auto f = make_builtin_forecaster(body.substr(8), cfg.jobs);
    if (!label.empty())
      return std::make_unique<FunctionForecaster>(
          label,
          [inner = std::shared_ptr<Forecaster>(std::move(f))](const ForecastRequest& r) {
            return *inner->forecast(std::span(&r, 1)).front();
          },
          cfg.jobs);
    return f;
  }
  if (body.rfind("cmd:", 0) == 0) {
    BridgeOptions o;
    o.command = body.substr(4);
    if (o.command.size() >= 2 && o.command.front() == '"' && o.command.back() == '"')
      o.command = o.command.substr(1, o.command.size() - 2);
    o.name = label;
    o.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.timeout_s * 1000.0));
    o.max_in_flight = cfg.max_in_flight;
    return std::make_unique<BridgeForecaster>(o);
  }
  throw Error("cli", "forecaster spec must be builtin:<name> or cmd:<command>, got '" + spec + "'");
}

void run_bench(RunConfig& cfg, int argc, const char* const* argv) {
  const auto records = read_dataset_dir(cfg.data_dir);
  std::vector<std::unique_ptr<Forecaster>> owned;
  for (const auto& s : cfg.forecasters) owned.push_back(make_forecaster(s, cfg));
  std::vector<Forecaster*> ptrs;
  for (auto& f : owned) ptrs.push_back(f.get());
  const MetricReport report = run_benchmark(records, ptrs);

  const fs::path out = cfg.out;
  const fs::path dir = out.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  {
    std::ofstream o(out);
    if (!o) throw Error("forecast-bench", "cannot write " + out.string());
    o << report_to_json(report).dump(2) << '\n';
  }
  {
    std::ofstream o(dir.empty() ? fs::path("per_object.csv") : dir / "per_object.csv");
    o << per_object_csv(report);
  }
  json manifest = manifest_base(cfg, "bench", argc, argv);
  manifest["windows_total"] = report.windows_total;
  manifest["series_skipped"] = report.series_skipped;
  write_json_file(dir.empty() ? fs::path("bench_manifest.json") : dir / "bench_manifest.json",
                  manifest);
}

void add_pipeline_flags(CLI::App* sub, RunConfig& cfg) {
  auto& p = cfg.pipeline;
  sub->add_option("--mog2-alpha", p.mog2.alpha, "Background learning rate")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--mog2-tbg", p.mog2.background_ratio, "Cumulative background weight T_bg")
      ->capture_default_str();
  sub->add_flag("--mask-cleanup", p.mog2.mask_cleanup, "3x3 majority filter on foreground masks");
  sub->add_option("--dump-masks", cfg.dump_masks, "Write every foreground mask as PGM here");
  sub->add_option("--max-corners", p.corners.max_corners,
                  "Corners per detection (reference extraction setting: 30)")
      ->capture_default_str();
  sub->add_option("--quality", p.corners.quality_level,
                  "Shi-Tomasi quality level (reference extraction setting: 0.01)")
      ->capture_default_str();
  sub->add_option("--min-distance", p.corners.min_distance, "Minimum corner spacing, px")
      ->capture_default_str();
  sub->add_option("--block-size", p.corners.block_size, "Structure-matrix block size")
      ->capture_default_str();
  sub->add_option("--lk-window", p.lk.window, "LK search window, px (reference setting: 40)")
      ->capture_default_str();
  sub->add_option("--pyr-levels", p.lk.pyramid_levels, "Pyramid levels (reference setting: 3)")
      ->capture_default_str();
  sub->add_option("--lk-iters", p.lk.max_iter, "LK iterations per level (reference setting: 30)")
      ->capture_default_str();
  sub->add_option("--lk-eps", p.lk.eps, "LK convergence threshold, px (reference setting: 0.01)")
      ->capture_default_str();
  sub->add_option("--fb-thresh", p.fb.fb_threshold,
                  "Forward-backward error threshold, px (reference setting: 50.0)")
      ->capture_default_str();
  sub->add_option("--err-thresh", p.fb.residual_threshold,
                  "Single-direction residual threshold (reference setting: 80.0)")
      ->capture_default_str();
  sub->add_option("--burn-in", p.burn_in, "Background frames before first detection")
      ->capture_default_str();
  sub->add_option("--min-track-len", p.min_track_len, "Minimum track lifetime, frames")
      ->capture_default_str();
  sub->add_option("--min-live", p.min_live, "Re-detect corners below this many live tracks")
      ->capture_default_str();
  sub->add_option("--keep-tracks", p.keep_tracks, "Least-correlated tracks kept per video")
      ->capture_default_str();
}

}  // namespace

json run_config_to_json(const RunConfig& c, const std::string& sub) {
  const auto& p = c.pipeline;
  json j{{"seed", c.seed}, {"jobs", c.jobs}};
  if (sub == "extract") {
    j["frames"] = c.frames_dir;
    j["pattern"] = c.pattern;
    j["source_id"] = c.source_id;
    j["object"] = c.object_tag;
    j["out"] = c.out;
    j["dump_masks"] = c.dump_masks;
    j["mog2"] = {{"alpha", p.mog2.alpha},
                 {"background_ratio", p.mog2.background_ratio},
                 {"max_components", p.mog2.max_components},
                 {"match_sigmas", p.mog2.match_sigmas},
                 {"var_init", p.mog2.var_init},
                 {"var_min", p.mog2.var_min},
                 {"mask_cleanup", p.mog2.mask_cleanup}};
    j["corners"] = {{"max_corners", p.corners.max_corners},
                    {"quality_level", p.corners.quality_level},
                    {"min_distance", p.corners.min_distance},
                    {"block_size", p.corners.block_size}};
    j["lk"] = {{"window", p.lk.window},
               {"pyramid_levels", p.lk.pyramid_levels},
               {"max_iter", p.lk.max_iter},
               {"eps", p.lk.eps},
               {"min_eig", p.lk.min_eig}};
    j["fb"] = {{"fb_threshold", p.fb.fb_threshold},
               {"residual_threshold", p.fb.residual_threshold}};
    j["burn_in"] = p.burn_in;
    j["min_live"] = p.min_live;
    j["redetect_radius"] = p.redetect_radius;
    j["min_track_len"] = p.min_track_len;
    j["keep_tracks"] = p.keep_tracks;
  } else if (sub == "synth") {
    j["spec"] = c.spec_path;
    j["out"] = c.out;
  } else if (sub == "stats") {
    j["data"] = c.data_dir;
    j["entropy_bins"] = c.entropy_bins;
  } else if (sub == "pca") {
    j["a"] = c.pca_a;
    j["b"] = c.pca_b;
    j["out"] = c.out;
    j["resample_len"] = c.resample_len;
  } else if (sub == "bench") {
    j["data"] = c.data_dir;
    j["forecasters"] = c.forecasters;
    j["out"] = c.out;
    j["timeout_s"] = c.timeout_s;
    j["max_in_flight"] = c.max_in_flight;
  }
  return j;
}

int dispatch(int argc, const char* const* argv) {
  RunConfig cfg;
  CLI::App app{"Turn frame sequences into motion time series and benchmark forecasters on them",
               "flowseries"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "Run seed; every random stream derives from it")
        ->capture_default_str();
    sub->add_option("--jobs", cfg.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  };

  auto* extract = app.add_subcommand("extract", "Track moving corners and emit x/y series");
  extract->add_option("--frames", cfg.frames_dir, "Directory of frame images")->required();
  extract->add_option("--out", cfg.out, "Output dataset directory")->required();
  extract->add_option("--pattern", cfg.pattern, "Filename glob")->capture_default_str();
  extract->add_option("--source-id", cfg.source_id, "Video identifier (default: directory name)");
  extract->add_option("--object", cfg.object_tag, "Object category label");
  add_pipeline_flags(extract, cfg);
  common(extract);

  auto* synth = app.add_subcommand("synth", "Render a synthetic scene with ground truth");
  synth->add_option("--spec", cfg.spec_path, "Scene spec JSON")->required();
  synth->add_option("--out", cfg.out, "Output directory")->required();
  common(synth);

  auto* stats = app.add_subcommand("stats", "Dataset statistics as JSON on stdout");
  stats->add_option("--data", cfg.data_dir, "Dataset directory (*.jsonl)")->required();
  stats->add_option("--entropy-bins", cfg.entropy_bins, "Histogram bins for entropy")
      ->capture_default_str();
  common(stats);

  auto* pca = app.add_subcommand("pca", "Project two datasets onto shared principal components");
  pca->add_option("--a", cfg.pca_a, "First dataset directory")->required();
  pca->add_option("--b", cfg.pca_b, "Second dataset directory")->required();
  pca->add_option("--out", cfg.out, "Output CSV (label,pc1,pc2)")->required();
  pca->add_option("--resample-len", cfg.resample_len, "Resampled series length")->capture_default_str();
  common(pca);

  auto* bench = app.add_subcommand("bench", "Zero-shot forecasting benchmark");
  bench->add_option("--data", cfg.data_dir, "Dataset directory (*.jsonl)")->required();
  bench->add_option("--forecaster", cfg.forecasters,
                    "builtin:linreg | builtin:naive | cmd:\"<command>\", optionally prefixed by label=")
      ->required();
  bench->add_option("--out", cfg.out, "Report JSON path")->required();
  bench->add_option("--timeout", cfg.timeout_s, "Per-request timeout for cmd: forecasters, s")
      ->capture_default_str();
  bench->add_option("--max-in-flight", cfg.max_in_flight, "Outstanding requests per child")
      ->capture_default_str();
  common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*extract) run_extract(cfg, argc, argv);
    else if (*synth) run_synth(cfg, argc, argv);
    else if (*stats) run_stats(cfg);
    else if (*pca) run_pca(cfg, argc, argv);
    else if (*bench) run_bench(cfg, argc, argv);
  } catch (const Error& e) {
    std::cerr << "flowseries: " << e.module() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "flowseries: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace flowseries
