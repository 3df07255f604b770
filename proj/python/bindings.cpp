#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "flowseries/bench.hpp"
#include "flowseries/bridge.hpp"
#include "flowseries/cli.hpp"
#include "flowseries/corners.hpp"
#include "flowseries/dataset_io.hpp"
#include "flowseries/error.hpp"
#include "flowseries/flow_lk.hpp"
#include "flowseries/mog2.hpp"
#include "flowseries/pipeline.hpp"
#include "flowseries/stats.hpp"
#include "flowseries/synth.hpp"

namespace py = pybind11;
using namespace flowseries;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

ByteRaster to_raster(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D uint8 array");
  ByteRaster r(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), r.data.begin());
  return r;
}

FloatRaster to_float_raster(const F32Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D float array");
  FloatRaster r(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), r.data.begin());
  return r;
}

U8Array to_array(const ByteRaster& r) {
  U8Array a({r.height, r.width});
  std::copy(r.data.begin(), r.data.end(), a.mutable_data());
  return a;
}

FrameSequence to_sequence(const std::vector<U8Array>& frames, const std::string& source_id,
                          std::optional<std::string> object_tag) {
  FrameSequence seq;
  seq.source_id = source_id;
  seq.object_tag = std::move(object_tag);
  for (std::size_t i = 0; i < frames.size(); ++i)
    seq.frames.push_back({to_raster(frames[i]), static_cast<int>(i)});
  if (seq.frames.size() < 2) throw Error("frame-io", "no frames: need at least 2");
  for (const auto& f : seq.frames)
    if (!f.pixels.same_shape(seq.frames.front().pixels))
      throw Error("frame-io", "dimension mismatch between frames");
  return seq;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<QuantileForecast> quantiles_from_dict(const std::map<double, std::vector<double>>& q) {
  std::vector<QuantileForecast> out;
  for (const auto& [level, values] : q) out.push_back({level, values});
  return out;
}

py::dict forecast_to_dict(const ForecastResult& f) {
  py::dict q;
  for (const auto& qf : f.quantiles) q[py::float_(qf.level)] = qf.values;
  py::dict d;
  d["point"] = f.point;
  d["quantiles"] = q;
  return d;
}

ForecastResult forecast_from_py(const py::handle& h) {
  const auto d = h.cast<py::dict>();
  ForecastResult f;
  f.point = d["point"].cast<std::vector<double>>();
  f.quantiles = quantiles_from_dict(d["quantiles"].cast<std::map<double, std::vector<double>>>());
  return f;
}

PipelineConfig pipeline_config(const py::kwargs& kw) {
  PipelineConfig c;
  for (const auto& [k, v] : kw) {
    const auto key = k.cast<std::string>();
    if (key == "burn_in") c.burn_in = v.cast<int>();
    else if (key == "min_track_len") c.min_track_len = v.cast<int>();
    else if (key == "keep_tracks") c.keep_tracks = v.cast<int>();
    else if (key == "min_live") c.min_live = v.cast<int>();
    else if (key == "jobs") c.jobs = v.cast<int>();
    else if (key == "max_corners") c.corners.max_corners = v.cast<int>();
    else if (key == "quality") c.corners.quality_level = v.cast<double>();
    else if (key == "min_distance") c.corners.min_distance = v.cast<double>();
    else if (key == "lk_window") c.lk.window = v.cast<int>();
    else if (key == "pyr_levels") c.lk.pyramid_levels = v.cast<int>();
    else if (key == "lk_iters") c.lk.max_iter = v.cast<int>();
    else if (key == "lk_eps") c.lk.eps = v.cast<double>();
    else if (key == "fb_thresh") c.fb.fb_threshold = v.cast<double>();
    else if (key == "err_thresh") c.fb.residual_threshold = v.cast<double>();
    else if (key == "mog2_alpha") c.mog2.alpha = v.cast<double>();
    else throw py::type_error("unknown pipeline option '" + key + "'");
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_flowseries, m) {
  m.doc() = "Motion time-series extraction and forecasting benchmark";
  m.attr("__version__") = kToolVersion;

  py::register_exception<Error>(m, "FlowseriesError", PyExc_RuntimeError);

  py::enum_<Axis>(m, "Axis").value("x", Axis::x).value("y", Axis::y);

  py::class_<SeriesRecord>(m, "SeriesRecord")
      .def(py::init<>())
      .def(py::init([](std::string id, std::vector<double> values, std::string source,
                       std::string object, Axis axis) {
             return SeriesRecord{std::move(id), std::move(source), std::move(object), axis,
                                 std::move(values)};
           }),
           py::arg("series_id"), py::arg("values"), py::arg("source") = "py",
           py::arg("object") = "unknown", py::arg("axis") = Axis::x)
      .def_readwrite("series_id", &SeriesRecord::series_id)
      .def_readwrite("source", &SeriesRecord::source_id)
      .def_readwrite("object", &SeriesRecord::object_tag)
      .def_readwrite("axis", &SeriesRecord::axis)
      .def_readwrite("values", &SeriesRecord::values)
      .def("__len__", &SeriesRecord::length)
      .def("__repr__", [](const SeriesRecord& r) {
        return "<SeriesRecord " + r.series_id + " len=" + std::to_string(r.length()) + ">";
      });

  // Dataset I/O
  m.def("read_jsonl", &read_jsonl, py::arg("path"));
  m.def("write_jsonl", &write_jsonl, py::arg("path"), py::arg("records"));
  m.def("read_dataset_dir", &read_dataset_dir, py::arg("directory"));
  m.def("load_frames", [](const std::filesystem::path& dir, const std::string& pattern) {
        const auto seq = load_frame_sequence(dir, pattern);
        std::vector<U8Array> out;
        for (const auto& f : seq.frames) out.push_back(to_array(f.pixels));
        return out;
      }, py::arg("directory"), py::arg("pattern") = "*");

  // Synthetic scenes
  m.def("render_scene", [](const py::object& spec, std::uint64_t seed) {
        const auto scene = render_scene(scene_from_json(py_to_json(spec)), seed);
        std::vector<U8Array> frames;
        for (const auto& f : scene.sequence.frames) frames.push_back(to_array(f.pixels));
        std::vector<std::vector<std::pair<double, double>>> truth;
        for (const auto& obj : scene.ground_truth) {
          auto& t = truth.emplace_back();
          for (const auto& p : obj) t.emplace_back(p.x, p.y);
        }
        return py::make_tuple(frames, truth);
      }, py::arg("spec"), py::arg("seed") = 0,
      "Render a scene from a JSON-style dict; returns (frames, ground_truth).");

  // Vision primitives
  m.def("detect_corners", [](const U8Array& frame, std::optional<U8Array> mask, int max_corners,
                             double quality, double min_distance) {
        Frame f{to_raster(frame), 0};
        const ForegroundMask mk = mask ? to_raster(*mask) : ForegroundMask(f.width(), f.height(), 1);
        const auto kps = detect_corners(f, mk, {max_corners, quality, min_distance, 3});
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& k : kps) out.emplace_back(k.x, k.y, k.score);
        return out;
      }, py::arg("frame"), py::arg("mask") = py::none(), py::arg("max_corners") = 30,
      py::arg("quality") = 0.01, py::arg("min_distance") = 10.0,
      "Shi-Tomasi corners as (x, y, score) tuples.");

  m.def("track_point", [](const F32Array& prev, const F32Array& next, double x, double y,
                          int window, int levels) {
        LkParams p;
        p.window = window;
        p.pyramid_levels = levels;
        const auto a = make_flow_pyramid(to_float_raster(prev), levels);
        const auto b = make_flow_pyramid(to_float_raster(next), levels);
        const auto r = track_point_lk(a, b, {x, y}, p);
        py::dict d;
        d["x"] = r.position.x;
        d["y"] = r.position.y;
        d["tracked"] = r.status == TrackStatus::tracked;
        d["residual"] = r.residual;
        d["iterations"] = r.iterations;
        return d;
      }, py::arg("prev"), py::arg("next"), py::arg("x"), py::arg("y"), py::arg("window") = 40,
      py::arg("levels") = 3, "Pyramidal Lucas-Kanade for one point.");

  m.def("forward_backward_error", [](std::pair<double, double> p0, std::pair<double, double> p1) {
        return forward_backward_error({p0.first, p0.second}, {p1.first, p1.second});
      }, py::arg("p0"), py::arg("roundtrip"));

  py::class_<PixelMixtureModel>(m, "BackgroundModel")
      .def(py::init([](int w, int h, double alpha) {
             Mog2Params p;
             p.alpha = alpha;
             return PixelMixtureModel(w, h, p);
           }),
           py::arg("width"), py::arg("height"), py::arg("alpha") = 0.005)
      .def("apply", [](PixelMixtureModel& m, const U8Array& frame) {
        return to_array(m.update_and_classify(to_raster(frame)));
      }, py::arg("frame"), "Classify the frame (1 = foreground), then update the model.");

  // Extraction
  m.def("extract_series", [](const std::vector<U8Array>& frames, const std::string& source_id,
                             std::optional<std::string> object_tag, const py::kwargs& kw) {
        const auto seq = to_sequence(frames, source_id, std::move(object_tag));
        const auto cfg = pipeline_config(kw);
        py::gil_scoped_release nogil;
        return extract_series(seq, cfg).series;
      }, py::arg("frames"), py::arg("source_id") = "video", py::arg("object_tag") = py::none(),
      "Run the full pipeline; pipeline options as keyword arguments.");

  // Statistics
  m.def("adf_test", [](const std::vector<double>& v, std::optional<int> max_lag) {
        const auto r = max_lag ? adf_test(v, *max_lag) : adf_test(v);
        py::dict d;
        d["statistic"] = r.statistic;
        d["stationary"] = r.stationary_at_95;
        d["lag"] = r.lag;
        d["nobs"] = r.nobs;
        d["degenerate"] = r.degenerate;
        return d;
      }, py::arg("series"), py::arg("max_lag") = py::none());
  m.def("entropy_bits", [](const std::vector<double>& v, int bins) { return shannon_entropy_bits(v, bins); },
        py::arg("series"), py::arg("bins") = 64);
  m.def("summarize", [](const std::vector<SeriesRecord>& recs, int bins) {
        const auto s = summarize_dataset(recs, bins);
        py::dict d;
        d["series_count"] = s.series_count;
        d["object_count"] = s.object_count;
        d["mean_length"] = s.mean_length;
        d["length_cv"] = s.length_cv;
        d["value_mean"] = s.value_mean;
        d["value_std"] = s.value_std;
        d["stationary_fraction"] = s.stationary_fraction;
        d["mean_entropy_bits"] = s.mean_entropy_bits;
        return d;
      }, py::arg("records"), py::arg("bins") = 64);
  m.def("pca_compare", [](const std::vector<SeriesRecord>& a, const std::vector<SeriesRecord>& b,
                          int resample_len) {
        const auto p = pca_compare(a, b, resample_len);
        std::vector<std::tuple<std::string, std::string, double, double>> pts;
        for (const auto& pt : p.points) pts.emplace_back(pt.label, pt.series_id, pt.pc1, pt.pc2);
        return pts;
      }, py::arg("a"), py::arg("b"), py::arg("resample_len") = 256,
      "Returns (label, series_id, pc1, pc2) tuples.");

  // Forecast metrics and baselines
  m.def("mape", [](const std::vector<double>& y, const std::vector<double>& f) { return mape(y, f).percent; });
  m.def("smape", [](const std::vector<double>& y, const std::vector<double>& f) { return smape(y, f); });
  m.def("mase", [](const std::vector<double>& y, const std::vector<double>& f, const std::vector<double>& c) {
    return mase(y, f, c).value;
  });
  m.def("wql", [](const std::vector<double>& y, const std::map<double, std::vector<double>>& q) {
    return wql(y, quantiles_from_dict(q));
  });
  m.def("aggregate_relative", [](const std::vector<double>& a, const std::vector<double>& b) {
    return aggregate_relative(a, b);
  });
  m.def("linear_regression_forecast", [](const std::vector<double>& ctx, int h) {
    return forecast_to_dict(linear_regression_forecast(ctx, h));
  }, py::arg("context"), py::arg("horizon") = kHorizon);
  m.def("naive_forecast", [](const std::vector<double>& ctx, int h) {
    return forecast_to_dict(naive_forecast(ctx, h));
  }, py::arg("context"), py::arg("horizon") = kHorizon);
  m.def("window_count", [](std::size_t n) {
    return make_windows(SeriesRecord{"w", "w", "w", Axis::x, std::vector<double>(n, 0.0)}).size();
  }, py::arg("length"));

  m.def("run_benchmark", [](const std::vector<SeriesRecord>& data, const std::vector<py::object>& specs) {
        // Each spec: "builtin:linreg", "builtin:naive", "cmd:<command>", or
        // (name, callable(context, horizon) -> {"point", "quantiles"}).
        std::vector<std::unique_ptr<Forecaster>> owned;
        for (const auto& s : specs) {
          if (py::isinstance<py::str>(s)) {
            const auto text = s.cast<std::string>();
            if (text.rfind("builtin:", 0) == 0) {
              owned.push_back(make_builtin_forecaster(text.substr(8)));
            } else if (text.rfind("cmd:", 0) == 0) {
              BridgeOptions o;
              o.command = text.substr(4);
              owned.push_back(std::make_unique<BridgeForecaster>(o));
            } else {
              throw py::value_error("forecaster must be builtin:<name>, cmd:<command> or (name, fn)");
            }
          } else {
            const auto pair = s.cast<std::pair<std::string, py::function>>();
            py::function fn = pair.second;
            owned.push_back(std::make_unique<FunctionForecaster>(
                pair.first, [fn](const ForecastRequest& rq) {
                  return forecast_from_py(fn(rq.context, rq.horizon));
                }));
          }
        }
        std::vector<Forecaster*> ptrs;
        for (auto& f : owned) ptrs.push_back(f.get());
        return json_to_py(report_to_json(run_benchmark(data, ptrs)));
      }, py::arg("records"), py::arg("forecasters"),
      "Benchmark forecasters; returns the report as a dict keyed by model name.");

  // Wire protocol
  m.def("encode_request", [](const std::string& id, const std::vector<double>& ctx, int horizon) {
    ForecastRequest r;
    r.id = id;
    r.context = ctx;
    r.horizon = horizon;
    return encode_request(r);
  }, py::arg("id"), py::arg("context"), py::arg("horizon") = kHorizon);
  m.def("decode_response", [](const std::string& line) {
    const auto r = decode_response(line);
    auto d = forecast_to_dict(r.result);
    d["id"] = r.id;
    return d;
  }, py::arg("line"));

  m.def("main", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"flowseries"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return dispatch(static_cast<int>(argv.size()), argv.data());
  }, py::arg("args"), "Run the command-line tool in-process; returns the exit code.");
}
