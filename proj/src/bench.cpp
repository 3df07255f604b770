#include "flowseries/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "flowseries/error.hpp"
#include "flowseries/parallel.hpp"

namespace flowseries {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("forecast-bench", msg); }

constexpr double kTiny = 1e-8;

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    fail(std::string(what) + ": target and forecast lengths differ (" + std::to_string(a.size()) +
         " vs " + std::to_string(b.size()) + ")");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

ForecastResult gaussian_bands(std::vector<double> point, double sigma,
                              std::span<const double> levels) {
  ForecastResult out;
  out.quantiles.reserve(levels.size());
  for (double q : levels) {
    QuantileForecast qf{q, point};
    if (sigma > 0.0) {
      const double z = standard_normal_quantile(q);
      for (auto& v : qf.values) v += z * sigma;
    }
    out.quantiles.push_back(std::move(qf));
  }
  out.point = std::move(point);
  return out;
}

}  // namespace

const std::vector<double>* ForecastResult::quantile(double level) const {
  for (const auto& q : quantiles)
    if (std::abs(q.level - level) < 1e-12) return &q.values;
  return nullptr;
}

void validate_forecast(const ForecastResult& f, std::size_t horizon,
                       std::span<const double> levels) {
  if (f.point.size() != horizon)
    fail("point forecast has " + std::to_string(f.point.size()) + " steps, expected " +
         std::to_string(horizon));
  const std::vector<double>* prev = nullptr;
  double prev_level = 0.0;
  for (double level : levels) {
    const auto* q = f.quantile(level);
    if (!q) fail("missing quantile level " + fmt(level));
    if (q->size() != horizon)
      fail("quantile level " + fmt(level) + " has " + std::to_string(q->size()) +
           " steps, expected " + std::to_string(horizon));
    for (std::size_t t = 0; t < horizon; ++t) {
      if (!std::isfinite((*q)[t]))
        fail("quantile level " + fmt(level) + " is not finite at step " + std::to_string(t));
      if (prev && (*q)[t] < (*prev)[t])
        fail("quantile level " + fmt(level) + " is below level " + fmt(prev_level) +
             " at step " + std::to_string(t));
    }
    prev = q;
    prev_level = level;
  }
  for (std::size_t t = 0; t < horizon; ++t)
    if (!std::isfinite(f.point[t])) fail("point forecast is not finite at step " + std::to_string(t));
}

std::vector<EvalWindow> make_windows(const SeriesRecord& r, int window, int context, int horizon) {
  if (window <= 0 || context <= 0 || horizon <= 0 || context + horizon != window)
    fail("window must equal context + horizon");
  std::vector<EvalWindow> out;
  const std::size_t w = static_cast<std::size_t>(window);
  for (std::size_t start = 0, k = 0; start + w <= r.values.size(); start += w, ++k) {
    EvalWindow ew;
    ew.series_id = r.series_id;
    ew.object_tag = r.object_tag;
    ew.window_index = static_cast<int>(k);
    const auto first = r.values.begin() + static_cast<std::ptrdiff_t>(start);
    ew.context.assign(first, first + context);
    ew.target.assign(first + context, first + window);
    out.push_back(std::move(ew));
  }
  return out;
}

MapeResult mape(std::span<const double> y, std::span<const double> yhat) {
  require_same_length(y, yhat, "mape");
  MapeResult r;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (std::abs(y[t]) <= kTiny) {
      ++r.excluded;
      continue;
    }
    sum += std::abs(y[t] - yhat[t]) / std::abs(y[t]);
    ++used;
  }
  if (used) r.percent = 100.0 * sum / static_cast<double>(used);
  return r;
}

double smape(std::span<const double> y, std::span<const double> yhat) {
  require_same_length(y, yhat, "smape");
  if (y.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double denom = std::abs(y[t]) + std::abs(yhat[t]);
    if (denom > 0.0) sum += 2.0 * std::abs(y[t] - yhat[t]) / denom;
  }
  return 100.0 * sum / static_cast<double>(y.size());
}

double pinball_loss(double y, double f, double q) noexcept {
  return 2.0 * (q * std::max(y - f, 0.0) + (1.0 - q) * std::max(f - y, 0.0));
}

std::optional<double> wql(std::span<const double> y, std::span<const QuantileForecast> quantiles) {
  if (quantiles.empty()) fail("wql: no quantile levels");
  double scale = 0.0;
  for (double v : y) scale += std::abs(v);
  scale /= static_cast<double>(std::max<std::size_t>(y.size(), 1));
  double loss = 0.0;
  for (const auto& q : quantiles) {
    require_same_length(y, q.values, "wql");
    for (std::size_t t = 0; t < y.size(); ++t) loss += pinball_loss(y[t], q.values[t], q.level);
  }
  if (scale <= kTiny) return std::nullopt;
  loss /= static_cast<double>(y.size() * quantiles.size());
  return loss / scale;
}

MaseResult mase(std::span<const double> y, std::span<const double> yhat,
                std::span<const double> context) {
  require_same_length(y, yhat, "mase");
  if (context.size() < 2) fail("mase: context needs at least 2 values");
  double naive = 0.0;
  for (std::size_t t = 1; t < context.size(); ++t) naive += std::abs(context[t] - context[t - 1]);
  naive /= static_cast<double>(context.size() - 1);
  double mae = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) mae += std::abs(y[t] - yhat[t]);
  mae /= static_cast<double>(std::max<std::size_t>(y.size(), 1));
  MaseResult r;
  if (naive < kTiny) {
    naive = kTiny;
    r.floored = true;
  }
  r.value = mae / naive;
  return r;
}

double aggregate_relative(std::span<const double> model, std::span<const double> baseline) {
  if (model.size() != baseline.size())
    fail("aggregate_relative: " + std::to_string(model.size()) + " model windows vs " +
         std::to_string(baseline.size()) + " baseline windows");
  const double m = std::accumulate(model.begin(), model.end(), 0.0);
  const double b = std::accumulate(baseline.begin(), baseline.end(), 0.0);
  if (!(std::abs(b) > 1e-12)) fail("aggregate_relative: baseline loss sums to zero");
  return m / b;
}

double standard_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail("quantile level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

ForecastResult linear_regression_forecast(std::span<const double> c, int horizon,
                                          std::span<const double> levels) {
  if (c.size() < 2) fail("linear regression needs at least 2 context values");
  if (horizon < 1) fail("horizon must be >= 1");
  const double n = static_cast<double>(c.size());
  const double tbar = (n - 1.0) / 2.0;
  const double ybar = std::accumulate(c.begin(), c.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t t = 0; t < c.size(); ++t) {
    const double dt = static_cast<double>(t) - tbar;
    sxy += dt * (c[t] - ybar);
    sxx += dt * dt;
  }
  const double slope = sxy / sxx;
  double rss = 0.0, ymax = 0.0;
  for (std::size_t t = 0; t < c.size(); ++t) {
    const double e = c[t] - (ybar + slope * (static_cast<double>(t) - tbar));
    rss += e * e;
    ymax = std::max(ymax, std::abs(c[t]));
  }
  double sigma = c.size() > 2 ? std::sqrt(rss / (n - 2.0)) : 0.0;
  // Exact fits leave rounding-level residuals; treat them as zero spread.
  if (sigma <= 1e-12 * std::max(1.0, ymax)) sigma = 0.0;

  std::vector<double> point(static_cast<std::size_t>(horizon));
  for (int h = 0; h < horizon; ++h) point[h] = ybar + slope * (n + h - tbar);
  return gaussian_bands(std::move(point), sigma, levels);
}

ForecastResult naive_forecast(std::span<const double> c, int horizon,
                              std::span<const double> levels) {
  if (c.empty()) fail("naive forecast needs a non-empty context");
  if (horizon < 1) fail("horizon must be >= 1");
  double ss = 0.0;
  for (std::size_t t = 1; t < c.size(); ++t) ss += (c[t] - c[t - 1]) * (c[t] - c[t - 1]);
  const double sigma = c.size() > 1 ? std::sqrt(ss / static_cast<double>(c.size() - 1)) : 0.0;
  return gaussian_bands(std::vector<double>(static_cast<std::size_t>(horizon), c.back()), sigma,
                        levels);
}

std::vector<std::optional<ForecastResult>> FunctionForecaster::forecast(
    std::span<const ForecastRequest> requests) {
  std::vector<std::optional<ForecastResult>> out(requests.size());
  parallel_for(requests.size(), jobs_, [&](std::size_t i) { out[i] = fn_(requests[i]); });
  return out;
}

std::unique_ptr<Forecaster> make_builtin_forecaster(const std::string& kind, int jobs) {
  if (kind == "linreg")
    return std::make_unique<FunctionForecaster>(
        kBaselineName,
        [](const ForecastRequest& r) {
          return linear_regression_forecast(r.context, r.horizon, r.quantile_levels);
        },
        jobs);
  if (kind == "naive")
    return std::make_unique<FunctionForecaster>(
        "Naive",
        [](const ForecastRequest& r) {
          return naive_forecast(r.context, r.horizon, r.quantile_levels);
        },
        jobs);
  fail("unknown builtin forecaster '" + kind + "' (expected linreg or naive)");
}

namespace {

struct WindowScore {
  bool ok = false;
  std::optional<double> mape;
  std::size_t mape_excluded = 0;
  double smape = 0.0;
  std::optional<double> wql;
  double mase = 0.0;
  bool mase_floored = false;
};

WindowScore score_window(const EvalWindow& w, const ForecastResult& f) {
  WindowScore s;
  s.ok = true;
  const auto m = mape(w.target, f.point);
  s.mape = m.percent;
  s.mape_excluded = m.excluded;
  s.smape = smape(w.target, f.point);
  s.wql = wql(w.target, f.quantiles);
  const auto ms = mase(w.target, f.point, w.context);
  s.mase = ms.value;
  s.mase_floored = ms.floored;
  return s;
}

// Aggregates a model over the window subset `idx`, pairing with the baseline.
GroupMetrics aggregate(const std::vector<std::size_t>& idx, const std::vector<WindowScore>& model,
                       const std::vector<WindowScore>& base) {
  GroupMetrics g;
  double mape_sum = 0.0, smape_sum = 0.0;
  std::size_t mape_n = 0;
  std::vector<double> wm, wb, mm, mb;
  for (auto i : idx) {
    const auto& s = model[i];
    if (!s.ok || !base[i].ok) continue;
    ++g.windows;
    smape_sum += s.smape;
    if (s.mape) {
      mape_sum += *s.mape;
      ++mape_n;
    }
    if (s.wql && base[i].wql) {
      wm.push_back(*s.wql);
      wb.push_back(*base[i].wql);
    }
    mm.push_back(s.mase);
    mb.push_back(base[i].mase);
  }
  if (g.windows == 0) return g;
  g.smape = smape_sum / static_cast<double>(g.windows);
  if (mape_n) g.mape = mape_sum / static_cast<double>(mape_n);
  auto ratio = [](const std::vector<double>& m, const std::vector<double>& b) -> std::optional<double> {
    if (m.empty() || !(std::abs(std::accumulate(b.begin(), b.end(), 0.0)) > 1e-12)) return std::nullopt;
    return aggregate_relative(m, b);
  };
  g.agg_rel_wql = ratio(wm, wb);
  g.agg_rel_mase = ratio(mm, mb);
  return g;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json group_json(const GroupMetrics& g) {
  return {{"mape", opt_json(g.mape)},
          {"smape", opt_json(g.smape)},
          {"agg_rel_wql", opt_json(g.agg_rel_wql)},
          {"agg_rel_mase", opt_json(g.agg_rel_mase)},
          {"windows_evaluated", g.windows}};
}

}  // namespace

MetricReport run_benchmark(const std::vector<SeriesRecord>& dataset,
                           std::span<Forecaster* const> forecasters) {
  MetricReport report;
  report.series_total = dataset.size();

  std::vector<const SeriesRecord*> ordered;
  for (const auto& r : dataset) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->series_id < b->series_id; });
  std::vector<EvalWindow> windows;
  for (const auto* r : ordered) {
    auto w = make_windows(*r);
    if (w.empty()) ++report.series_skipped;
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  if (windows.empty()) fail("no eligible windows: every series is shorter than " +
                            std::to_string(kWindowLength));
  report.windows_total = windows.size();

  std::vector<ForecastRequest> requests;
  requests.reserve(windows.size());
  for (const auto& w : windows) {
    ForecastRequest rq;
    rq.id = w.series_id + "#" + std::to_string(w.window_index);
    rq.context = w.context;
    rq.horizon = kHorizon;
    requests.push_back(std::move(rq));
  }

  std::vector<std::vector<WindowScore>> scores;
  std::optional<std::size_t> baseline;
  for (std::size_t m = 0; m < forecasters.size(); ++m) {
    Forecaster* f = forecasters[m];
    if (f->name() == kBaselineName) baseline = m;
    auto results = f->forecast(requests);
    if (results.size() != requests.size())
      fail("forecaster " + f->name() + " returned " + std::to_string(results.size()) +
           " results for " + std::to_string(requests.size()) + " requests");
    std::vector<WindowScore> s(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (!results[i]) continue;
      try {
        validate_forecast(*results[i], kHorizon, kDecileLevels);
      } catch (const Error& e) {
        fail("forecaster " + f->name() + ", request " + requests[i].id + ": " + e.what());
      }
      s[i] = score_window(windows[i], *results[i]);
    }
    scores.push_back(std::move(s));
  }
  if (!baseline) fail(std::string("baseline forecaster ") + kBaselineName + " must be included");

  std::vector<std::size_t> all(windows.size());
  std::iota(all.begin(), all.end(), 0);
  std::map<std::string, std::vector<std::size_t>> by_object;
  for (std::size_t i = 0; i < windows.size(); ++i) by_object[windows[i].object_tag].push_back(i);

  const auto& base = scores[*baseline];
  for (std::size_t m = 0; m < forecasters.size(); ++m) {
    ModelReport mr;
    mr.name = forecasters[m]->name();
    mr.overall = aggregate(all, scores[m], base);
    for (const auto& s : scores[m]) {
      if (!s.ok) {
        ++mr.windows_failed;
        continue;
      }
      mr.mape_excluded_steps += s.mape_excluded;
      if (!s.wql) ++mr.wql_undefined_windows;
      if (s.mase_floored) ++mr.mase_floored_windows;
    }
    for (const auto& [obj, idx] : by_object) mr.per_object[obj] = aggregate(idx, scores[m], base);
    report.models.push_back(std::move(mr));
  }
  return report;
}

json report_to_json(const MetricReport& report) {
  json out = json::object();
  for (const auto& m : report.models) {
    json j = group_json(m.overall);
    j["windows_failed"] = m.windows_failed;
    j["series_total"] = report.series_total;
    j["series_skipped"] = report.series_skipped;
    j["mape_excluded_steps"] = m.mape_excluded_steps;
    j["wql_undefined_windows"] = m.wql_undefined_windows;
    j["mase_floored_windows"] = m.mase_floored_windows;
    json po = json::object();
    for (const auto& [obj, g] : m.per_object) po[obj] = group_json(g);
    j["per_object"] = po;
    out[m.name] = j;
  }
  return out;
}

std::string per_object_csv(const MetricReport& report) {
  std::ostringstream os;
  os << "object,model,smape,normalized_smape,windows\n";
  const ModelReport* base = nullptr;
  for (const auto& m : report.models)
    if (m.name == kBaselineName) base = &m;
  for (const auto& m : report.models) {
    for (const auto& [obj, g] : m.per_object) {
      os << obj << ',' << m.name << ',';
      if (g.smape) os << fmt(*g.smape);
      os << ',';
      if (base && g.smape) {
        const auto it = base->per_object.find(obj);
        if (it != base->per_object.end() && it->second.smape && *it->second.smape > 0.0)
          os << fmt(*g.smape / *it->second.smape);
      }
      os << ',' << g.windows << '\n';
    }
  }
  return os.str();
}

}  // namespace flowseries
