#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowseries/pipeline.hpp"

namespace flowseries {

inline constexpr int kWindowLength = 500;
inline constexpr int kContextLength = 450;
inline constexpr int kHorizon = 50;
inline constexpr std::array<double, 9> kDecileLevels = {0.1, 0.2, 0.3, 0.4, 0.5,
                                                        0.6, 0.7, 0.8, 0.9};

struct EvalWindow {
  std::string series_id;
  std::string object_tag;
  int window_index = 0;
  std::vector<double> context;
  std::vector<double> target;
};

struct QuantileForecast {
  double level = 0.5;
  std::vector<double> values;
};

struct ForecastResult {
  std::vector<double> point;
  std::vector<QuantileForecast> quantiles;  // ascending level

  const std::vector<double>* quantile(double level) const;
};

// Throws Error("forecast-bench", ...) naming the offending level/step when
// shapes are wrong, a requested level is missing, or quantiles decrease in
// level at some step.
void validate_forecast(const ForecastResult& f, std::size_t horizon,
                       std::span<const double> levels);

// Non-overlapping windows from the series start; a short tail is dropped.
std::vector<EvalWindow> make_windows(const SeriesRecord& record, int window = kWindowLength,
                                     int context = kContextLength, int horizon = kHorizon);

struct MapeResult {
  std::optional<double> percent;  // empty when every target is ~0
  std::size_t excluded = 0;       // steps with |y| <= 1e-8
};

MapeResult mape(std::span<const double> target, std::span<const double> point);
double smape(std::span<const double> target, std::span<const double> point);

// Mean pinball loss over steps and levels (scaled by 2), divided by mean |y|.
// Empty when mean |y| is ~0.
std::optional<double> wql(std::span<const double> target,
                          std::span<const QuantileForecast> quantiles);

double pinball_loss(double y, double forecast, double level) noexcept;

struct MaseResult {
  double value = 0.0;
  bool floored = false;  // naive in-sample MAE was below 1e-8
};

MaseResult mase(std::span<const double> target, std::span<const double> point,
                std::span<const double> context);

// Sum of model losses over sum of baseline losses, paired by window.
double aggregate_relative(std::span<const double> model, std::span<const double> baseline);

// OLS on t = 0..n-1, extrapolated; quantile q = point + z_q * residual sd.
ForecastResult linear_regression_forecast(std::span<const double> context, int horizon,
                                          std::span<const double> levels = kDecileLevels);

// Last value repeated; quantiles from the RMS of in-sample one-step changes.
ForecastResult naive_forecast(std::span<const double> context, int horizon,
                              std::span<const double> levels = kDecileLevels);

double standard_normal_quantile(double p);

struct ForecastRequest {
  std::string id;
  std::vector<double> context;
  int horizon = kHorizon;
  std::vector<double> quantile_levels{kDecileLevels.begin(), kDecileLevels.end()};
};

class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual const std::string& name() const = 0;
  // One slot per request, same order. An empty slot is a failed request
  // (e.g. timed out); it is excluded from aggregation and counted.
  virtual std::vector<std::optional<ForecastResult>> forecast(
      std::span<const ForecastRequest> requests) = 0;
};

class FunctionForecaster : public Forecaster {
 public:
  using Fn = std::function<ForecastResult(const ForecastRequest&)>;
  FunctionForecaster(std::string name, Fn fn, int jobs = 1)
      : name_(std::move(name)), fn_(std::move(fn)), jobs_(jobs) {}

  const std::string& name() const override { return name_; }
  std::vector<std::optional<ForecastResult>> forecast(
      std::span<const ForecastRequest> requests) override;

 private:
  std::string name_;
  Fn fn_;
  int jobs_;
};

inline constexpr const char* kBaselineName = "LinearRegression";

// "linreg" -> LinearRegression, "naive" -> Naive.
std::unique_ptr<Forecaster> make_builtin_forecaster(const std::string& kind, int jobs = 1);

struct GroupMetrics {
  std::optional<double> mape;
  std::optional<double> smape;
  std::optional<double> agg_rel_wql;
  std::optional<double> agg_rel_mase;
  std::size_t windows = 0;
};

struct ModelReport {
  std::string name;
  GroupMetrics overall;
  std::size_t windows_failed = 0;
  std::size_t mape_excluded_steps = 0;
  std::size_t wql_undefined_windows = 0;
  std::size_t mase_floored_windows = 0;
  std::map<std::string, GroupMetrics> per_object;
};

struct MetricReport {
  std::vector<ModelReport> models;
  std::size_t series_total = 0;
  std::size_t series_skipped = 0;  // shorter than one window
  std::size_t windows_total = 0;
};

/// Scores every forecaster on every (context, horizon) window. MAPE and
/// sMAPE are plain means over windows; WQL and MASE are reported relative to
/// the forecaster named kBaselineName, which must be present.
MetricReport run_benchmark(const std::vector<SeriesRecord>& dataset,
                           std::span<Forecaster* const> forecasters);

// {model: {mape, smape, agg_rel_wql, agg_rel_mase, windows_evaluated, ...,
// per_object: {...}}}
nlohmann::json report_to_json(const MetricReport& report);

// object,model,smape,normalized_smape,windows (sMAPE relative to baseline)
std::string per_object_csv(const MetricReport& report);

}  // namespace flowseries
