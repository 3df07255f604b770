#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowseries/bench.hpp"

namespace flowseries {

// Wire format, one JSON object per line on the child's stdin / stdout:
//   request  {"id": str, "context": [...], "horizon": int, "quantiles": [0.1, ..., 0.9]}
//   response {"id": str, "point": [...], "quantiles": {"0.1": [...], ..., "0.9": [...]}}
std::string encode_request(const ForecastRequest& request);

struct ForecastResponse {
  std::string id;
  ForecastResult result;
};

// Throws Error("forecaster-bridge", ...) quoting the line when it is not a
// well-formed response object.
ForecastResponse decode_response(const std::string& line);
std::string encode_response(const ForecastResponse& response);
ForecastRequest decode_request(const std::string& line);

// Shortest round-trip decimal form used for quantile keys ("0.1", "0.25").
std::string format_level(double level);

struct BridgeOptions {
  std::string command;  // run through /bin/sh -c
  std::string name;     // report label; defaults to "cmd:<command>"
  std::chrono::milliseconds timeout{120'000};  // per request
  int max_in_flight = 1;
  std::chrono::milliseconds exit_grace{10'000};
};

struct BridgeStats {
  std::size_t sent = 0;
  std::size_t answered = 0;
  std::size_t timed_out = 0;
};

/// Benchmarks an external process over the wire protocol. One child is
/// started per forecast() call and closed when every request has a terminal
/// disposition. Responses may arrive in any order and are re-paired by id.
/// A request that exceeds the timeout yields an empty slot. Malformed lines,
/// unknown or duplicate ids, invalid forecasts, a child that exits early and
/// a nonzero exit status raise Error("forecaster-bridge", ...).
class BridgeForecaster : public Forecaster {
 public:
  explicit BridgeForecaster(BridgeOptions options);

  const std::string& name() const override { return name_; }
  std::vector<std::optional<ForecastResult>> forecast(
      std::span<const ForecastRequest> requests) override;

  const BridgeStats& stats() const noexcept { return stats_; }

 private:
  BridgeOptions options_;
  std::string name_;
  BridgeStats stats_;
};

}  // namespace flowseries
