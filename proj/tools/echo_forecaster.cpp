// Reference wire-protocol child: answers every request with the naive
// forecast (last context value, Gaussian bands from one-step changes).
// Fault-injection flags exist for exercising the harness.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "flowseries/bench.hpp"
#include "flowseries/bridge.hpp"
#include "flowseries/error.hpp"

using namespace flowseries;

int main(int argc, char** argv) {
  CLI::App app{"Naive-forecast child for the flowseries bridge protocol", "echo_forecaster"};
  int reverse_batch = 0;
  int bad_quantiles_at = -1;
  int sleep_ms = 0;
  int exit_code = 0;
  bool malformed = false;
  app.add_option("--reverse", reverse_batch,
                 "Buffer this many requests and answer them in reverse order");
  app.add_option("--bad-quantiles", bad_quantiles_at, "Swap the 0.1 and 0.9 bands at this step");
  app.add_option("--sleep-ms", sleep_ms, "Delay before each response");
  app.add_option("--exit-code", exit_code, "Exit status after input closes");
  app.add_flag("--malformed", malformed, "Emit a garbage line instead of the first response");
  CLI11_PARSE(app, argc, argv);

  std::ios::sync_with_stdio(false);
  std::vector<ForecastResponse> held;
  auto flush = [&] {
    for (auto it = held.rbegin(); it != held.rend(); ++it) std::cout << encode_response(*it) << '\n';
    std::cout.flush();
    held.clear();
  };

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    ForecastResponse resp;
    try {
      const ForecastRequest req = decode_request(line);
      resp.id = req.id;
      resp.result = naive_forecast(req.context, req.horizon, req.quantile_levels);
    } catch (const Error& e) {
      std::cerr << "echo_forecaster: " << e.what() << '\n';
      continue;
    }
    if (bad_quantiles_at >= 0 && resp.result.quantiles.size() >= 2 &&
        static_cast<std::size_t>(bad_quantiles_at) < resp.result.point.size()) {
      auto& lo = resp.result.quantiles.front().values[bad_quantiles_at];
      auto& hi = resp.result.quantiles.back().values[bad_quantiles_at];
      std::swap(lo, hi);
      if (lo == hi) lo += 1.0;
    }
    if (sleep_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
    if (malformed) {
      std::cout << "{this is not json" << std::endl;
      malformed = false;
      continue;
    }
    held.push_back(std::move(resp));
    if (static_cast<int>(held.size()) >= std::max(1, reverse_batch)) flush();
  }
  flush();
  return exit_code;
}
