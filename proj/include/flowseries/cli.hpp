#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowseries/pipeline.hpp"

namespace flowseries {

inline constexpr const char* kToolVersion = "0.1.0";

// Every tunable across subcommands. Serialised verbatim into manifests.
struct RunConfig {
  PipelineConfig pipeline;
  std::string frames_dir;
  std::string pattern = "*";
  std::string source_id;
  std::string object_tag;
  std::string dump_masks;
  std::string out;
  std::string spec_path;
  std::string data_dir;
  std::string pca_a;
  std::string pca_b;
  int resample_len = 256;
  int entropy_bins = 64;
  std::vector<std::string> forecasters;
  double timeout_s = 120.0;
  int max_in_flight = 1;
  std::uint64_t seed = 0;
  int jobs = 1;
};

nlohmann::json run_config_to_json(const RunConfig& cfg, const std::string& subcommand);

// Parses argv and runs the subcommand. 0 on success, 2 on usage errors,
// 1 on module failures (reported as "<module>: <message>" on stderr).
int dispatch(int argc, const char* const* argv);

}  // namespace flowseries
