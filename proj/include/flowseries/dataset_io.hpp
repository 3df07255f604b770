#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowseries/pipeline.hpp"

namespace flowseries {

// {"series_id", "source", "object", "axis", "values"}
nlohmann::json record_to_json(const SeriesRecord& r);
SeriesRecord record_from_json(const nlohmann::json& j);

void write_jsonl(const std::filesystem::path& path, const std::vector<SeriesRecord>& records);
std::vector<SeriesRecord> read_jsonl(const std::filesystem::path& path);

// Every *.jsonl file directly under `dir`, in filename order.
std::vector<SeriesRecord> read_dataset_dir(const std::filesystem::path& dir);

// Long format: series_id,axis,t,value
void write_series_csv(const std::filesystem::path& path, const std::vector<SeriesRecord>& records);

}  // namespace flowseries
