#include "flowseries/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <nlohmann/json.hpp>

#include "flowseries/error.hpp"

namespace flowseries {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("dataset-io", msg); }

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

}  // namespace

json record_to_json(const SeriesRecord& r) {
  json j;
  j["series_id"] = r.series_id;
  j["source"] = r.source_id;
  j["object"] = r.object_tag;
  j["axis"] = axis_name(r.axis);
  j["values"] = r.values;
  return j;
}

SeriesRecord record_from_json(const json& j) {
  try {
    SeriesRecord r;
    r.series_id = j.at("series_id").get<std::string>();
    r.source_id = j.at("source").get<std::string>();
    r.object_tag = j.at("object").get<std::string>();
    const auto axis = j.at("axis").get<std::string>();
    if (axis != "x" && axis != "y") fail("axis must be \"x\" or \"y\", got \"" + axis + "\"");
    r.axis = axis == "x" ? Axis::x : Axis::y;
    r.values = j.at("values").get<std::vector<double>>();
    return r;
  } catch (const json::exception& e) {
    fail(std::string("malformed series record: ") + e.what());
  }
}

void write_jsonl(const fs::path& path, const std::vector<SeriesRecord>& records) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  if (!out) fail("write failed: " + path.string());
}

std::vector<SeriesRecord> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read " + path.string());
  std::vector<SeriesRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<SeriesRecord> read_dataset_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<SeriesRecord> all;
  for (const auto& f : files) {
    auto recs = read_jsonl(f);
    all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return all;
}

void write_series_csv(const fs::path& path, const std::vector<SeriesRecord>& records) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  out << "series_id,axis,t,value\n";
  for (const auto& r : records)
    for (std::size_t t = 0; t < r.values.size(); ++t)
      out << r.series_id << ',' << axis_name(r.axis) << ',' << t << ',' << shortest(r.values[t])
          << '\n';
}

}  // namespace flowseries
