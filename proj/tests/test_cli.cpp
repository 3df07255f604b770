#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "flowseries/dataset_io.hpp"
#include "test_support.hpp"

using namespace flowseries;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string("'") + FLOWSERIES_CLI + "' " + args + " 2>/dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = ::pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void write_spec(const fs::path& p) {
  std::ofstream(p) << R"({
    "width": 128, "height": 128, "frame_count": 120,
    "background": {"type": "constant", "value": 60},
    "objects": [{"texture_seed": 5, "size": 16,
                 "trajectory": {"type": "sinusoidal", "center": [64, 64],
                                "amplitude": [22, 14], "period": 45, "phase": [0, 1]}}],
    "source_id": "blob", "object_tag": "ball"})";
}

void write_long_dataset(const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<SeriesRecord> recs;
  for (int i = 0; i < 3; ++i) {
    SeriesRecord r;
    r.series_id = "v:" + std::to_string(i) + ":x";
    r.source_id = "v";
    r.object_tag = i == 2 ? "car" : "bird";
    r.values = testing::random_walk(30 + i, 1000 + 300 * i);
    for (auto& v : r.values) v += 200.0;
    recs.push_back(std::move(r));
  }
  write_jsonl(dir / "v.jsonl", recs);
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  testing::TempDir d;
  CHECK(run("extract --out " + q(d.path())).code == 2);
  CHECK(run("synth --bogus-flag").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("--version").code == 0);
}

TEST_CASE("module errors exit with 1") {
  testing::TempDir d;
  CHECK(run("extract --frames " + q(d / "missing") + " --out " + q(d / "o")).code == 1);
  write_long_dataset(d / "data");
  CHECK(run("bench --data " + q(d / "data") + " --forecaster builtin:naive --out " + q(d / "r.json")).code == 1);
}

TEST_CASE("synth is deterministic and extract produces a dataset") {
  testing::TempDir d;
  write_spec(d / "s.json");
  REQUIRE(run("synth --spec " + q(d / "s.json") + " --seed 7 --out " + q(d / "a")).code == 0);
  REQUIRE(run("synth --spec " + q(d / "s.json") + " --seed 7 --out " + q(d / "b")).code == 0);
  for (const auto& e : fs::directory_iterator(d / "a")) {
    const auto name = e.path().filename().string();
    if (name == "manifest.json") continue;
    CHECK_MESSAGE(slurp(e.path()) == slurp(d / "b" / name), name);
  }
  CHECK(fs::exists(d / "a" / "ground_truth.json"));
  const auto sm = json::parse(slurp(d / "a" / "manifest.json"));
  CHECK(sm.at("seed") == 7);
  CHECK(sm.at("version") == "0.1.0");

  REQUIRE(run("extract --frames " + q(d / "a") + " --out " + q(d / "ds") + " --jobs 2").code == 0);
  const auto recs = read_jsonl(d / "ds" / "blob.jsonl");
  REQUIRE(!recs.empty());
  CHECK(recs.size() % 2 == 0);
  CHECK(recs[0].object_tag == "ball");
  CHECK(slurp(d / "ds" / "blob.csv").rfind("series_id,axis,t,value\n", 0) == 0);
  const auto m = json::parse(slurp(d / "ds" / "manifest.json"));
  REQUIRE(m.at("videos").size() == 1);
  const auto& v = m.at("videos")[0];
  CHECK(v.at("config").at("lk").at("window") == 40);
  CHECK(v.at("config").at("fb").at("fb_threshold") == 50.0);
  CHECK(v.at("command").size() > 1);

  const auto st = run("stats --data " + q(d / "ds"));
  REQUIRE(st.code == 0);
  CHECK(json::parse(st.out).at("series_count") == recs.size());
}

TEST_CASE("bench baseline ratios are exactly one") {
  testing::TempDir d;
  write_long_dataset(d / "data");
  const auto r = run("bench --data " + q(d / "data") + " --forecaster builtin:linreg --forecaster builtin:naive"
                     " --forecaster " + q(std::string("echo=cmd:\"'") + FLOWSERIES_ECHO_FORECASTER + "'\"") +
                     " --out " + q(d / "out" / "r.json"));
  REQUIRE(r.code == 0);
  const auto j = json::parse(slurp(d / "out" / "r.json"));
  CHECK(j.at("LinearRegression").at("agg_rel_wql").get<double>() == 1.0);
  CHECK(j.at("LinearRegression").at("agg_rel_mase").get<double>() == 1.0);
  auto naive = j.at("Naive"), echo = j.at("echo");
  CHECK(naive.dump() == echo.dump());
  CHECK(fs::exists(d / "out" / "per_object.csv"));
  CHECK(fs::exists(d / "out" / "bench_manifest.json"));
}

TEST_CASE("pca writes labelled points") {
  testing::TempDir d;
  write_long_dataset(d / "a");
  write_long_dataset(d / "b");
  REQUIRE(run("pca --a " + q(d / "a") + " --b " + q(d / "b") + " --out " + q(d / "p" / "points.csv")).code == 0);
  const auto csv = slurp(d / "p" / "points.csv");
  CHECK(csv.rfind("label,pc1,pc2\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(fs::exists(d / "p" / "pca_manifest.json"));
}
