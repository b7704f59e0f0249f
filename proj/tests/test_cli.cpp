// Copyright 2026 The selrefine Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sys/wait.h>

#include "selrefine/harness.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace selrefine;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(SELREFINE_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb || fa.empty()) return false;
  for (const auto& p : fa)
    if (slurp(a / p) != slurp(b / p)) return false;
  return true;
}

std::string logic_json(int k) {
  quality::KLogic l;
  l.alpha = 0.9;
  l.thresholds = {0.0};
  l.steps = {k};
  return quality::klogic_to_json(l);
}

}  // namespace

TEST_CASE("gen twice with the same seed writes identical trees") {
  testsupport::TempDir dir("cli_gen");
  REQUIRE(run("gen --scenes 1 --seed 7 --dims 32 --frames 3 --out " + dir.str("a")) == 0);
  REQUIRE(run("gen --scenes 1 --seed 7 --dims 32 --frames 3 --out " + dir.str("b")) == 0);
  CHECK(same_tree(dir.path / "a", dir.path / "b"));
  REQUIRE(run("gen --scenes 1 --seed 8 --dims 32 --frames 3 --out " + dir.str("c")) == 0);
  CHECK_FALSE(same_tree(dir.path / "a", dir.path / "c"));
}

TEST_CASE("mask of an opaque sharp frame is empty") {
  testsupport::TempDir dir("cli_mask");
  ImageFrame f(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) f.at(y, x, c) = ((x / 2 + y / 2) % 2) ? 0.9 : 0.1;
  write_png(dir.str("f.png"), f);
  write_gray_png(dir.str("o.png"), Grid(32, 32, 1.0));
  REQUIRE(run("mask --frame " + dir.str("f.png") + " --opacity " + dir.str("o.png") + " --out " + dir.str("m.png")) == 0);
  const auto m = read_gray_png(dir.str("m.png"));
  for (double v : m.v) CHECK(v == 0.0);

  // A transparent corner shows up.
  Grid op(32, 32, 1.0);
  op.at(0, 0) = 0.0;
  write_gray_png(dir.str("o2.png"), op);
  REQUIRE(run("mask --no-blur --frame " + dir.str("f.png") + " --opacity " + dir.str("o2.png") + " --out " +
              dir.str("m2.png")) == 0);
  CHECK(read_gray_png(dir.str("m2.png")).at(0, 0) == 1.0);
}

TEST_CASE("exit codes") {
  testsupport::TempDir dir("cli_codes");
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("gen --scenes 1 --seed 1 --dims 30 --out " + dir.str("g")) == 2);
  CHECK(run("infer --scene " + dir.str("missing.json") + " --klogic x --out " + dir.str("o")) == 2);
  CHECK(run("bench --corpus " + dir.str("none") + " --configs " + dir.str("none.json") + " --report r.csv") == 2);
  REQUIRE(run("gen --scenes 1 --seed 1 --dims 32 --frames 3 --out " + dir.str("g")) == 0);
  spit(dir.path / "cfg.json", R"({"runs": [{"mode": "fine", "alpha": 0.8}]})");
  CHECK(run("bench --corpus " + dir.str("g") + " --configs " + dir.str("cfg.json") + " --report " + dir.str("r.csv")) ==
        2);
  // Unreadable frame PNG is a runtime failure.
  spit(dir.path / "bad.png", "not a png");
  CHECK(run("mask --frame " + dir.str("bad.png") + " --opacity " + dir.str("bad.png") + " --out " + dir.str("m.png")) ==
        1);
  CHECK(run("--help") == 0);
}

TEST_CASE("infer writes frames, masks, trace and cost") {
  testsupport::TempDir dir("cli_infer");
  REQUIRE(run("gen --scenes 1 --seed 3 --dims 32 --frames 3 --out " + dir.str("c")) == 0);
  spit(dir.path / "k.json", logic_json(30));
  const std::string scene = (dir.path / "c" / "scene_0000" / "scene.json").string();
  REQUIRE(run("infer --scene " + scene + " --klogic " + dir.str("k.json") + " --mode selective --out " + dir.str("o")) ==
          0);
  for (const char* f : {"frame_00.png", "frame_02.png", "mask_00.png", "trace.jsonl", "cost.json"})
    CHECK(fs::exists(dir.path / "o" / f));
  const auto cost = nlohmann::json::parse(slurp(dir.path / "o" / "cost.json"));
  CHECK(cost["ks"] == std::vector<int>{30, 30, 30});
  CHECK(cost["unit_speedup"].get<double>() >= 1.0);
  REQUIRE(run("infer --isa scalar --scene " + scene + " --klogic " + dir.str("k.json") + " --mode selective --out " +
              dir.str("o2")) == 0);
  CHECK(slurp(dir.path / "o" / "trace.jsonl") == slurp(dir.path / "o2" / "trace.jsonl"));
  CHECK(run("infer --scene " + scene + " --klogic " + dir.str("k.json") + " --mode warp --out " + dir.str("o3")) == 2);
}

TEST_CASE("calibrate then bench end to end") {
  testsupport::TempDir dir("cli_bench");
  REQUIRE(run("gen --scenes 3 --seed 5 --dims 32 --frames 3 --out " + dir.str("c")) == 0);
  spit(dir.path / "run.json", R"({"grid": [10, 30]})");
  REQUIRE(run("calibrate --corpus " + dir.str("c") + " --alpha 0.9 --clusters 1 --config " + dir.str("run.json") +
              " --records " + dir.str("rec.csv") + " --out " + dir.str("k90.json")) == 0);
  const auto k = nlohmann::json::parse(slurp(dir.path / "k90.json"));
  CHECK(k["alpha"] == 0.9);
  CHECK(k.contains("clusters"));
  // Refit from the stored sweep gives the same logic.
  REQUIRE(run("calibrate --corpus " + dir.str("c") + " --alpha 0.9 --clusters 1 --config " + dir.str("run.json") +
              " --from-records " + dir.str("rec.csv") + " --out " + dir.str("k90b.json")) == 0);
  CHECK(slurp(dir.path / "k90.json") == slurp(dir.path / "k90b.json"));

  spit(dir.path / "bench.json", R"({"runs": [{"mode": "fine", "alpha": 0.9}, {"mode": "coarse", "alpha": 0.9},
                                              {"mode": "diffusion"}, {"mode": "regression"}],
                                     "klogic": {"0.90": "k90.json"}, "run": {"grid": [10, 30]}})");
  const std::string bench = "bench --no-timing --corpus " + dir.str("c") + " --configs " + dir.str("bench.json");
  REQUIRE(run(bench + " --threads 2 --report " + dir.str("r1.csv")) == 0);
  REQUIRE(run(bench + " --threads 1 --report " + dir.str("r2.csv")) == 0);
  CHECK(slurp(dir.path / "r1.csv") == slurp(dir.path / "r2.csv"));
  CHECK(slurp(dir.path / "r1.json") == slurp(dir.path / "r2.json"));
  const auto rows = harness::rows_from_csv(slurp(dir.path / "r1.csv"));
  CHECK(rows.size() == 12);
  const auto again = harness::aggregate_rows(rows, 50);
  const auto j = nlohmann::json::parse(slurp(dir.path / "r1.json"));
  REQUIRE(j["aggregates"].size() == again.size());
  for (size_t i = 0; i < again.size(); ++i)
    CHECK(again[i].mean_quality == j["aggregates"][i]["mean_quality_factor"].get<double>());
}
