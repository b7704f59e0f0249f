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

#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <numeric>

#include "selrefine/harness.hpp"
#include "support.hpp"

using namespace selrefine;
using namespace selrefine::harness;

namespace {

quality::KLogic two_step_logic() {
  quality::KLogic l;
  l.alpha = 0.9;
  l.thresholds = {0.0, 0.9};
  l.steps = {20, 35};
  return l;
}

BenchOptions small_options(int threads) {
  BenchOptions o;
  o.models[0.9] = pipeline::Models::single(two_step_logic());
  o.threads = threads;
  return o;
}

const std::vector<BenchConfig> kConfigs{{RunKind::Refine, pipeline::Mode::Fine, 0.9},
                                        {RunKind::Refine, pipeline::Mode::Selective, 0.9},
                                        {RunKind::Diffusion},
                                        {RunKind::Regression}};

}  // namespace

TEST_CASE("corpus generation is deterministic") {
  const auto a = gen_corpus(3, 32, 7, 4), b = gen_corpus(3, 32, 7, 4);
  REQUIRE(a.size() == 3);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].request.scene_id == b[i].request.scene_id);
    CHECK(a[i].request.seed == b[i].request.seed);
    CHECK(a[i].request.input0.rgb == b[i].request.input0.rgb);
    for (size_t j = 0; j < a[i].ground_truth.size(); ++j) CHECK(a[i].ground_truth[j].rgb == b[i].ground_truth[j].rgb);
  }
  CHECK(a[0].request.scene_id == "scene_0000");
  CHECK(a[0].request.seed != a[1].request.seed);
  CHECK(gen_corpus(1, 32, 8, 4)[0].request.seed != a[0].request.seed);
  CHECK(a[0].request.targets == std::vector<double>{0.2, 0.4, 0.6, 0.8});
}

TEST_CASE("rendering at the endpoints gives the input views") {
  const auto s = gen_scene("x", 1234, 32, 3);
  const auto m = make_scene_model(1234, 32, 32);
  CHECK(m.render(0.0).rgb == s.request.input0.rgb);
  CHECK(m.render(1.0).rgb == s.request.input1.rgb);
  CHECK(m.render(s.request.targets[1]).rgb == s.ground_truth[1].rgb);
  for (double v : s.request.input0.rgb) CHECK(std::round(v * 255.0) == doctest::Approx(v * 255.0).epsilon(1e-12));
}

TEST_CASE("generator rejects bad dims and counts") {
  CHECK_THROWS_AS(gen_corpus(1, 30, 1), InvalidArgument);
  CHECK_THROWS_AS(gen_corpus(0, 32, 1), InvalidArgument);
  CHECK_THROWS_AS(gen_scene("x", 1, 32, 0), InvalidArgument);
}

TEST_CASE("ground truth outscores the toy regression") {
  const auto corpus = gen_corpus(12, 64, 7, 8);
  int better = 0, total = 0;
  for (const auto& s : corpus) {
    const auto& r = s.request;
    const auto reg = regression::toy_regress(r.input0, r.input1, r.targets, r.artifacts, r.seed);
    for (size_t i = 0; i < r.targets.size(); ++i) {
      better += quality::score_image(s.ground_truth[i]) > quality::score_image(reg.frames[i]);
      ++total;
    }
  }
  MESSAGE(better << " of " << total << " frames");
  CHECK(better >= 0.95 * total);
}

TEST_CASE("corpus survives a disk round trip") {
  testsupport::TempDir dir("corpus");
  const auto corpus = gen_corpus(2, 32, 3, 3);
  save_corpus(dir.str(), corpus);
  CHECK(std::filesystem::exists(dir.path / "corpus.json"));
  CHECK(std::filesystem::exists(dir.path / "scene_0001" / "gt_02.png"));
  const auto back = load_corpus(dir.str());
  REQUIRE(back.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    const auto& a = corpus[i].request;
    const auto& b = back[i].request;
    CHECK(a.scene_id == b.scene_id);
    CHECK(a.seed == b.seed);
    CHECK(a.targets == b.targets);
    CHECK(a.artifacts.disparity_x == b.artifacts.disparity_x);
    CHECK(a.input0.rgb == b.input0.rgb);
    CHECK(a.input1.rgb == b.input1.rgb);
    CHECK(back[i].ground_truth[2].rgb == corpus[i].ground_truth[2].rgb);
  }
  CHECK_THROWS_AS(load_corpus(dir.str("nothing")), ConfigError);
}

TEST_CASE("nearest rank percentile") {
  CHECK(nearest_rank({5, 1, 3, 2, 4}, 95) == 5);
  CHECK(nearest_rank({5, 1, 3, 2, 4}, 40) == 2);
  std::vector<double> v(20);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(nearest_rank(v, 95) == 19);
  CHECK(nearest_rank({7}, 95) == 7);
  CHECK_THROWS_AS(nearest_rank({}, 95), InvalidArgument);
}

TEST_CASE("diffusion-only benchmark reports unit speedups") {
  const auto corpus = gen_corpus(2, 32, 5, 3);
  const auto r = run_benchmark(corpus, {{RunKind::Diffusion}}, small_options(2));
  REQUIRE(r.rows.size() == 2);
  for (const auto& row : r.rows) {
    CHECK(row.unit_speedup == 1.0);
    CHECK(row.quality_factor == 1.0);
    CHECK(row.ks == std::vector<int>{0, 0, 0});
  }
}

TEST_CASE("benchmark rows, aggregates and reports") {
  const auto corpus = gen_corpus(4, 32, 9, 3);
  const auto r = run_benchmark(corpus, kConfigs, small_options(3));
  REQUIRE(r.rows.size() == 16);
  // Ordered by config, then scene.
  CHECK(r.rows[0].mode == "fine");
  CHECK(r.rows[3].scene_id == "scene_0003");
  CHECK(r.rows[4].mode == "selective");
  CHECK(std::isinf(r.rows[15].unit_speedup));
  REQUIRE(r.aggregates.size() == 4);
  for (const auto& a : r.aggregates) {
    CHECK(a.scenes == 4);
    CHECK(a.p95_units >= a.mean_units);
    CHECK(a.p95_wall_ms >= a.mean_wall_ms);
    int frames = 0;
    for (const auto& h : a.step_hist)
      for (const auto& [steps, count] : h) frames += count;
    CHECK(frames == 12);
  }

  // Aggregates recompute from the rows stored in the JSON report.
  const auto j = nlohmann::json::parse(report_json(r));
  REQUIRE(j["rows"].size() == 16);
  std::vector<BenchRow> rows;
  for (const auto& jr : j["rows"]) {
    BenchRow row;
    row.scene_id = jr["scene_id"];
    row.mode = jr["mode"];
    row.alpha = jr["alpha"];
    row.quality_factor = jr["quality_factor"];
    row.unit_speedup = jr["unit_speedup"].is_string() ? INFINITY : jr["unit_speedup"].get<double>();
    row.wall_ms = jr["wall_ms"];
    row.units = jr["units"];
    row.ks = jr["ks"].get<std::vector<int>>();
    rows.push_back(row);
  }
  const auto again = aggregate_rows(rows, 50);
  for (size_t i = 0; i < again.size(); ++i) {
    const auto& ja = j["aggregates"][i];
    CHECK(again[i].mean_quality == ja["mean_quality_factor"].get<double>());
    CHECK(again[i].mean_units == ja["mean_units"].get<double>());
    CHECK(again[i].p95_units == ja["p95_units"].get<double>());
    CHECK(again[i].mean_wall_ms == ja["mean_wall_ms"].get<double>());
    CHECK(again[i].p95_wall_ms == ja["p95_wall_ms"].get<double>());
    CHECK(again[i].step_hist == r.aggregates[i].step_hist);
  }

  // CSV round trip keeps every column exactly.
  const auto csv_rows = rows_from_csv(report_csv(r));
  REQUIRE(csv_rows.size() == r.rows.size());
  for (size_t i = 0; i < csv_rows.size(); ++i) {
    CHECK(csv_rows[i].scene_id == r.rows[i].scene_id);
    CHECK(csv_rows[i].quality_factor == r.rows[i].quality_factor);
    CHECK(csv_rows[i].unit_speedup == r.rows[i].unit_speedup);
    CHECK(csv_rows[i].wall_ms == r.rows[i].wall_ms);
    CHECK(csv_rows[i].ks == r.rows[i].ks);
  }
  const auto from_csv = aggregate_rows(csv_rows, 50);
  for (size_t i = 0; i < from_csv.size(); ++i) {
    CHECK(from_csv[i].mean_quality == r.aggregates[i].mean_quality);
    CHECK(from_csv[i].mean_speedup == r.aggregates[i].mean_speedup);
    CHECK(from_csv[i].p95_wall_ms == r.aggregates[i].p95_wall_ms);
  }
  CHECK_THROWS_AS(rows_from_csv("nope\n"), ConfigError);
}

TEST_CASE("reports do not depend on the thread count") {
  const auto corpus = gen_corpus(3, 32, 11, 3);
  auto one = small_options(1), many = small_options(4);
  one.timing = many.timing = false;
  const auto a = run_benchmark(corpus, kConfigs, one), b = run_benchmark(corpus, kConfigs, many);
  CHECK(report_csv(a) == report_csv(b));
  CHECK(report_json(a) == report_json(b));
}

TEST_CASE("missing calibration lists every missing alpha") {
  const auto corpus = gen_corpus(1, 32, 1, 3);
  BenchOptions o;
  const std::vector<BenchConfig> cfgs{{RunKind::Refine, pipeline::Mode::Fine, 0.9},
                                      {RunKind::Refine, pipeline::Mode::Coarse, 0.95},
                                      {RunKind::Refine, pipeline::Mode::Selective, 0.9}};
  try {
    run_benchmark(corpus, cfgs, o);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("0.9") != std::string::npos);
    CHECK(msg.find("0.95") != std::string::npos);
  }
  BenchFile f;
  f.configs = cfgs;
  f.klogic_paths[0.9] = "x.json";
  CHECK_THROWS_AS(load_bench_models(f, "."), ConfigError);
}

TEST_CASE("bench config file parsing") {
  testsupport::TempDir dir("benchcfg");
  quality::save_klogic(dir.str("k90.json"), two_step_logic());
  const auto f = bench_file_from_json(R"({"runs": [{"mode": "fine", "alpha": 0.9}, {"mode": "diffusion"},
                                                  {"mode": "regression"}],
                                         "klogic": {"0.90": "k90.json"}, "run": {"T": 4}})");
  REQUIRE(f.configs.size() == 3);
  CHECK(f.configs[0].kind == RunKind::Refine);
  CHECK(f.configs[1].label() == "diffusion");
  CHECK(f.configs[2].label() == "regression");
  CHECK(f.run.T == 4);
  const auto models = load_bench_models(f, dir.str());
  CHECK(models.at(0.9).clusters.logic_for(0) == two_step_logic());
  CHECK_THROWS_AS(bench_file_from_json("{\"runs\": [{\"mode\": \"warp\", \"alpha\": 0.9}]}"), ConfigError);
  CHECK_THROWS_AS(bench_file_from_json("{\"runs\": [{\"mode\": \"fine\"}]}"), ConfigError);
  CHECK_THROWS_AS(bench_file_from_json("{\"runs\": [], \"klogic\": {\"high\": \"a\"}}"), ConfigError);
}
