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

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "selrefine/core.hpp"
#include "selrefine/pipeline.hpp"

namespace selrefine::harness {

struct Shape {
  std::array<double, 3> color{};
  double px = 0.0, py = 0.0;
  double rx = 0.0, ry = 0.0;
  double vx = 0.0, vy = 0.0;
  bool ellipse = true;
  double texture = 0.0;
  uint32_t noise_seed = 0;
};

// Procedural scene: textured gradient background translating by `bg_x/bg_y`
// between the views, plus shapes moving with their own velocities.
struct SceneModel {
  int height = 64;
  int width = 64;
  uint32_t noise_seed = 0;
  std::array<double, 3> color_a{}, color_b{};
  double dir_x = 1.0, dir_y = 0.0;
  double texture = 0.0;
  double bg_x = 0.0, bg_y = 0.0;
  std::vector<Shape> shapes;

  // View at position t in [0,1], quantised to 8 bits.
  ImageFrame render(double t) const;
};

SceneModel make_scene_model(uint64_t seed, int height, int width);

// Integer hash noise in [0,1].
double hash_noise(uint32_t seed, int y, int x);

struct CorpusScene {
  pipeline::SceneRequest request;
  std::vector<ImageFrame> ground_truth;
};

// Targets at (i+1)/(frames+1).
std::vector<CorpusScene> gen_corpus(int count, int dims, uint64_t seed, int frames = 8);
CorpusScene gen_scene(const std::string& id, uint64_t scene_seed, int dims, int frames = 8);

void save_scene(const std::string& dir, const CorpusScene& s);
// Reads <dir>/scene.json plus the referenced PNGs.
CorpusScene load_scene_file(const std::string& json_path);
void save_corpus(const std::string& dir, const std::vector<CorpusScene>& corpus);
std::vector<CorpusScene> load_corpus(const std::string& dir);

enum class RunKind { Refine, Diffusion, Regression };

struct BenchConfig {
  RunKind kind = RunKind::Refine;
  pipeline::Mode mode = pipeline::Mode::Fine;
  double alpha = 0.9;

  std::string label() const;
};

struct BenchRow {
  std::string scene_id;
  std::string mode;
  double alpha = 0.0;
  double quality_factor = 0.0;
  // Zero executed units (regression only) gives +inf.
  double unit_speedup = 1.0;
  double wall_ms = 0.0;
  long long units = 0;
  std::vector<int> ks;
};

struct Aggregate {
  std::string mode;
  double alpha = 0.0;
  int scenes = 0;
  double mean_quality = 0.0;
  double mean_speedup = 0.0;
  double mean_units = 0.0;
  double p95_units = 0.0;
  double mean_wall_ms = 0.0;
  double p95_wall_ms = 0.0;
  // step_hist[frame][steps] = count, steps = S - k.
  std::vector<std::map<int, int>> step_hist;
};

struct BenchmarkReport {
  std::vector<BenchRow> rows;
  std::vector<Aggregate> aggregates;
};

struct BenchOptions {
  pipeline::RunConfig run;
  // Models keyed by alpha; required for every refine config.
  std::map<double, pipeline::Models> models;
  int threads = 0;  // 0 means hardware concurrency
  bool timing = true;
};

// Nearest-rank percentile on a copy of the values.
double nearest_rank(std::vector<double> values, double pct);

BenchmarkReport run_benchmark(const std::vector<CorpusScene>& corpus, const std::vector<BenchConfig>& configs,
                              const BenchOptions& opts);
std::vector<Aggregate> aggregate_rows(const std::vector<BenchRow>& rows, int total_steps);

std::string report_csv(const BenchmarkReport& r);
std::string report_json(const BenchmarkReport& r);
std::vector<BenchRow> rows_from_csv(const std::string& text);

// Bench config file: {"runs": [{"mode": ..., "alpha": ...}], "klogic": {"0.9": path}, "run": {...}}.
struct BenchFile {
  std::vector<BenchConfig> configs;
  std::map<double, std::string> klogic_paths;
  pipeline::RunConfig run;
};

BenchFile bench_file_from_json(const std::string& text);
// Loads the models for every refine alpha, relative paths against base_dir.
std::map<double, pipeline::Models> load_bench_models(const BenchFile& f, const std::string& base_dir);

}  // namespace selrefine::harness
