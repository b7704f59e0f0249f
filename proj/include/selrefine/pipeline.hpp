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

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "selrefine/cluster.hpp"
#include "selrefine/core.hpp"
#include "selrefine/diffusion.hpp"
#include "selrefine/masks.hpp"
#include "selrefine/quality.hpp"
#include "selrefine/regression.hpp"

namespace selrefine::pipeline {

enum class Mode { Coarse, Fine, Selective };

Mode parse_mode(const std::string& s);
std::string mode_name(Mode m);

struct SceneRequest {
  std::string scene_id;
  ImageFrame input0;
  ImageFrame input1;
  std::vector<double> targets;
  double alpha = 0.9;
  Mode mode = Mode::Fine;
  uint64_t seed = 0;
  // Relative pose (disparity) and artifact settings for the toy regressor.
  regression::ArtifactParams artifacts;
  // Clean targets for the oracle denoiser; regression latents when absent.
  std::optional<std::vector<ImageFrame>> oracle_clean;

  void validate() const;
};

struct RunConfig {
  int S = 50;
  int T = 5;
  double tau_o = 0.5;
  double gamma = 0.5;
  std::vector<int> grid = quality::default_grid();
  int block_size = 4;
  int halo = 1;
  std::string denoiser = "smoothing";
  std::string regressor = "toy";
  bool blur_detection = true;
  int blur_window = 7;
  ScheduleKind schedule = ScheduleKind::Cosine;
  diffusion::SmoothingParams smoothing;

  void validate() const;
};

std::string config_to_json(const RunConfig& c);
RunConfig config_from_json(const std::string& text);

struct TraceEvent {
  int step = 0;
  bool full = false;
  std::vector<int> active_frames;
  int active_blocks = 0;
  long long units = 0;
};

struct Trace {
  Mode mode = Mode::Fine;
  int frames = 0;
  int total_steps = 0;
  int blocks_per_frame = 1;
  int k_min = 0;
  std::vector<TraceEvent> events;
};

std::string trace_to_jsonl(const Trace& t);

struct CostReport {
  long long executed = 0;
  long long baseline = 0;
  double speedup = 1.0;
  double wall_seconds = 0.0;
  std::vector<int> ks;
};

CostReport account_cost(const Trace& t);

// Trained routing state: cluster centroids with one k-logic per cluster.
struct Models {
  cluster::ClusterModel clusters;

  static Models single(const quality::KLogic& logic);
};

Models load_models(const std::string& path);
void save_models(const std::string& path, const Models& m);

struct DenoiseResult {
  LatentTensor z;
  Trace trace;
};

// Denoising loop from k_min to S on pre-encoded latents.
DenoiseResult denoise(const LatentTensor& z0, const std::vector<int>& ks, Mode mode,
                      const diffusion::StepMasks* masks, const diffusion::DenoiserBackend& backend,
                      const NoiseSchedule& s, int T, uint64_t seed);

// Everything computed before the denoising loop.
struct PreparedScene {
  regression::RegressionOutput regression;
  LatentTensor z0;
  std::unique_ptr<diffusion::DenoiserBackend> backend;
  NoiseSchedule schedule;
  double q0 = 0.0;
  double q1 = 0.0;
  std::vector<double> q_reg;
  std::vector<double> q_star;
  std::vector<double> ratios;
};

PreparedScene prepare_scene(const SceneRequest& req, const RunConfig& cfg);

struct SceneResult {
  std::vector<ImageFrame> frames;
  std::vector<ImageFrame> regression;
  LatentTensor latent;
  std::vector<int> ks;
  std::vector<double> ratios;
  int cluster = 0;
  std::vector<masks::RefinementMask> masks;
  Trace trace;
  CostReport cost;
};

SceneResult run_scene(const SceneRequest& req, const RunConfig& cfg, const Models& models);

// Runs the prepared scene with explicit per-frame steps.
SceneResult run_with_steps(const SceneRequest& req, const RunConfig& cfg, PreparedScene& prep,
                           const std::vector<int>& ks, Mode mode);

// Pure-diffusion reference (k = 0 for all frames, every step full).
SceneResult run_full_diffusion(const SceneRequest& req, const RunConfig& cfg, PreparedScene& prep);

std::vector<double> score_frames(const std::vector<ImageFrame>& frames);

// Sweep of one scene over the grid: factors Q(k)/Q_full per frame.
std::vector<quality::CalibrationRecord> calibration_records(const SceneRequest& req, const RunConfig& cfg);

struct CalibrationResult {
  Models models;
  quality::KLogic global;
  std::vector<quality::CalibrationRecord> records;
  std::vector<int> scene_cluster;
};

// Records for all scenes, clusters of scene embeddings, one logic per
// cluster plus a global logic.
CalibrationResult calibrate(const std::vector<SceneRequest>& scenes, const RunConfig& cfg,
                            const quality::CalibrationOptions& opts, int clusters, uint64_t seed);

CalibrationResult calibrate_from_records(const std::vector<SceneRequest>& scenes,
                                         const std::vector<quality::CalibrationRecord>& records,
                                         const quality::CalibrationOptions& opts, int clusters, uint64_t seed);

}  // namespace selrefine::pipeline
