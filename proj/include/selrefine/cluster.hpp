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
#include "selrefine/quality.hpp"

namespace selrefine::cluster {

inline constexpr int kEmbeddingDims = 64;
using Embedding = std::array<double, kEmbeddingDims>;

// 4x4 mean-RGB grid (48) followed by a normalised 16-bin luminance histogram.
Embedding embed_frame(const ImageFrame& f);
Embedding embed_scene(const ImageFrame& i0, const ImageFrame& i1);

struct ClusterModel {
  std::vector<Embedding> centroids;
  // One logic name per centroid; resolved against `logics`.
  std::vector<std::string> logic_names;
  std::map<std::string, quality::KLogic> logics;

  int k() const { return static_cast<int>(centroids.size()); }
  // Throws ConfigError when the cluster has no logic.
  const quality::KLogic& logic_for(int cluster) const;
};

struct FitTrace {
  std::vector<double> objective;  // after each Lloyd iteration
  int iterations = 0;
};

ClusterModel fit_clusters(const std::vector<Embedding>& points, int K, uint64_t seed, FitTrace* trace = nullptr);
int assign_cluster(const ClusterModel& model, const Embedding& e);
std::vector<int> assign_all(const ClusterModel& model, const std::vector<Embedding>& points);
double squared_distance(const Embedding& a, const Embedding& b);

std::string model_to_json(const ClusterModel& m);
ClusterModel model_from_json(const std::string& text);

}  // namespace selrefine::cluster
