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
#include <vector>

#include "selrefine/core.hpp"

namespace selrefine::regression {

struct ArtifactParams {
  double disparity_x = 0.0;
  double disparity_y = 0.0;
  // Artifact count and covered area fraction interpolate linearly from the
  // first to the second value as min(t, 1-t) goes from 0 to 0.5.
  int count_min = 0;
  int count_max = 4;
  double area_min = 0.0;
  double area_max = 0.12;
  // Gaussian blur sigma (pixels) at min(t, 1-t) = 0.5; scales linearly.
  double blur_sigma_max = 0.4;
};

struct RegressionOutput {
  std::vector<ImageFrame> frames;  // each carries opacity
  std::vector<BinaryGrid> artifacts;
};

class RegressionBackend {
 public:
  virtual ~RegressionBackend() = default;
  virtual RegressionOutput regress(const ImageFrame& i0, const ImageFrame& i1, const std::vector<double>& targets,
                                   uint64_t seed) const = 0;
};

class ToyRegressor : public RegressionBackend {
 public:
  explicit ToyRegressor(ArtifactParams p = {}) : p_(p) {}
  RegressionOutput regress(const ImageFrame& i0, const ImageFrame& i1, const std::vector<double>& targets,
                           uint64_t seed) const override;
  const ArtifactParams& params() const { return p_; }

 private:
  ArtifactParams p_;
};

RegressionOutput toy_regress(const ImageFrame& i0, const ImageFrame& i1, const std::vector<double>& targets,
                             const ArtifactParams& params, uint64_t seed);

// Integer pixel shift with edge replication: out(y, x) = f(y - dy, x - dx).
ImageFrame shift_frame(const ImageFrame& f, int dx, int dy);
ImageFrame box_blur(const ImageFrame& f, int radius);
ImageFrame gaussian_blur(const ImageFrame& f, double sigma);

}  // namespace selrefine::regression
