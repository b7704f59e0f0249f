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

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "selrefine/core.hpp"

namespace selrefine::quality {

struct ProxyParams {
  double a = 1.0;
  double b = 4.0;
  double d = 3.0;
};

class QualityMetric {
 public:
  virtual ~QualityMetric() = default;
  virtual double score(const ImageFrame& frame) const = 0;
};

// 100 * sigmoid(a*log(1+E_lap) + b*C - d) on luminance.
class SharpnessContrastProxy : public QualityMetric {
 public:
  explicit SharpnessContrastProxy(ProxyParams p = {}) : p_(p) {}
  double score(const ImageFrame& frame) const override;

 private:
  ProxyParams p_;
};

double score_image(const ImageFrame& frame);

// Mean squared 3x3 Laplacian response with edge replication.
double laplacian_energy(const std::vector<double>& lum, int height, int width);

double interpolate_reference(double c0, double c1, double t, double gamma = 0.5);
double quality_ratio(double q_reg, double q_star);

struct KLogic {
  double alpha = 0.0;
  int k_max = 40;
  std::vector<double> thresholds;
  std::vector<int> steps;
  int fallback_k = 0;

  void validate() const;
  bool operator==(const KLogic&) const = default;
};

int select_k(const KLogic& logic, double r);

std::string klogic_to_json(const KLogic& logic);
KLogic klogic_from_json(const std::string& text);
void save_klogic(const std::string& path, const KLogic& logic);
KLogic load_klogic(const std::string& path);

struct CalibrationRecord {
  std::string scene_id;
  int frame = 0;
  double ratio = 0.0;
  std::map<int, double> factors;
};

struct CalibrationOptions {
  double alpha = 0.95;
  std::vector<int> grid = {5, 10, 15, 20, 25, 30, 35, 40, 45};
  int k_max = 40;
  int bins = 10;
  // Fraction of a bin's frames that must individually reach alpha. Zero
  // leaves only the mean rule.
  double coverage = 0.9;
};

std::vector<int> default_grid();

// Decile binning of the observed ratios, per-bin largest k meeting the
// constraint, running minimum from high to low ratio, clamp to k_max.
KLogic calibrate_klogic(const std::vector<CalibrationRecord>& records, const CalibrationOptions& opts);

// Bin index of r against thresholds (left-closed); -1 below the first cut.
int bin_of(const std::vector<double>& thresholds, double r);

std::string records_to_csv(const std::vector<CalibrationRecord>& records);
std::vector<CalibrationRecord> records_from_csv(const std::string& text);

}  // namespace selrefine::quality
