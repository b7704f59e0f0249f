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

#include "selrefine/quality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

namespace selrefine::quality {

double laplacian_energy(const std::vector<double>& lum, int height, int width) {
  if (height <= 0 || width <= 0) return 0.0;
  auto at = [&](int y, int x) {
    y = std::clamp(y, 0, height - 1);
    x = std::clamp(x, 0, width - 1);
    return lum[static_cast<size_t>(y) * width + x];
  };
  double acc = 0.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double l = at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) - 4.0 * at(y, x);
      acc += l * l;
    }
  return acc / (static_cast<double>(height) * width);
}

double SharpnessContrastProxy::score(const ImageFrame& frame) const {
  const auto lum = luminance(clamp01(frame));
  const double e = laplacian_energy(lum, frame.height, frame.width);
  double mean = 0.0;
  for (double v : lum) mean += v;
  mean /= static_cast<double>(lum.size());
  double var = 0.0;
  for (double v : lum) var += (v - mean) * (v - mean);
  const double c = std::sqrt(var / static_cast<double>(lum.size()));
  const double x = p_.a * std::log1p(e) + p_.b * c - p_.d;
  return 100.0 / (1.0 + std::exp(-x));
}

double score_image(const ImageFrame& frame) {
  static const SharpnessContrastProxy proxy;
  return proxy.score(frame);
}

double interpolate_reference(double c0, double c1, double t, double gamma) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("interpolate_reference: t outside [0,1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("interpolate_reference: gamma outside (0,1]");
  const double f = c1 >= c0 ? std::pow(t, gamma) : 1.0 - std::pow(1.0 - t, gamma);
  return c0 + (c1 - c0) * f;
}

double quality_ratio(double q_reg, double q_star) {
  if (q_star == 0.0) throw InvalidArgument("quality_ratio: reference quality is zero");
  return q_reg / q_star;
}

void KLogic::validate() const {
  if (thresholds.size() != steps.size()) throw InvalidArgument("k-logic: thresholds and steps differ in length");
  for (size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) throw InvalidArgument("k-logic: thresholds not strictly ascending");
    if (steps[i] < steps[i - 1]) throw InvalidArgument("k-logic: steps decrease");
  }
  for (int k : steps)
    if (k < 0 || k > k_max) throw InvalidArgument("k-logic: step outside [0, k_max]");
  if (fallback_k < 0 || fallback_k > k_max) throw InvalidArgument("k-logic: fallback outside [0, k_max]");
  if (!steps.empty() && fallback_k > steps.front()) throw InvalidArgument("k-logic: fallback exceeds first step");
}

int bin_of(const std::vector<double>& thresholds, double r) {
  auto it = std::upper_bound(thresholds.begin(), thresholds.end(), r);
  return static_cast<int>(it - thresholds.begin()) - 1;
}

int select_k(const KLogic& logic, double r) {
  const int i = bin_of(logic.thresholds, r);
  const int k = i < 0 ? logic.fallback_k : logic.steps[i];
  return std::min(k, logic.k_max);
}

std::string klogic_to_json(const KLogic& logic) {
  nlohmann::json j;
  j["alpha"] = logic.alpha;
  j["k_max"] = logic.k_max;
  j["thresholds"] = logic.thresholds;
  j["steps"] = logic.steps;
  j["fallback_k"] = logic.fallback_k;
  return j.dump(2);
}

KLogic klogic_from_json(const std::string& text) {
  KLogic l;
  try {
    const auto j = nlohmann::json::parse(text);
    l.alpha = j.at("alpha").get<double>();
    l.k_max = j.at("k_max").get<int>();
    l.thresholds = j.at("thresholds").get<std::vector<double>>();
    l.steps = j.at("steps").get<std::vector<int>>();
    l.fallback_k = j.at("fallback_k").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed k-logic JSON: ") + e.what());
  }
  l.validate();
  return l;
}

void save_klogic(const std::string& path, const KLogic& logic) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << klogic_to_json(logic) << "\n";
}

KLogic load_klogic(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read k-logic " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return klogic_from_json(ss.str());
}

std::vector<int> default_grid() { return {5, 10, 15, 20, 25, 30, 35, 40, 45}; }

namespace {

struct BinStats {
  std::map<int, double> sum;
  std::map<int, int> hits;
  int n = 0;
};

bool satisfies(const BinStats& b, int k, const CalibrationOptions& o) {
  if (b.n == 0) return false;
  auto s = b.sum.find(k);
  if (s == b.sum.end()) return false;
  const double mean = s->second / b.n;
  const double cover = static_cast<double>(b.hits.at(k)) / b.n;
  return mean >= o.alpha && cover >= o.coverage;
}

}  // namespace

KLogic calibrate_klogic(const std::vector<CalibrationRecord>& records, const CalibrationOptions& o) {
  if (records.empty()) throw InvalidArgument("calibrate_klogic: no calibration records");
  if (!(o.alpha > 0.0 && o.alpha <= 1.0)) throw InvalidArgument("calibrate_klogic: alpha outside (0,1]");
  if (o.bins < 1) throw InvalidArgument("calibrate_klogic: bins must be >= 1");
  for (const auto& r : records)
    for (int k : o.grid)
      if (!r.factors.count(k)) throw InvalidArgument("calibrate_klogic: record missing grid step " + std::to_string(k));

  std::vector<double> ratios;
  for (const auto& r : records) ratios.push_back(r.ratio);
  std::sort(ratios.begin(), ratios.end());
  const size_t n = ratios.size();

  // Decile cut-points taken from observed ratios; duplicates merge bins.
  KLogic logic;
  logic.alpha = o.alpha;
  logic.k_max = o.k_max;
  logic.fallback_k = 0;
  for (int i = 0; i < o.bins; ++i) {
    const double cut = ratios[(static_cast<size_t>(i) * n) / o.bins];
    if (logic.thresholds.empty() || cut > logic.thresholds.back()) logic.thresholds.push_back(cut);
  }
  const size_t nb = logic.thresholds.size();

  std::vector<BinStats> stats(nb);
  for (const auto& r : records) {
    const int b = bin_of(logic.thresholds, r.ratio);
    auto& s = stats[b];
    ++s.n;
    for (int k : o.grid) {
      const double f = r.factors.at(k);
      s.sum[k] += f;
      s.hits[k] += f >= o.alpha ? 1 : 0;
    }
  }

  std::vector<int> grid = o.grid;
  std::sort(grid.begin(), grid.end());
  std::vector<int> chosen(nb, 0);
  for (size_t b = 0; b < nb; ++b) {
    if (stats[b].n == 0) {
      chosen[b] = b == 0 ? logic.fallback_k : chosen[b - 1];
      continue;
    }
    for (int k : grid)
      if (satisfies(stats[b], k, o)) chosen[b] = k;
  }

  // Running minimum, clamp, then re-check each bin so the clamped step
  // still meets the constraint on its own samples.
  for (bool changed = true; changed;) {
    changed = false;
    for (size_t b = nb - 1; b-- > 0;) chosen[b] = std::min(chosen[b], chosen[b + 1]);
    for (size_t b = 0; b < nb; ++b) {
      int k = std::min(chosen[b], o.k_max);
      if (k > 0 && stats[b].n > 0 && !satisfies(stats[b], k, o)) {
        int best = 0;
        for (int g : grid)
          if (g <= k && satisfies(stats[b], g, o)) best = g;
        k = best;
      }
      if (k != chosen[b]) {
        chosen[b] = k;
        changed = true;
      }
    }
  }
  logic.steps = chosen;
  logic.validate();
  return logic;
}

std::string records_to_csv(const std::vector<CalibrationRecord>& records) {
  std::ostringstream out;
  out << "scene_id,frame,ratio,k,quality_factor\n";
  out << std::setprecision(17);
  for (const auto& r : records)
    for (const auto& [k, f] : r.factors) out << r.scene_id << ',' << r.frame << ',' << r.ratio << ',' << k << ',' << f << '\n';
  return out.str();
}

std::vector<CalibrationRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("scene_id,frame,ratio,k,quality_factor", 0) != 0)
    throw InvalidArgument("calibration CSV: missing header");
  std::vector<CalibrationRecord> out;
  std::map<std::pair<std::string, int>, size_t> index;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, frame, ratio, k, f;
    if (!std::getline(ls, id, ',') || !std::getline(ls, frame, ',') || !std::getline(ls, ratio, ',') ||
        !std::getline(ls, k, ',') || !std::getline(ls, f))
      throw InvalidArgument("calibration CSV: malformed row: " + line);
    const auto key = std::make_pair(id, std::stoi(frame));
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({id, key.second, std::stod(ratio), {}});
    }
    out[it->second].factors[std::stoi(k)] = std::stod(f);
  }
  return out;
}

}  // namespace selrefine::quality
