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

#include "selrefine/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <random>

namespace selrefine::cluster {

Embedding embed_frame(const ImageFrame& f) {
  Embedding e{};
  const int H = f.height, W = f.width;
  std::array<double, 16> cells{};
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int cell = (y * 4 / H) * 4 + (x * 4 / W);
      cells[cell] += 1.0;
      for (int c = 0; c < 3; ++c) e[cell * 3 + c] += f.at(y, x, c);
    }
  for (int cell = 0; cell < 16; ++cell)
    if (cells[cell] > 0.0)
      for (int c = 0; c < 3; ++c) e[cell * 3 + c] /= cells[cell];
  const auto lum = luminance(f);
  for (double v : lum) {
    const int b = std::clamp(static_cast<int>(v * 16.0), 0, 15);
    e[48 + b] += 1.0;
  }
  for (int b = 0; b < 16; ++b) e[48 + b] /= static_cast<double>(lum.size());
  return e;
}

Embedding embed_scene(const ImageFrame& i0, const ImageFrame& i1) {
  const Embedding a = embed_frame(i0), b = embed_frame(i1);
  Embedding e{};
  for (int i = 0; i < kEmbeddingDims; ++i) e[i] = 0.5 * (a[i] + b[i]);
  return e;
}

double squared_distance(const Embedding& a, const Embedding& b) {
  double s = 0.0;
  for (int i = 0; i < kEmbeddingDims; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

const quality::KLogic& ClusterModel::logic_for(int cluster) const {
  if (cluster < 0 || cluster >= static_cast<int>(logic_names.size()))
    throw ConfigError("no k-logic assigned to cluster " + std::to_string(cluster));
  auto it = logics.find(logic_names[cluster]);
  if (it == logics.end()) throw ConfigError("missing k-logic '" + logic_names[cluster] + "'");
  return it->second;
}

namespace {

int nearest(const std::vector<Embedding>& centroids, const Embedding& e) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < centroids.size(); ++j) {
    const double d = squared_distance(centroids[j], e);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

double objective(const std::vector<Embedding>& pts, const std::vector<Embedding>& c, const std::vector<int>& a) {
  double s = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) s += squared_distance(pts[i], c[a[i]]);
  return s;
}

}  // namespace

ClusterModel fit_clusters(const std::vector<Embedding>& points, int K, uint64_t seed, FitTrace* trace) {
  if (K < 1) throw InvalidArgument("fit_clusters: K must be >= 1");
  if (static_cast<int>(points.size()) < K) throw InvalidArgument("fit_clusters: fewer points than clusters");
  const size_t n = points.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // k-means++ seeding.
  std::vector<Embedding> c;
  c.push_back(points[std::min<size_t>(n - 1, static_cast<size_t>(unit(rng) * n))]);
  std::vector<double> d2(n);
  while (static_cast<int>(c.size()) < K) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      d2[i] = squared_distance(points[i], c[nearest(c, points[i])]);
      total += d2[i];
    }
    size_t pick = 0;
    if (total > 0.0) {
      const double r = unit(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > r && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    c.push_back(points[pick]);
  }

  std::vector<int> assign(n, 0);
  FitTrace local;
  for (int it = 0; it < 100; ++it) {
    for (size_t i = 0; i < n; ++i) assign[i] = nearest(c, points[i]);
    std::vector<Embedding> next(K, Embedding{});
    std::vector<int> count(K, 0);
    for (size_t i = 0; i < n; ++i) {
      ++count[assign[i]];
      for (int d = 0; d < kEmbeddingDims; ++d) next[assign[i]][d] += points[i][d];
    }
    for (int j = 0; j < K; ++j) {
      if (count[j] == 0) {
        // Re-seed from the point farthest from its current centroid.
        size_t far = 0;
        double fd = -1.0;
        for (size_t i = 0; i < n; ++i) {
          const double d = squared_distance(points[i], c[assign[i]]);
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        next[j] = points[far];
        assign[far] = j;
        continue;
      }
      for (int d = 0; d < kEmbeddingDims; ++d) next[j][d] /= count[j];
    }
    double move = 0.0;
    for (int j = 0; j < K; ++j) move = std::max(move, std::sqrt(squared_distance(c[j], next[j])));
    c = std::move(next);
    for (size_t i = 0; i < n; ++i) assign[i] = nearest(c, points[i]);
    local.objective.push_back(objective(points, c, assign));
    local.iterations = it + 1;
    if (move < 1e-6) break;
  }
  if (trace) *trace = local;

  ClusterModel m;
  m.centroids = std::move(c);
  return m;
}

int assign_cluster(const ClusterModel& model, const Embedding& e) {
  if (model.centroids.empty()) throw InvalidArgument("assign_cluster: model has no centroids");
  return nearest(model.centroids, e);
}

std::vector<int> assign_all(const ClusterModel& model, const std::vector<Embedding>& points) {
  std::vector<int> out;
  for (const auto& p : points) out.push_back(assign_cluster(model, p));
  return out;
}

std::string model_to_json(const ClusterModel& m) {
  nlohmann::json j;
  j["centroids"] = nlohmann::json::array();
  for (const auto& c : m.centroids) j["centroids"].push_back(std::vector<double>(c.begin(), c.end()));
  j["logic_names"] = m.logic_names;
  j["logics"] = nlohmann::json::object();
  for (const auto& [name, l] : m.logics) j["logics"][name] = nlohmann::json::parse(quality::klogic_to_json(l));
  return j.dump(2);
}

ClusterModel model_from_json(const std::string& text) {
  ClusterModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& c : j.at("centroids")) {
      const auto v = c.get<std::vector<double>>();
      if (v.size() != kEmbeddingDims) throw ConfigError("cluster centroid must have 64 entries");
      Embedding e{};
      std::copy(v.begin(), v.end(), e.begin());
      m.centroids.push_back(e);
    }
    m.logic_names = j.at("logic_names").get<std::vector<std::string>>();
    for (const auto& [name, l] : j.at("logics").items()) m.logics[name] = quality::klogic_from_json(l.dump());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed cluster model JSON: ") + e.what());
  }
  return m;
}

}  // namespace selrefine::cluster
