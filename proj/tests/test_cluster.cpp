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
#include <random>

#include "selrefine/cluster.hpp"
#include "support.hpp"

using namespace selrefine;
using namespace selrefine::cluster;

namespace {

std::vector<Embedding> blobs(int per, uint64_t seed, std::vector<int>* label) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.01);
  std::vector<Embedding> pts;
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < per; ++i) {
      Embedding e{};
      for (int d = 0; d < kEmbeddingDims; ++d) e[d] = n(rng);
      e[b * 5] += 10.0;
      pts.push_back(e);
      if (label) label->push_back(b);
    }
  return pts;
}

Embedding constant(double v) {
  Embedding e;
  e.fill(v);
  return e;
}

}  // namespace

TEST_CASE("identical inputs embed like a single frame") {
  const auto f = testsupport::random_frame(16, 24, 2);
  CHECK(embed_scene(f, f) == embed_frame(f));
}

TEST_CASE("black inputs embed to zeros with all histogram mass in bin zero") {
  const ImageFrame b(16, 16, 0.0);
  const auto e = embed_scene(b, b);
  for (int i = 0; i < 48; ++i) CHECK(e[i] == 0.0);
  CHECK(e[48] == 1.0);
  for (int i = 49; i < 64; ++i) CHECK(e[i] == 0.0);
}

TEST_CASE("embedding is symmetric in its inputs and has a unit histogram") {
  const auto a = testsupport::random_frame(16, 16, 3), b = testsupport::random_frame(16, 16, 4);
  CHECK(embed_scene(a, b) == embed_scene(b, a));
  const auto e = embed_frame(a);
  double h = 0.0;
  for (int i = 48; i < 64; ++i) h += e[i];
  CHECK(h == doctest::Approx(1.0).epsilon(1e-12));
  // Grid cell means against a direct evaluation of the top-left cell.
  double r = 0.0;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) r += a.at(y, x, 0);
  CHECK(e[0] == doctest::Approx(r / 16.0).epsilon(1e-12));
}

TEST_CASE("single cluster is the mean") {
  const auto pts = blobs(5, 1, nullptr);
  const auto m = fit_clusters(pts, 1, 9);
  REQUIRE(m.k() == 1);
  for (int d = 0; d < kEmbeddingDims; ++d) {
    double s = 0.0;
    for (const auto& p : pts) s += p[d];
    CHECK(m.centroids[0][d] == doctest::Approx(s / pts.size()).epsilon(1e-12));
  }
}

TEST_CASE("three separated blobs are recovered exactly") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<int> label;
    const auto pts = blobs(12, seed, &label);
    const auto m = fit_clusters(pts, 3, seed);
    const auto a = assign_all(m, pts);
    // Same partition up to relabelling.
    for (size_t i = 0; i < pts.size(); ++i)
      for (size_t j = 0; j < pts.size(); ++j) CHECK((a[i] == a[j]) == (label[i] == label[j]));
  }
}

TEST_CASE("objective never increases across iterations") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Embedding> pts(60);
    for (auto& p : pts)
      for (double& v : p) v = u(rng);
    FitTrace t;
    fit_clusters(pts, 3 + trial % 3, trial, &t);
    REQUIRE(t.iterations >= 1);
    CHECK(t.objective.size() == static_cast<size_t>(t.iterations));
    for (size_t i = 1; i < t.objective.size(); ++i) CHECK(t.objective[i] <= t.objective[i - 1] + 1e-12);
  }
}

TEST_CASE("fit is deterministic under a seed") {
  const auto pts = blobs(8, 4, nullptr);
  const auto a = fit_clusters(pts, 3, 5), b = fit_clusters(pts, 3, 5);
  CHECK(a.centroids == b.centroids);
}

TEST_CASE("assignment examples and tie rule") {
  ClusterModel m;
  m.centroids = {constant(0.0), constant(1.0), constant(2.0)};
  CHECK(assign_cluster(m, constant(1.0)) == 1);
  CHECK(assign_cluster(m, constant(2.0)) == 2);
  // Equidistant from 0 and 2 when the middle centroid is moved away.
  m.centroids[1] = constant(50.0);
  CHECK(assign_cluster(m, constant(1.0)) == 0);
  CHECK_THROWS_AS(assign_cluster(ClusterModel{}, constant(0.0)), InvalidArgument);
}

TEST_CASE("assignment is translation invariant") {
  std::vector<int> label;
  const auto pts = blobs(6, 2, &label);
  auto m = fit_clusters(pts, 3, 2);
  const auto before = assign_all(m, pts);
  auto shifted = m;
  for (auto& c : shifted.centroids)
    for (double& v : c) v += 0.375;
  auto moved = pts;
  for (auto& p : moved)
    for (double& v : p) v += 0.375;
  CHECK(assign_all(shifted, moved) == before);
}

TEST_CASE("fewer points than clusters") {
  CHECK_THROWS_AS(fit_clusters({constant(0.0), constant(1.0)}, 3, 0), InvalidArgument);
  CHECK_THROWS_AS(fit_clusters({constant(0.0)}, 0, 0), InvalidArgument);
}

TEST_CASE("duplicate points still yield K centroids") {
  std::vector<Embedding> pts(6, constant(0.5));
  pts.push_back(constant(0.9));
  const auto m = fit_clusters(pts, 2, 1);
  CHECK(m.k() == 2);
}

TEST_CASE("model json round trip and missing logic") {
  auto m = fit_clusters(blobs(4, 7, nullptr), 3, 7);
  quality::KLogic l;
  l.alpha = 0.9;
  l.thresholds = {0.8, 0.9};
  l.steps = {10, 30};
  m.logic_names = {"a", "b", "a"};
  m.logics["a"] = l;
  CHECK_THROWS_AS(m.logic_for(1), ConfigError);
  CHECK_THROWS_AS(m.logic_for(3), ConfigError);
  m.logics["b"] = l;
  const auto back = model_from_json(model_to_json(m));
  CHECK(back.centroids == m.centroids);
  CHECK(back.logic_names == m.logic_names);
  CHECK(back.logic_for(2) == l);
  CHECK_THROWS_AS(model_from_json("{\"centroids\": [[1, 2]], \"logic_names\": [], \"logics\": {}}"), ConfigError);
  CHECK_THROWS_AS(model_from_json("[]"), ConfigError);
}
