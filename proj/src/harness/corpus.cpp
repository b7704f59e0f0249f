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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numbers>
#include <random>
#include <sstream>

#include "selrefine/harness.hpp"

namespace selrefine::harness {

namespace fs = std::filesystem;

double hash_noise(uint32_t seed, int y, int x) {
  uint32_t h = (static_cast<uint32_t>(y) * 73856093u) ^ (static_cast<uint32_t>(x) * 19349663u) ^ (seed * 83492791u);
  h *= 2654435761u;
  h ^= h >> 13;
  h *= 1274126177u;
  h ^= h >> 16;
  return static_cast<double>(h & 0xffffu) / 65535.0;
}

ImageFrame SceneModel::render(double t) const {
  ImageFrame img(height, width);
  const int ox = static_cast<int>(std::lround(t * bg_x)), oy = static_cast<int>(std::lround(t * bg_y));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int gx = x - ox, gy = y - oy;
      const double g = (static_cast<double>(gx) / width * dir_x + static_cast<double>(gy) / height * dir_y) * 0.5 + 0.5;
      const double n = hash_noise(noise_seed, gy, gx) - 0.5;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = color_a[c] * (1.0 - g) + color_b[c] * g + texture * n;
    }
  for (const Shape& s : shapes) {
    const int cx = static_cast<int>(std::lround(s.px + t * s.vx)), cy = static_cast<int>(std::lround(s.py + t * s.vy));
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const int lx = x - cx, ly = y - cy;
        const bool inside = s.ellipse ? (lx / s.rx) * (lx / s.rx) + (ly / s.ry) * (ly / s.ry) <= 1.0
                                      : std::abs(lx) <= s.rx && std::abs(ly) <= s.ry;
        if (!inside) continue;
        const double n = hash_noise(s.noise_seed, ly, lx) - 0.5;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = s.color[c] + s.texture * n;
      }
  }
  for (double& v : img.rgb) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return img;
}

SceneModel make_scene_model(uint64_t seed, int height, int width) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), 0x7363656eu};
  std::mt19937_64 rng(seq);
  auto U = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  const double sx = width / 64.0, sy = height / 64.0, sr = std::min(sx, sy);
  constexpr double kTexture = 1.8;

  SceneModel m;
  m.height = height;
  m.width = width;
  m.noise_seed = static_cast<uint32_t>(seed ^ (seed >> 32));
  for (double& c : m.color_a) c = U(0.2, 0.8);
  for (double& c : m.color_b) c = U(0.2, 0.8);
  const double ang = U(0.0, 2.0 * std::numbers::pi);
  m.dir_x = std::cos(ang);
  m.dir_y = std::sin(ang);
  m.texture = U(0.6, 1.0) * kTexture;
  m.bg_x = U(-6.0, 6.0) * sx;
  m.bg_y = U(-2.0, 2.0) * sy;
  const int count = std::uniform_int_distribution<int>(2, 6)(rng);
  for (int i = 0; i < count; ++i) {
    Shape s;
    for (double& c : s.color) c = U(0.0, 1.0);
    s.px = U(8.0, 56.0) * sx;
    s.py = U(8.0, 56.0) * sy;
    s.rx = U(5.0, 14.0) * sr;
    s.ry = U(5.0, 14.0) * sr;
    s.vx = U(-14.0, 14.0) * sx;
    s.vy = U(-4.0, 4.0) * sy;
    s.ellipse = U(0.0, 1.0) < 0.5;
    s.texture = U(0.3, 1.0) * kTexture;
    s.noise_seed = static_cast<uint32_t>(std::uniform_int_distribution<uint32_t>(0, (1u << 30) - 1)(rng));
    m.shapes.push_back(s);
  }
  return m;
}

CorpusScene gen_scene(const std::string& id, uint64_t scene_seed, int dims, int frames) {
  if (dims < 8 || dims % kPatch) throw InvalidArgument("scene dims must be a positive multiple of 8");
  if (frames < 1) throw InvalidArgument("scene needs at least one target frame");
  const SceneModel m = make_scene_model(scene_seed, dims, dims);
  CorpusScene s;
  s.request.scene_id = id;
  s.request.seed = scene_seed;
  s.request.input0 = m.render(0.0);
  s.request.input1 = m.render(1.0);
  s.request.artifacts.disparity_x = m.bg_x;
  s.request.artifacts.disparity_y = m.bg_y;
  for (int i = 0; i < frames; ++i) {
    const double t = static_cast<double>(i + 1) / (frames + 1);
    s.request.targets.push_back(t);
    s.ground_truth.push_back(m.render(t));
  }
  return s;
}

std::vector<CorpusScene> gen_corpus(int count, int dims, uint64_t seed, int frames) {
  if (count < 1) throw InvalidArgument("gen_corpus: count must be >= 1");
  if (dims < 8 || dims % kPatch) throw InvalidArgument("gen_corpus: dims must be a positive multiple of 8");
  std::vector<CorpusScene> out;
  for (int i = 0; i < count; ++i) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(i)};
    uint32_t words[2];
    seq.generate(words, words + 2);
    const uint64_t scene_seed = (static_cast<uint64_t>(words[0]) << 32) | words[1];
    std::ostringstream id;
    id << "scene_" << std::setw(4) << std::setfill('0') << i;
    out.push_back(gen_scene(id.str(), scene_seed, dims, frames));
  }
  return out;
}

namespace {

std::string frame_name(const char* prefix, size_t i) {
  std::ostringstream s;
  s << prefix << std::setw(2) << std::setfill('0') << i << ".png";
  return s.str();
}

nlohmann::json artifacts_json(const regression::ArtifactParams& a) {
  return {{"disparity_x", a.disparity_x}, {"disparity_y", a.disparity_y}, {"count_min", a.count_min},
          {"count_max", a.count_max},     {"area_min", a.area_min},       {"area_max", a.area_max},
          {"blur_sigma_max", a.blur_sigma_max}};
}

regression::ArtifactParams artifacts_from(const nlohmann::json& j) {
  regression::ArtifactParams a;
  a.disparity_x = j.value("disparity_x", a.disparity_x);
  a.disparity_y = j.value("disparity_y", a.disparity_y);
  a.count_min = j.value("count_min", a.count_min);
  a.count_max = j.value("count_max", a.count_max);
  a.area_min = j.value("area_min", a.area_min);
  a.area_max = j.value("area_max", a.area_max);
  a.blur_sigma_max = j.value("blur_sigma_max", a.blur_sigma_max);
  return a;
}

}  // namespace

void save_scene(const std::string& dir, const CorpusScene& s) {
  fs::create_directories(dir);
  const auto& r = s.request;
  nlohmann::json j;
  j["scene_id"] = r.scene_id;
  j["seed"] = r.seed;
  j["targets"] = r.targets;
  j["alpha"] = r.alpha;
  j["mode"] = pipeline::mode_name(r.mode);
  j["artifacts"] = artifacts_json(r.artifacts);
  j["input0"] = "input0.png";
  j["input1"] = "input1.png";
  write_png((fs::path(dir) / "input0.png").string(), r.input0);
  write_png((fs::path(dir) / "input1.png").string(), r.input1);
  j["ground_truth"] = nlohmann::json::array();
  for (size_t i = 0; i < s.ground_truth.size(); ++i) {
    const std::string name = frame_name("gt_", i);
    write_png((fs::path(dir) / name).string(), s.ground_truth[i]);
    j["ground_truth"].push_back(name);
  }
  std::ofstream f(fs::path(dir) / "scene.json");
  f << j.dump(2) << "\n";
}

CorpusScene load_scene_file(const std::string& json_path) {
  std::ifstream f(json_path);
  if (!f) throw ConfigError("cannot read scene file " + json_path);
  const fs::path base = fs::path(json_path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  CorpusScene s;
  try {
    const auto j = nlohmann::json::parse(f);
    auto& r = s.request;
    r.scene_id = j.value("scene_id", fs::path(json_path).parent_path().filename().string());
    r.seed = j.value("seed", uint64_t{0});
    r.targets = j.at("targets").get<std::vector<double>>();
    r.alpha = j.value("alpha", r.alpha);
    r.mode = pipeline::parse_mode(j.value("mode", std::string("fine")));
    if (j.contains("artifacts")) r.artifacts = artifacts_from(j["artifacts"]);
    r.input0 = read_png(resolve(j.at("input0").get<std::string>()).string());
    r.input1 = read_png(resolve(j.at("input1").get<std::string>()).string());
    if (j.contains("ground_truth"))
      for (const auto& g : j["ground_truth"]) s.ground_truth.push_back(read_png(resolve(g.get<std::string>()).string()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed scene file " + json_path + ": " + e.what());
  }
  s.request.validate();
  return s;
}

void save_corpus(const std::string& dir, const std::vector<CorpusScene>& corpus) {
  fs::create_directories(dir);
  nlohmann::json index;
  index["scenes"] = nlohmann::json::array();
  for (const auto& s : corpus) {
    save_scene((fs::path(dir) / s.request.scene_id).string(), s);
    index["scenes"].push_back(s.request.scene_id + "/scene.json");
  }
  std::ofstream f(fs::path(dir) / "corpus.json");
  f << index.dump(2) << "\n";
}

std::vector<CorpusScene> load_corpus(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "corpus.json");
  if (!f) throw ConfigError("no corpus.json in " + dir);
  std::vector<CorpusScene> out;
  try {
    const auto j = nlohmann::json::parse(f);
    for (const auto& p : j.at("scenes")) out.push_back(load_scene_file((fs::path(dir) / p.get<std::string>()).string()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed corpus.json: ") + e.what());
  }
  if (out.empty()) throw ConfigError("corpus " + dir + " has no scenes");
  return out;
}

}  // namespace selrefine::harness
