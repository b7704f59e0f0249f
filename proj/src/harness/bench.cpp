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
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "selrefine/harness.hpp"

namespace selrefine::harness {

namespace fs = std::filesystem;

std::string BenchConfig::label() const {
  switch (kind) {
    case RunKind::Diffusion:
      return "diffusion";
    case RunKind::Regression:
      return "regression";
    case RunKind::Refine:
      break;
  }
  return pipeline::mode_name(mode);
}

double nearest_rank(std::vector<double> values, double pct) {
  if (values.empty()) throw InvalidArgument("nearest_rank: no values");
  if (!(pct > 0.0 && pct <= 100.0)) throw InvalidArgument("nearest_rank: percentile outside (0,100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size())));
  return values[std::max<size_t>(rank, 1) - 1];
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<BenchRow> bench_scene(const CorpusScene& scene, const std::vector<BenchConfig>& configs,
                                  const BenchOptions& opts) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [&](clock::time_point t0) {
    return opts.timing ? std::chrono::duration<double, std::milli>(clock::now() - t0).count() : 0.0;
  };
  const auto& cfg = opts.run;
  auto t0 = clock::now();
  pipeline::PreparedScene prep = pipeline::prepare_scene(scene.request, cfg);
  const double prep_ms = ms_since(t0);
  t0 = clock::now();
  const auto full = pipeline::run_full_diffusion(scene.request, cfg, prep);
  const double full_ms = prep_ms + ms_since(t0);
  const auto q_full = pipeline::score_frames(full.frames);
  const auto n = static_cast<double>(q_full.size());

  std::vector<BenchRow> rows;
  for (const auto& c : configs) {
    BenchRow row;
    row.scene_id = scene.request.scene_id;
    row.mode = c.label();
    row.alpha = c.kind == RunKind::Refine ? c.alpha : 1.0;
    if (c.kind == RunKind::Diffusion) {
      row.quality_factor = 1.0;
      row.unit_speedup = 1.0;
      row.wall_ms = full_ms;
      row.units = full.cost.executed;
      row.ks = full.ks;
    } else if (c.kind == RunKind::Regression) {
      double s = 0.0;
      for (size_t i = 0; i < q_full.size(); ++i) s += prep.q_reg[i] / q_full[i];
      row.quality_factor = s / n;
      row.unit_speedup = std::numeric_limits<double>::infinity();
      row.wall_ms = prep_ms;
      row.units = 0;
      row.ks.assign(q_full.size(), cfg.S);
    } else {
      auto it = opts.models.find(c.alpha);
      if (it == opts.models.end()) throw ConfigError("no calibrated k-logic for alpha " + std::to_string(c.alpha));
      t0 = clock::now();
      pipeline::SceneRequest req = scene.request;
      req.alpha = c.alpha;
      req.mode = c.mode;
      const auto res = pipeline::run_scene(req, cfg, it->second);
      row.wall_ms = ms_since(t0);
      const auto q = pipeline::score_frames(res.frames);
      double s = 0.0;
      for (size_t i = 0; i < q.size(); ++i) s += q[i] / q_full[i];
      row.quality_factor = s / n;
      row.unit_speedup = res.cost.speedup;
      row.units = res.cost.executed;
      row.ks = res.ks;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

BenchmarkReport run_benchmark(const std::vector<CorpusScene>& corpus, const std::vector<BenchConfig>& configs,
                              const BenchOptions& opts) {
  if (corpus.empty()) throw InvalidArgument("run_benchmark: empty corpus");
  if (configs.empty()) throw InvalidArgument("run_benchmark: no configs");
  std::vector<double> missing;
  for (const auto& c : configs)
    if (c.kind == RunKind::Refine && !opts.models.count(c.alpha) &&
        std::find(missing.begin(), missing.end(), c.alpha) == missing.end())
      missing.push_back(c.alpha);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "missing calibration for alpha:";
    for (double a : missing) msg << " " << a;
    throw ConfigError(msg.str());
  }
  opts.run.validate();

  // Workers pull scene indices; results land in per-scene slots so the
  // report does not depend on completion order.
  std::vector<std::vector<BenchRow>> per_scene(corpus.size());
  std::vector<std::exception_ptr> errors(corpus.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < corpus.size(); i = next++) {
      try {
        per_scene[i] = bench_scene(corpus[i], configs, opts);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = opts.threads > 0 ? static_cast<unsigned>(opts.threads) : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(corpus.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  BenchmarkReport r;
  // Rows ordered by config, then scene.
  for (size_t c = 0; c < configs.size(); ++c)
    for (const auto& rows : per_scene) r.rows.push_back(rows[c]);
  r.aggregates = aggregate_rows(r.rows, opts.run.S);
  return r;
}

std::vector<Aggregate> aggregate_rows(const std::vector<BenchRow>& rows, int total_steps) {
  std::vector<Aggregate> out;
  std::vector<std::vector<const BenchRow*>> groups;
  for (const auto& row : rows) {
    size_t g = 0;
    while (g < out.size() && !(out[g].mode == row.mode && out[g].alpha == row.alpha)) ++g;
    if (g == out.size()) {
      Aggregate a;
      a.mode = row.mode;
      a.alpha = row.alpha;
      out.push_back(a);
      groups.emplace_back();
    }
    groups[g].push_back(&row);
  }
  for (size_t g = 0; g < out.size(); ++g) {
    Aggregate& a = out[g];
    std::vector<double> q, sp, units, wall;
    for (const BenchRow* row : groups[g]) {
      q.push_back(row->quality_factor);
      sp.push_back(row->unit_speedup);
      units.push_back(static_cast<double>(row->units));
      wall.push_back(row->wall_ms);
      if (a.step_hist.size() < row->ks.size()) a.step_hist.resize(row->ks.size());
      for (size_t i = 0; i < row->ks.size(); ++i) ++a.step_hist[i][total_steps - row->ks[i]];
    }
    a.scenes = static_cast<int>(groups[g].size());
    a.mean_quality = mean_of(q);
    a.mean_speedup = mean_of(sp);
    a.mean_units = mean_of(units);
    a.p95_units = nearest_rank(units, 95.0);
    a.mean_wall_ms = mean_of(wall);
    a.p95_wall_ms = nearest_rank(wall, 95.0);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

nlohmann::json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

}  // namespace

std::string report_csv(const BenchmarkReport& r) {
  std::ostringstream out;
  out << "scene_id,mode,alpha,quality_factor,unit_speedup,wall_ms,k_csv\n";
  for (const auto& row : r.rows) {
    std::string ks;
    for (size_t i = 0; i < row.ks.size(); ++i) ks += (i ? ";" : "") + std::to_string(row.ks[i]);
    out << row.scene_id << "," << row.mode << "," << fmt(row.alpha) << "," << fmt(row.quality_factor) << ","
        << fmt(row.unit_speedup) << "," << fmt(row.wall_ms) << "," << ks << "\n";
  }
  return out.str();
}

std::vector<BenchRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "scene_id,mode,alpha,quality_factor,unit_speedup,wall_ms,k_csv")
    throw ConfigError("benchmark CSV header mismatch");
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw ConfigError("benchmark CSV row has " + std::to_string(f.size()) + " fields");
    BenchRow row;
    row.scene_id = f[0];
    row.mode = f[1];
    row.alpha = parse_double(f[2]);
    row.quality_factor = parse_double(f[3]);
    row.unit_speedup = parse_double(f[4]);
    row.wall_ms = parse_double(f[5]);
    std::stringstream ks(f[6]);
    while (std::getline(ks, cell, ';'))
      if (!cell.empty()) row.ks.push_back(std::stoi(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string report_json(const BenchmarkReport& r) {
  nlohmann::json j;
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : r.aggregates) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : a.step_hist) {
      nlohmann::json frame = nlohmann::json::object();
      for (const auto& [steps, count] : h) frame[std::to_string(steps)] = count;
      hist.push_back(frame);
    }
    j["aggregates"].push_back({{"mode", a.mode},
                               {"alpha", a.alpha},
                               {"scenes", a.scenes},
                               {"mean_quality_factor", a.mean_quality},
                               {"mean_unit_speedup", finite_or_string(a.mean_speedup)},
                               {"mean_units", a.mean_units},
                               {"p95_units", a.p95_units},
                               {"mean_wall_ms", a.mean_wall_ms},
                               {"p95_wall_ms", a.p95_wall_ms},
                               {"step_histogram", hist}});
  }
  // Rows repeat the CSV plus unit counts so every aggregate can be recomputed.
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back({{"scene_id", row.scene_id},
                         {"mode", row.mode},
                         {"alpha", row.alpha},
                         {"quality_factor", row.quality_factor},
                         {"unit_speedup", finite_or_string(row.unit_speedup)},
                         {"wall_ms", row.wall_ms},
                         {"units", row.units},
                         {"ks", row.ks}});
  return j.dump(2);
}

BenchFile bench_file_from_json(const std::string& text) {
  BenchFile f;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& run : j.at("runs")) {
      BenchConfig c;
      const std::string mode = run.at("mode").get<std::string>();
      if (mode == "diffusion") {
        c.kind = RunKind::Diffusion;
      } else if (mode == "regression") {
        c.kind = RunKind::Regression;
      } else {
        c.kind = RunKind::Refine;
        c.mode = pipeline::parse_mode(mode);
        c.alpha = run.at("alpha").get<double>();
      }
      f.configs.push_back(c);
    }
    if (j.contains("klogic"))
      for (const auto& [k, v] : j["klogic"].items()) f.klogic_paths[std::stod(k)] = v.get<std::string>();
    if (j.contains("run")) f.run = pipeline::config_from_json(j["run"].dump());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed bench config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed bench config: ") + e.what());
  }
  return f;
}

std::map<double, pipeline::Models> load_bench_models(const BenchFile& f, const std::string& base_dir) {
  std::vector<double> missing;
  for (const auto& c : f.configs)
    if (c.kind == RunKind::Refine && !f.klogic_paths.count(c.alpha) &&
        std::find(missing.begin(), missing.end(), c.alpha) == missing.end())
      missing.push_back(c.alpha);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "missing calibration for alpha:";
    for (double a : missing) msg << " " << a;
    throw ConfigError(msg.str());
  }
  std::map<double, pipeline::Models> out;
  for (const auto& [alpha, path] : f.klogic_paths) {
    const fs::path p = fs::path(path).is_absolute() ? fs::path(path) : fs::path(base_dir) / path;
    out[alpha] = pipeline::load_models(p.string());
  }
  return out;
}

}  // namespace selrefine::harness
