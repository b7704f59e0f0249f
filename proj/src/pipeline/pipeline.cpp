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

#include "selrefine/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "selrefine/kernels.hpp"

namespace selrefine::pipeline {

Mode parse_mode(const std::string& s) {
  if (s == "coarse") return Mode::Coarse;
  if (s == "fine") return Mode::Fine;
  if (s == "selective") return Mode::Selective;
  throw ConfigError("unknown mode: " + s);
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Coarse:
      return "coarse";
    case Mode::Fine:
      return "fine";
    case Mode::Selective:
      return "selective";
  }
  return "fine";
}

void SceneRequest::validate() const {
  input0.validate();
  input1.validate();
  if (input0.height != input1.height || input0.width != input1.width)
    throw InvalidArgument("scene " + scene_id + ": input views differ in size");
  if (targets.empty()) throw InvalidArgument("scene " + scene_id + ": no target positions");
  for (size_t i = 0; i < targets.size(); ++i) {
    if (!(targets[i] > 0.0 && targets[i] < 1.0)) throw InvalidArgument("scene " + scene_id + ": target outside (0,1)");
    if (i > 0 && !(targets[i] > targets[i - 1])) throw InvalidArgument("scene " + scene_id + ": targets not sorted");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("scene " + scene_id + ": alpha outside (0,1]");
}

void RunConfig::validate() const {
  if (S < 2) throw ConfigError("S must be >= 2");
  if (T < 1 || T > S) throw ConfigError("T must lie in [1, S]");
  for (int k : grid)
    if (k < 1 || k > S - 1) throw ConfigError("grid step outside [1, S-1]");
  if (block_size < 1 || halo < 0) throw ConfigError("invalid block size or halo");
  if (!(tau_o >= 0.0 && tau_o <= 1.0)) throw ConfigError("tau_o outside [0,1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma outside (0,1]");
  if (blur_window < 3 || blur_window % 2 == 0) throw ConfigError("blur window must be odd and >= 3");
}

std::string config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["S"] = c.S;
  j["T"] = c.T;
  j["tau_o"] = c.tau_o;
  j["gamma"] = c.gamma;
  j["grid"] = c.grid;
  j["block_size"] = c.block_size;
  j["halo"] = c.halo;
  j["denoiser"] = c.denoiser;
  j["regressor"] = c.regressor;
  j["blur_detection"] = c.blur_detection;
  j["blur_window"] = c.blur_window;
  j["schedule"] = c.schedule == ScheduleKind::Cosine ? "cosine" : "linear";
  j["smoothing"] = {{"sigma_gray", c.smoothing.sigma_gray},     {"sigma_chroma", c.smoothing.sigma_chroma},
                    {"feature_gain", c.smoothing.feature_gain}, {"self_weight", c.smoothing.self_weight},
                    {"detail_keep", c.smoothing.detail_keep},   {"kernel_seed", c.smoothing.kernel_seed}};
  return j.dump(2);
}

RunConfig config_from_json(const std::string& text) {
  RunConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.S = j.value("S", c.S);
    c.T = j.value("T", c.T);
    c.tau_o = j.value("tau_o", c.tau_o);
    c.gamma = j.value("gamma", c.gamma);
    c.grid = j.value("grid", c.grid);
    c.block_size = j.value("block_size", c.block_size);
    c.halo = j.value("halo", c.halo);
    c.denoiser = j.value("denoiser", c.denoiser);
    c.regressor = j.value("regressor", c.regressor);
    c.blur_detection = j.value("blur_detection", c.blur_detection);
    c.blur_window = j.value("blur_window", c.blur_window);
    c.schedule = parse_schedule_kind(j.value("schedule", std::string("cosine")));
    if (j.contains("smoothing")) {
      const auto& s = j["smoothing"];
      c.smoothing.sigma_gray = s.value("sigma_gray", c.smoothing.sigma_gray);
      c.smoothing.sigma_chroma = s.value("sigma_chroma", c.smoothing.sigma_chroma);
      c.smoothing.feature_gain = s.value("feature_gain", c.smoothing.feature_gain);
      c.smoothing.self_weight = s.value("self_weight", c.smoothing.self_weight);
      c.smoothing.detail_keep = s.value("detail_keep", c.smoothing.detail_keep);
      c.smoothing.kernel_seed = s.value("kernel_seed", c.smoothing.kernel_seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

std::string trace_to_jsonl(const Trace& t) {
  std::ostringstream out;
  for (const auto& e : t.events) {
    nlohmann::json j;
    j["step"] = e.step;
    j["kind"] = e.full ? "full" : "partial";
    j["mode"] = mode_name(t.mode);
    j["active_frames"] = e.active_frames;
    j["active_blocks"] = e.active_blocks;
    j["units"] = e.units;
    out << j.dump() << "\n";
  }
  return out.str();
}

CostReport account_cost(const Trace& t) {
  if (t.frames <= 0 || t.total_steps <= 0 || t.blocks_per_frame <= 0)
    throw InvalidArgument("account_cost: trace header incomplete");
  int expect = t.k_min;
  CostReport r;
  for (const auto& e : t.events) {
    if (e.step != expect) throw InvalidArgument("account_cost: trace skips or repeats a step");
    ++expect;
    r.executed += e.units;
  }
  if (expect != t.total_steps) throw InvalidArgument("account_cost: trace ends before the final step");
  r.baseline = static_cast<long long>(t.frames) * t.total_steps * t.blocks_per_frame;
  r.speedup = r.executed > 0 ? static_cast<double>(r.baseline) / static_cast<double>(r.executed) : 1.0;
  return r;
}

Models Models::single(const quality::KLogic& logic) {
  Models m;
  m.clusters.centroids.push_back(cluster::Embedding{});
  m.clusters.logic_names.push_back("global");
  m.clusters.logics["global"] = logic;
  return m;
}

Models load_models(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read k-logic file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed k-logic file: ") + e.what());
  }
  if (j.contains("clusters")) {
    Models m;
    m.clusters = cluster::model_from_json(j["clusters"].dump());
    for (int c = 0; c < m.clusters.k(); ++c) (void)m.clusters.logic_for(c);
    return m;
  }
  if (j.contains("centroids")) {
    Models m;
    m.clusters = cluster::model_from_json(ss.str());
    return m;
  }
  return Models::single(quality::klogic_from_json(ss.str()));
}

void save_models(const std::string& path, const Models& m) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  nlohmann::json j;
  j["clusters"] = nlohmann::json::parse(cluster::model_to_json(m.clusters));
  f << j.dump(2) << "\n";
}

namespace {

std::vector<int> frames_where(const std::vector<uint8_t>& flags, bool value) {
  std::vector<int> out;
  for (size_t i = 0; i < flags.size(); ++i)
    if ((flags[i] != 0) == value) out.push_back(static_cast<int>(i));
  return out;
}

// Unmasked latent pixels of frame f take z0 noised to u_next.
void resample_unmasked(const LatentTensor& z0, int u_next, int f, const BinaryGrid& mask, uint64_t seed,
                       const NoiseSchedule& s, LatentTensor& z) {
  if (mask.count() == mask.v.size()) return;
  std::vector<double> eps(z.frame_size());
  diffusion::fill_noise(seed, f, u_next, eps.data(), eps.size());
  const double a = std::sqrt(s.abar[u_next]), b = std::sqrt(1.0 - s.abar[u_next]);
  const int C = z.channels;
  for (int y = 0; y < z.lat_h; ++y)
    for (int x = 0; x < z.lat_w; ++x) {
      if (mask.at(y, x)) continue;
      double* o = z.pixel(f, y, x);
      const size_t off = (static_cast<size_t>(y) * z.lat_w + x) * C;
      std::copy(eps.data() + off, eps.data() + off + C, o);
      kernels::axpby(static_cast<size_t>(C), a, z0.pixel(f, y, x), b, o);
    }
}

}  // namespace

DenoiseResult denoise(const LatentTensor& z0, const std::vector<int>& ks, Mode mode, const diffusion::StepMasks* masks,
                      const diffusion::DenoiserBackend& backend, const NoiseSchedule& s, int T, uint64_t seed) {
  const int N = z0.frames, S = s.total_steps;
  if (static_cast<int>(ks.size()) != N) throw InvalidArgument("denoise: one step index per frame required");
  for (int k : ks)
    if (k < 0 || k >= S) throw InvalidArgument("denoise: step index outside [0, S)");
  if (T < 1) throw InvalidArgument("denoise: T must be >= 1");
  const bool selective = mode == Mode::Selective && masks && !masks->frames.empty();
  if (selective && static_cast<int>(masks->frames.size()) != N) throw InvalidArgument("denoise: mask count mismatch");

  const int bs = masks ? masks->block_size : 4;
  const int bpf = ((z0.lat_h + bs - 1) / bs) * ((z0.lat_w + bs - 1) / bs);
  const int kmin = *std::min_element(ks.begin(), ks.end());
  const int period = mode == Mode::Coarse ? 1 : T;

  DenoiseResult r;
  r.trace.mode = mode;
  r.trace.frames = N;
  r.trace.total_steps = S;
  r.trace.blocks_per_frame = bpf;
  r.trace.k_min = kmin;
  r.z = diffusion::add_noise(z0, kmin, diffusion::noise_like(z0, seed, kmin), s);

  diffusion::LatentCache cache;
  int last_full = -1;
  std::vector<uint8_t> active(N);
  for (int u = kmin; u < S; ++u) {
    for (int i = 0; i < N; ++i) active[i] = ks[i] <= u ? 1 : 0;
    TraceEvent ev;
    ev.step = u;
    ev.active_frames = frames_where(active, true);
    const bool full = u % period == 0 || u == kmin;
    if (full) {
      auto step = diffusion::ddim_full_step(r.z, u, backend, s);
      r.z = std::move(step.z);
      cache = std::move(step.cache);
      last_full = u;
      ev.full = true;
      ev.active_blocks = N * bpf;
      ev.units = static_cast<long long>(N) * bpf;
      if (selective)
        for (int f : ev.active_frames) resample_unmasked(z0, u + 1, f, masks->frames[f].latent, seed, s, r.z);
    } else {
      r.z = diffusion::ddim_partial_step(r.z, u, active, selective ? masks : nullptr, cache, last_full, backend, s, z0,
                                         seed);
      if (selective) {
        for (int f : ev.active_frames) ev.active_blocks += static_cast<int>(masks->frames[f].blocks.size());
      } else {
        ev.active_blocks = static_cast<int>(ev.active_frames.size()) * bpf;
      }
      ev.units = ev.active_blocks;
    }
    diffusion::resample_inactive(z0, u + 1, frames_where(active, false), seed, s, r.z);
    r.trace.events.push_back(std::move(ev));
  }
  return r;
}

PreparedScene prepare_scene(const SceneRequest& req, const RunConfig& cfg) {
  req.validate();
  cfg.validate();
  if (cfg.regressor != "toy") throw ConfigError("unknown regression backend: " + cfg.regressor);
  PreparedScene p;
  p.schedule = build_schedule(cfg.S, cfg.schedule);
  p.regression = regression::toy_regress(req.input0, req.input1, req.targets, req.artifacts, req.seed);
  p.q0 = quality::score_image(req.input0);
  p.q1 = quality::score_image(req.input1);
  for (size_t i = 0; i < req.targets.size(); ++i) {
    const double qr = quality::score_image(p.regression.frames[i]);
    const double qs = quality::interpolate_reference(p.q0, p.q1, req.targets[i], cfg.gamma);
    p.q_reg.push_back(qr);
    p.q_star.push_back(qs);
    p.ratios.push_back(quality::quality_ratio(qr, qs));
  }
  p.z0 = encode(p.regression.frames);
  const LatentTensor clean = req.oracle_clean ? encode(*req.oracle_clean) : p.z0;
  p.backend = diffusion::make_backend(cfg.denoiser, req.input0, req.input1, req.targets, req.artifacts.disparity_x,
                                      req.artifacts.disparity_y, clean, cfg.smoothing);
  return p;
}

std::vector<double> score_frames(const std::vector<ImageFrame>& frames) {
  std::vector<double> q;
  for (const auto& f : frames) q.push_back(quality::score_image(f));
  return q;
}

SceneResult run_with_steps(const SceneRequest& req, const RunConfig& cfg, PreparedScene& prep,
                           const std::vector<int>& ks, Mode mode) {
  const auto t0 = std::chrono::steady_clock::now();
  SceneResult res;
  res.ks = ks;
  res.ratios = prep.ratios;
  res.regression = prep.regression.frames;
  diffusion::StepMasks step_masks;
  step_masks.block_size = cfg.block_size;
  step_masks.halo = cfg.halo;
  if (mode == Mode::Selective) {
    masks::MaskParams mp;
    mp.tau_o = cfg.tau_o;
    mp.blur_window = cfg.blur_window;
    mp.blur_detection = cfg.blur_detection;
    std::vector<BinaryGrid> latent;
    for (const auto& f : prep.regression.frames) {
      res.masks.push_back(masks::make_refinement_mask(masks::frame_mask(f, mp)));
      latent.push_back(res.masks.back().level_for(kPatch));
    }
    step_masks = diffusion::make_step_masks(latent, cfg.block_size, cfg.halo);
  }
  auto out = denoise(prep.z0, ks, mode, &step_masks, *prep.backend, prep.schedule, cfg.T, req.seed);
  res.latent = std::move(out.z);
  res.trace = std::move(out.trace);
  res.frames = decode(res.latent);
  for (auto& f : res.frames) f = clamp01(f);
  res.cost = account_cost(res.trace);
  res.cost.ks = ks;
  res.cost.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

SceneResult run_full_diffusion(const SceneRequest& req, const RunConfig& cfg, PreparedScene& prep) {
  return run_with_steps(req, cfg, prep, std::vector<int>(req.targets.size(), 0), Mode::Coarse);
}

namespace {

SceneResult run_scene_impl(const SceneRequest& req, const RunConfig& cfg, const Models& models) {
  const auto t0 = std::chrono::steady_clock::now();
  PreparedScene prep = prepare_scene(req, cfg);
  const int c = cluster::assign_cluster(models.clusters, cluster::embed_scene(req.input0, req.input1));
  const quality::KLogic& logic = models.clusters.logic_for(c);
  std::vector<int> ks;
  for (double r : prep.ratios) ks.push_back(quality::select_k(logic, r));
  if (req.mode == Mode::Coarse) {
    const int kmin = *std::min_element(ks.begin(), ks.end());
    std::fill(ks.begin(), ks.end(), kmin);
  }
  SceneResult res = run_with_steps(req, cfg, prep, ks, req.mode);
  res.cluster = c;
  res.cost.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace

// Same exception types, message prefixed with the scene id.
SceneResult run_scene(const SceneRequest& req, const RunConfig& cfg, const Models& models) {
  const std::string ctx = "scene " + req.scene_id + ": ";
  try {
    return run_scene_impl(req, cfg, models);
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + e.what());
  } catch (const StaleCacheError& e) {
    throw StaleCacheError(ctx + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(ctx + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(ctx + e.what());
  }
}

std::vector<quality::CalibrationRecord> calibration_records(const SceneRequest& req, const RunConfig& cfg) {
  PreparedScene prep = prepare_scene(req, cfg);
  const auto q_full = score_frames(run_full_diffusion(req, cfg, prep).frames);
  std::vector<quality::CalibrationRecord> recs(req.targets.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    recs[i].scene_id = req.scene_id;
    recs[i].frame = static_cast<int>(i);
    recs[i].ratio = prep.ratios[i];
  }
  for (int k : cfg.grid) {
    const auto q = score_frames(run_with_steps(req, cfg, prep, std::vector<int>(req.targets.size(), k), Mode::Fine).frames);
    for (size_t i = 0; i < recs.size(); ++i) recs[i].factors[k] = q[i] / q_full[i];
  }
  return recs;
}

CalibrationResult calibrate_from_records(const std::vector<SceneRequest>& scenes,
                                         const std::vector<quality::CalibrationRecord>& records,
                                         const quality::CalibrationOptions& opts, int clusters, uint64_t seed) {
  if (scenes.empty()) throw InvalidArgument("calibrate: empty scene set");
  CalibrationResult out;
  out.records = records;
  out.global = quality::calibrate_klogic(records, opts);
  if (clusters <= 1 || static_cast<int>(scenes.size()) < clusters) {
    out.models = Models::single(out.global);
    out.scene_cluster.assign(scenes.size(), 0);
    return out;
  }
  std::vector<cluster::Embedding> emb;
  for (const auto& s : scenes) emb.push_back(cluster::embed_scene(s.input0, s.input1));
  out.models.clusters = cluster::fit_clusters(emb, clusters, seed);
  out.scene_cluster = cluster::assign_all(out.models.clusters, emb);
  std::map<std::string, int> scene_to_cluster;
  for (size_t i = 0; i < scenes.size(); ++i) scene_to_cluster[scenes[i].scene_id] = out.scene_cluster[i];
  for (int c = 0; c < clusters; ++c) {
    std::vector<quality::CalibrationRecord> subset;
    for (const auto& r : records) {
      auto it = scene_to_cluster.find(r.scene_id);
      if (it != scene_to_cluster.end() && it->second == c) subset.push_back(r);
    }
    const std::string name = "cluster" + std::to_string(c);
    out.models.clusters.logic_names.push_back(name);
    out.models.clusters.logics[name] = subset.empty() ? out.global : quality::calibrate_klogic(subset, opts);
  }
  return out;
}

CalibrationResult calibrate(const std::vector<SceneRequest>& scenes, const RunConfig& cfg,
                            const quality::CalibrationOptions& opts, int clusters, uint64_t seed) {
  if (scenes.empty()) throw InvalidArgument("calibrate: empty scene set");
  std::vector<quality::CalibrationRecord> records;
  for (const auto& s : scenes) {
    auto r = calibration_records(s, cfg);
    records.insert(records.end(), r.begin(), r.end());
  }
  return calibrate_from_records(scenes, records, opts, clusters, seed);
}

}  // namespace selrefine::pipeline
