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

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "selrefine/harness.hpp"
#include "selrefine/kernels.hpp"
#include "selrefine/masks.hpp"
#include "selrefine/pipeline.hpp"

namespace fs = std::filesystem;
using namespace selrefine;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

pipeline::RunConfig load_run_config(const std::string& path) {
  return path.empty() ? pipeline::RunConfig{} : pipeline::config_from_json(slurp(path));
}

std::string indexed(const std::string& prefix, size_t i, const std::string& ext) {
  std::ostringstream s;
  s << prefix << (i < 10 ? "0" : "") << i << ext;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selrefine: selective refinement of regression view synthesis"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  std::string isa = "auto";
  app.add_option("--isa", isa, "kernel set: auto, scalar or avx2")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic scene corpus");
  int gen_scenes = 10, gen_dims = 64, gen_frames = 8;
  uint64_t gen_seed = 7;
  std::string gen_out;
  gen->add_option("--scenes", gen_scenes)->required();
  gen->add_option("--seed", gen_seed)->required();
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--dims", gen_dims, "square frame size, multiple of 8");
  gen->add_option("--frames", gen_frames, "target frames per scene");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "calibrate k-logic on a corpus");
  std::string cal_corpus, cal_out, cal_config, cal_records, cal_from;
  double cal_alpha = 0.95, cal_coverage = 0.9;
  int cal_clusters = 3;
  uint64_t cal_seed = 7;
  cal->add_option("--corpus", cal_corpus)->required();
  cal->add_option("--alpha", cal_alpha)->required();
  cal->add_option("--out", cal_out)->required();
  cal->add_option("--clusters", cal_clusters, "scene clusters, 1 for a single global logic");
  cal->add_option("--coverage", cal_coverage, "per-bin fraction of frames that must reach alpha");
  cal->add_option("--seed", cal_seed, "clustering seed");
  cal->add_option("--config", cal_config, "run config JSON");
  cal->add_option("--records", cal_records, "also write the sweep records CSV here");
  cal->add_option("--from-records", cal_from, "skip the sweep and fit on this records CSV");

  // infer
  auto* inf = app.add_subcommand("infer", "refine one scene");
  std::string inf_scene, inf_klogic, inf_mode = "fine", inf_out, inf_config;
  std::optional<uint64_t> inf_seed;
  inf->add_option("--scene", inf_scene)->required();
  inf->add_option("--klogic", inf_klogic)->required();
  inf->add_option("--mode", inf_mode)->check(CLI::IsMember({"coarse", "fine", "selective"}));
  inf->add_option("--out", inf_out)->required();
  inf->add_option("--seed", inf_seed, "override the scene seed");
  inf->add_option("--config", inf_config, "run config JSON");

  // bench
  auto* bench = app.add_subcommand("bench", "benchmark modes over a corpus");
  std::string b_corpus, b_configs, b_report, b_json;
  int b_threads = 0;
  bool b_no_timing = false;
  bench->add_option("--corpus", b_corpus)->required();
  bench->add_option("--configs", b_configs)->required();
  bench->add_option("--report", b_report)->required();
  bench->add_option("--json", b_json, "aggregate JSON (default: report path with .json)");
  bench->add_option("--threads", b_threads, "worker threads (0 = all cores)");
  bench->add_flag("--no-timing", b_no_timing, "write wall_ms as 0 for byte-stable reports");

  // mask
  auto* mask = app.add_subcommand("mask", "refinement mask of one frame");
  std::string m_frame, m_opacity, m_out;
  double m_tau = 0.5;
  int m_window = 7;
  bool m_no_blur = false;
  mask->add_option("--frame", m_frame)->required();
  mask->add_option("--opacity", m_opacity)->required();
  mask->add_option("--tau", m_tau);
  mask->add_option("--window", m_window, "blur variance window");
  mask->add_flag("--no-blur", m_no_blur, "opacity mask only");
  mask->add_option("--out", m_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (isa == "scalar") kernels::set_isa(kernels::Isa::Scalar);
    if (isa == "avx2") kernels::set_isa(kernels::Isa::Avx2);

    if (*gen) {
      const auto corpus = harness::gen_corpus(gen_scenes, gen_dims, gen_seed, gen_frames);
      harness::save_corpus(gen_out, corpus);
      std::cout << "wrote " << corpus.size() << " scenes to " << gen_out << "\n";
    } else if (*cal) {
      const auto corpus = harness::load_corpus(cal_corpus);
      const auto cfg = load_run_config(cal_config);
      std::vector<pipeline::SceneRequest> scenes;
      for (const auto& s : corpus) scenes.push_back(s.request);
      quality::CalibrationOptions opts;
      opts.alpha = cal_alpha;
      opts.coverage = cal_coverage;
      opts.grid = cfg.grid;
      const auto res = cal_from.empty()
                           ? pipeline::calibrate(scenes, cfg, opts, cal_clusters, cal_seed)
                           : pipeline::calibrate_from_records(scenes, quality::records_from_csv(slurp(cal_from)), opts,
                                                              cal_clusters, cal_seed);
      nlohmann::json j = nlohmann::json::parse(quality::klogic_to_json(res.global));
      j["clusters"] = nlohmann::json::parse(cluster::model_to_json(res.models.clusters));
      spit(cal_out, j.dump(2) + "\n");
      if (!cal_records.empty()) spit(cal_records, quality::records_to_csv(res.records));
      std::cout << "calibrated " << scenes.size() << " scenes, " << res.records.size() << " frames -> " << cal_out
                << "\n";
    } else if (*inf) {
      auto scene = harness::load_scene_file(inf_scene);
      auto& req = scene.request;
      req.mode = pipeline::parse_mode(inf_mode);
      if (inf_seed) req.seed = *inf_seed;
      const auto cfg = load_run_config(inf_config);
      const auto models = pipeline::load_models(inf_klogic);
      const auto res = pipeline::run_scene(req, cfg, models);
      fs::create_directories(inf_out);
      for (size_t i = 0; i < res.frames.size(); ++i)
        write_png((fs::path(inf_out) / indexed("frame_", i, ".png")).string(), res.frames[i]);
      for (size_t i = 0; i < res.masks.size(); ++i)
        write_mask_png((fs::path(inf_out) / indexed("mask_", i, ".png")).string(), res.masks[i].full);
      spit((fs::path(inf_out) / "trace.jsonl").string(), pipeline::trace_to_jsonl(res.trace));
      nlohmann::json cost{{"scene_id", req.scene_id},      {"mode", inf_mode},
                          {"cluster", res.cluster},        {"ks", res.ks},
                          {"ratios", res.ratios},          {"executed_units", res.cost.executed},
                          {"baseline_units", res.cost.baseline}, {"unit_speedup", res.cost.speedup}};
      spit((fs::path(inf_out) / "cost.json").string(), cost.dump(2) + "\n");
      std::cout << "speedup " << res.cost.speedup << " over " << res.frames.size() << " frames\n";
    } else if (*bench) {
      const auto file = harness::bench_file_from_json(slurp(b_configs));
      harness::BenchOptions opts;
      opts.run = file.run;
      opts.models = harness::load_bench_models(file, fs::path(b_configs).parent_path().string());
      opts.threads = b_threads;
      opts.timing = !b_no_timing;
      const auto corpus = harness::load_corpus(b_corpus);
      const auto report = harness::run_benchmark(corpus, file.configs, opts);
      spit(b_report, harness::report_csv(report));
      const std::string json_path = b_json.empty() ? fs::path(b_report).replace_extension(".json").string() : b_json;
      spit(json_path, harness::report_json(report) + "\n");
      for (const auto& a : report.aggregates)
        std::cout << a.mode << " alpha=" << a.alpha << " speedup=" << a.mean_speedup << " quality=" << a.mean_quality
                  << " p95_units=" << a.p95_units << "\n";
    } else if (*mask) {
      ImageFrame frame = read_png(m_frame);
      const Grid op = read_gray_png(m_opacity);
      if (op.height != frame.height || op.width != frame.width)
        throw InvalidArgument("opacity PNG size differs from frame");
      frame.opacity = op.v;
      masks::MaskParams p;
      p.tau_o = m_tau;
      p.blur_window = m_window;
      p.blur_detection = !m_no_blur;
      const auto m = masks::frame_mask(frame, p);
      write_mask_png(m_out, m);
      std::cout << m.count() << " of " << m.v.size() << " pixels marked\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
