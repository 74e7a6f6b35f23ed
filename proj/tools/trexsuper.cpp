/*
 *  Copyright 2026 The trexsuper Authors. All Rights Reserved.
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */
// trexsuper command-line entry point.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "trex/pipeline.hpp"

namespace fs = std::filesystem;
using namespace trex;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> run_index;
  std::vector<std::string> ablate;
};

config::RunConfig resolve_config(const Globals& g) {
  config::RunConfig c = g.config_path.empty() ? config::RunConfig{} : config::load_file(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (g.run_index) c.run_index = *g.run_index;
  for (const auto& a : g.ablate) config::apply_ablation(c, a);
  c.resolve();
  c.validate();
  return c;
}

Vec3 parse_root(const std::string& s) {
  Vec3 p{};
  char tail = 0;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf%c", &p[0], &p[1], &p[2], &tail) != 3)
    throw ConfigError("--root: expected x,y,z, got '" + s + "'");
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trexsuper: centerline tree tracking with a recurrent transformer"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--run-index", g.run_index, "repeat index; selects the training seed and run directory");
  app.add_option("--ablate", g.ablate, "switch components, e.g. stt=off,fca=on,ta=off");

  // generate
  auto* gen = app.add_subcommand("generate", "grow and render a synthetic dataset");
  std::string gen_out;
  gen->add_option("--out", gen_out, "dataset directory (default: paths.dataset_dir)");

  // train
  auto* tr = app.add_subcommand("train", "train a model into runs/<name>-r<index>");
  std::string tr_data, tr_run;
  bool tr_resume = false;
  std::optional<int> tr_iters;
  tr->add_option("--dataset", tr_data, "dataset directory (default: paths.dataset_dir)");
  tr->add_option("--run-dir", tr_run, "explicit run directory");
  tr->add_option("--iterations", tr_iters, "override train.iterations");
  tr->add_flag("--resume", tr_resume, "continue from checkpoints/last.ckpt");

  // track
  auto* tk = app.add_subcommand("track", "track centerline trees with a trained model");
  std::string tk_ckpt, tk_volume, tk_root, tk_out, tk_manifest, tk_split = "test", tk_trace, tk_run;
  tk->add_option("--checkpoint", tk_ckpt, "checkpoint (default: <run>/checkpoints/last.ckpt)");
  tk->add_option("--volume", tk_volume, "single mode: .tvol volume");
  tk->add_option("--root", tk_root, "single mode: root position x,y,z in voxels");
  tk->add_option("--out", tk_out, "single mode: output .trex; batch mode: output directory");
  tk->add_option("--dataset", tk_manifest, "batch mode: dataset directory with a manifest");
  tk->add_option("--split", tk_split, "batch mode: split to track");
  tk->add_option("--trace", tk_trace, "write one JSON line per decode call");
  tk->add_option("--run-dir", tk_run, "explicit run directory");

  // eval
  auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
  std::string ev_pred, ev_data, ev_split = "test", ev_out, ev_run;
  ev->add_option("--pred", ev_pred, "prediction directory (default: <run>/predictions)");
  ev->add_option("--dataset", ev_data, "ground-truth dataset directory (default: paths.dataset_dir)");
  ev->add_option("--split", ev_split, "split to score");
  ev->add_option("--out", ev_out, "report directory (default: <run>/reports)");
  ev->add_option("--run-dir", ev_run, "explicit run directory");

  // report
  auto* rp = app.add_subcommand("report", "aggregate run reports into mean ± std");
  std::vector<std::string> rp_inputs;
  std::string rp_out;
  rp->add_option("inputs", rp_inputs, "metrics.json files or run directories (default: every run of paths.run_name)");
  rp->add_option("--out", rp_out, "also write the aggregate as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const config::RunConfig cfg = resolve_config(g);
    const std::string run = [&](const std::string& explicit_dir) {
      return explicit_dir.empty() ? config::run_dir(cfg) : explicit_dir;
    }(tr_run.empty() ? (tk_run.empty() ? ev_run : tk_run) : tr_run);

    if (*gen) {
      const std::string out = gen_out.empty() ? cfg.paths.dataset_dir : gen_out;
      const auto m = pipeline::cmd_generate(cfg, out);
      for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "wrote " << m.entries.size() << " samples to " << out << "\n";
      return 0;
    }

    if (*tr) {
      config::RunConfig c = cfg;
      if (tr_iters) c.train.iterations = *tr_iters;
      c.validate();
      const std::string data = tr_data.empty() ? c.paths.dataset_dir : tr_data;
      const auto s = pipeline::cmd_train(c, data, run, tr_resume, &std::cout);
      std::cout << "run " << run << ": " << s.iterations_run << " iterations, final loss " << s.last.loss << "\n";
      return 0;
    }

    if (*tk) {
      const std::string ckpt = tk_ckpt.empty() ? (fs::path(run) / "checkpoints" / "last.ckpt").string() : tk_ckpt;
      std::ofstream trace_file;
      std::ostream* trace = nullptr;
      if (!tk_trace.empty()) {
        trace_file.open(tk_trace);
        if (!trace_file) throw std::runtime_error(tk_trace + ": cannot write");
        trace = &trace_file;
      }
      if (!tk_manifest.empty()) {
        if (!tk_volume.empty() || !tk_root.empty()) throw ConfigError("track: --dataset excludes --volume/--root");
        const std::string out = tk_out.empty() ? (fs::path(run) / "predictions").string() : tk_out;
        const int n = pipeline::cmd_track_batch(ckpt, tk_manifest, tk_split, cfg.tracker, out, trace);
        std::cout << "wrote " << n << " predictions to " << out << "\n";
        return 0;
      }
      if (tk_volume.empty()) throw ConfigError("track: give --volume and --root, or --dataset");
      if (tk_root.empty()) throw ConfigError("track: missing --root x,y,z");
      if (tk_out.empty()) throw ConfigError("track: missing --out PATH.trex");
      const auto t = pipeline::cmd_track(ckpt, tk_volume, parse_root(tk_root), cfg.tracker, tk_out, trace);
      std::cout << "wrote " << t.nodes.size() << " nodes to " << tk_out << "\n";
      return 0;
    }

    if (*ev) {
      const std::string pred = ev_pred.empty() ? (fs::path(run) / "predictions").string() : ev_pred;
      const std::string data = ev_data.empty() ? cfg.paths.dataset_dir : ev_data;
      const std::string out = ev_out.empty() ? (fs::path(run) / "reports").string() : ev_out;
      const auto r = pipeline::cmd_eval(pred, data, ev_split, out);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << eval::format_table(r.summary);
      return 0;
    }

    if (*rp) {
      std::vector<std::string> inputs = rp_inputs;
      if (inputs.empty()) {
        const fs::path root(config::runs_root(cfg));
        const std::string prefix = cfg.paths.run_name + "-r";
        if (fs::is_directory(root))
          for (const auto& d : fs::directory_iterator(root))
            if (d.path().filename().string().rfind(prefix, 0) == 0 && fs::exists(d.path() / "reports" / "metrics.json"))
              inputs.push_back(d.path().string());
        std::sort(inputs.begin(), inputs.end());
      }
      const auto agg = pipeline::cmd_report(inputs);
      std::cout << "runs: " << inputs.size() << "\n" << eval::format_table(agg);
      if (!rp_out.empty()) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& m : agg) j[m.name] = {{"mean", m.mean}, {"std", m.std}, {"runs", inputs.size()}};
        std::ofstream(rp_out) << j.dump(2) << "\n";
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
