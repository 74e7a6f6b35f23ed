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
#include "trex/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace trex::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot write");
    out << text;
    if (!out) throw std::runtime_error(path.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// First dotted key where two config documents differ, or "".
std::string first_difference(const ordered_json& a, const ordered_json& b, const std::string& prefix = "") {
  if (a.is_object() && b.is_object()) {
    for (const auto& [k, v] : a.items()) {
      if (!b.contains(k)) return prefix + k;
      if (auto d = first_difference(v, b.at(k), prefix + k + "."); !d.empty()) return d;
    }
    for (const auto& [k, v] : b.items())
      if (!a.contains(k)) return prefix + k;
    return "";
  }
  return a == b ? "" : (prefix.empty() ? "config" : prefix.substr(0, prefix.size() - 1));
}

// Keeps the header and every line whose iteration is below `keep`, so a
// resumed run appends to a log that matches its checkpoint.
void truncate_log(const fs::path& path, int keep) {
  if (!fs::exists(path)) return;
  std::istringstream in(read_text(path));
  std::string line, out;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      out += line + "\n";
      header = false;
      continue;
    }
    if (std::stoi(line.substr(0, line.find('\t'))) < keep) out += line + "\n";
  }
  write_text_atomic(path, out);
}

}  // namespace

std::vector<train::SampleData> load_split(const std::string& dataset_dir, const std::string& split) {
  const auto manifest = synth::read_manifest(dataset_dir);
  std::vector<train::SampleData> out;
  for (const auto& e : manifest.split(split)) {
    auto t = tree::read_tree_file((fs::path(dataset_dir) / e.graph_path).string());
    out.push_back({e.id, sample::IndexedTree(std::move(t)), read_volume_file((fs::path(dataset_dir) / e.volume_path).string())});
  }
  if (out.empty()) throw ConfigError(dataset_dir + ": split '" + split + "' has no samples");
  return out;
}

synth::Manifest cmd_generate(const config::RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  return synth::make_dataset(cfg.dataset.n_train, cfg.dataset.n_val, cfg.dataset.n_test, cfg.dataset_config(), out_dir);
}

TrainSummary cmd_train(const config::RunConfig& cfg, const std::string& dataset_dir, const std::string& run_dir,
                       bool resume, std::ostream* progress) {
  cfg.validate();
  if (!fs::exists(fs::path(dataset_dir) / synth::kManifestName))
    throw ConfigError(dataset_dir + ": no " + std::string(synth::kManifestName) + "; run generate first");
  const fs::path root(run_dir);
  const fs::path frozen = root / "config" / "resolved.json";
  const fs::path last = root / "checkpoints" / "last.ckpt";
  const fs::path log_path = root / "logs" / "train.tsv";
  const ordered_json resolved = config::to_json(cfg);

  if (resume) {
    if (!fs::exists(last)) throw ConfigError(run_dir + ": nothing to resume (no checkpoints/last.ckpt)");
    const auto before = ordered_json::parse(read_text(frozen));
    if (auto d = first_difference(before, resolved); !d.empty())
      throw ConfigError("resume: config differs from the frozen run config at '" + d + "'");
  } else if (fs::exists(last)) {
    throw ConfigError(run_dir + ": run already has checkpoints; pass --resume or choose another run");
  }
  config::make_run_layout(run_dir);
  if (!resume) write_text_atomic(frozen, resolved.dump(2) + "\n");

  const auto data = load_split(dataset_dir, "train");
  model::Model m(cfg.model, cfg.model_init_seed());
  train::Trainer trainer(m, cfg.train, &data);
  if (resume) {
    trainer.load_checkpoint(last.string());
    truncate_log(log_path, trainer.iteration());
  }

  const bool fresh_log = !fs::exists(log_path);
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw std::runtime_error(log_path.string() + ": cannot write");
  if (fresh_log) log << train::log_header() << "\n";

  TrainSummary summary;
  const auto& tc = cfg.train;
  while (trainer.iteration() < tc.iterations) {
    summary.last = trainer.step();
    ++summary.iterations_run;
    const int done = trainer.iteration();
    if (done % tc.log_every == 0 || done == tc.iterations) {
      log << train::format_log_line(summary.last) << "\n" << std::flush;
      if (progress) *progress << train::format_log_line(summary.last) << "\n";
    }
    if (done % tc.checkpoint_every == 0 || done == tc.iterations) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%06d.ckpt", done);
      const fs::path p = root / "checkpoints" / name;
      trainer.save_checkpoint(p.string());
      fs::copy_file(p, last.string() + ".tmp", fs::copy_options::overwrite_existing);
      fs::rename(last.string() + ".tmp", last);
      summary.checkpoint = p.string();
    }
  }
  if (summary.iterations_run > 0 && !std::isfinite(summary.last.loss))
    throw std::runtime_error("training finished with a non-finite loss");
  return summary;
}

model::Model load_tracking_model(const std::string& checkpoint, tracking::TrackerConfig& tracker) {
  const auto info = train::read_checkpoint_info(checkpoint);
  model::Model m(info.model, 0);
  train::load_model_weights(m, checkpoint);
  tracker.carry_queries = info.ablate.stt;
  tracker.bifurcation_query_count = info.model.bifurcation_query_count;
  if (tracker.max_concurrent > info.model.max_queries) tracker.max_concurrent = info.model.max_queries;
  tracker.validate();
  return m;
}

tree::CenterlineTree cmd_track(const std::string& checkpoint, const std::string& volume_path, const Vec3& root,
                               tracking::TrackerConfig tracker, const std::string& out_path, std::ostream* trace) {
  const auto m = load_tracking_model(checkpoint, tracker);
  const Volume v = read_volume_file(volume_path);
  auto t = tracking::track(v, root, m, tracker, trace);
  if (const auto parent = fs::path(out_path).parent_path(); !parent.empty()) fs::create_directories(parent);
  tree::write_tree_file(out_path, t);
  return t;
}

int cmd_track_batch(const std::string& checkpoint, const std::string& dataset_dir, const std::string& split,
                    tracking::TrackerConfig tracker, const std::string& out_dir, std::ostream* trace) {
  const auto m = load_tracking_model(checkpoint, tracker);
  const auto manifest = synth::read_manifest(dataset_dir);
  const auto entries = manifest.split(split);
  if (entries.empty()) throw ConfigError(dataset_dir + ": split '" + split + "' has no samples");
  fs::create_directories(out_dir);
  int written = 0;
  for (const auto& e : entries) {
    const auto gt = tree::read_tree_file((fs::path(dataset_dir) / e.graph_path).string());
    const Volume v = read_volume_file((fs::path(dataset_dir) / e.volume_path).string());
    const auto it = std::find_if(gt.nodes.begin(), gt.nodes.end(), [&](const auto& n) { return n.id == e.root_id; });
    if (it == gt.nodes.end()) throw ParseError(e.graph_path + ": root id " + std::to_string(e.root_id) + " not found");
    const Vec3 root = it->position;
    if (trace) *trace << json{{"sample", e.id}}.dump() << "\n";
    const auto t = tracking::track(v, root, m, tracker, trace);
    tree::write_tree_file((fs::path(out_dir) / (e.id + ".trex")).string(), t);
    ++written;
  }
  return written;
}

eval::Report cmd_eval(const std::string& pred_dir, const std::string& dataset_dir, const std::string& split,
                      const std::string& out_dir) {
  const auto manifest = synth::read_manifest(dataset_dir);
  const auto entries = manifest.split(split);
  if (entries.empty()) throw ConfigError(dataset_dir + ": split '" + split + "' has no samples");
  const fs::path out(out_dir);
  fs::create_directories(out / "plots");

  eval::Report report;
  for (const auto& e : entries) {
    const auto gt = tree::read_tree_file((fs::path(dataset_dir) / e.graph_path).string());
    const fs::path pred_path = fs::path(pred_dir) / (e.id + ".trex");
    tree::CenterlineTree pred;
    const bool missing = !fs::exists(pred_path);
    if (missing) report.warnings.push_back("missing prediction for '" + e.id + "'; scored as empty");
    else pred = tree::read_tree_file(pred_path.string());
    auto s = eval::evaluate_sample(e.id, pred, gt);
    s.missing_prediction = missing;
    report.samples.push_back(s);
    write_text_atomic(out / "plots" / (e.id + ".svg"), eval::projection_svg(pred, gt, e.id));
  }
  report.summary = eval::summarize(report.samples);
  write_text_atomic(out / "metrics.json", eval::report_to_json(report).dump(2) + "\n");
  write_text_atomic(out / "metrics.txt", eval::format_table(report.summary));
  write_text_atomic(out / "per_sample.csv", eval::per_sample_csv(report.samples));
  return report;
}

std::vector<eval::MeanStd> cmd_report(const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ConfigError("report: no run reports given");
  std::vector<eval::MetricRow> rows;
  for (const auto& in : inputs) {
    fs::path p(in);
    if (fs::is_directory(p)) p = fs::exists(p / "metrics.json") ? p / "metrics.json" : p / "reports" / "metrics.json";
    ordered_json j;
    try {
      j = ordered_json::parse(read_text(p));
    } catch (const ordered_json::parse_error& e) {
      throw ParseError(p.string() + ": " + e.what());
    }
    rows.push_back(eval::metric_row_from_json(j));
  }
  return eval::aggregate_runs(rows);
}

}  // namespace trex::pipeline
