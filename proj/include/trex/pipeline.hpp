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
#pragma once

// The five command-line verbs as library calls. The executable only parses
// arguments; tests and the acceptance binary drive these directly.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trex/config.hpp"
#include "trex/evalsuite.hpp"

namespace trex::pipeline {

/// Loads one split of a dataset directory for training.
std::vector<train::SampleData> load_split(const std::string& dataset_dir, const std::string& split);

synth::Manifest cmd_generate(const config::RunConfig& cfg, const std::string& out_dir);

struct TrainSummary {
  train::StepLog last;
  int iterations_run = 0;  // in this invocation
  std::string checkpoint;  // path of the newest checkpoint
};

/// Trains into `run_dir` (created with the standard layout). The resolved
/// config is frozen to config/resolved.json. With `resume` the newest
/// checkpoint is loaded and the frozen config must match `cfg`.
TrainSummary cmd_train(const config::RunConfig& cfg, const std::string& dataset_dir, const std::string& run_dir,
                       bool resume, std::ostream* progress = nullptr);

/// Model for tracking, configured and filled from a checkpoint.
model::Model load_tracking_model(const std::string& checkpoint, tracking::TrackerConfig& tracker);

tree::CenterlineTree cmd_track(const std::string& checkpoint, const std::string& volume_path, const Vec3& root,
                               tracking::TrackerConfig tracker, const std::string& out_path,
                               std::ostream* trace = nullptr);

/// One prediction `<out_dir>/<id>.trex` per sample of `split`, started at
/// the ground-truth root. Returns the number of predictions written.
int cmd_track_batch(const std::string& checkpoint, const std::string& dataset_dir, const std::string& split,
                    tracking::TrackerConfig tracker, const std::string& out_dir, std::ostream* trace = nullptr);

/// Scores `<pred_dir>/<id>.trex` against every sample of `split`. Missing
/// predictions count as empty trees with a warning. Writes metrics.json,
/// metrics.txt, per_sample.csv and plots/<id>.svg into `out_dir`.
eval::Report cmd_eval(const std::string& pred_dir, const std::string& dataset_dir, const std::string& split,
                      const std::string& out_dir);

/// Mean and standard deviation over metrics.json files (or run directories
/// holding reports/metrics.json).
std::vector<eval::MeanStd> cmd_report(const std::vector<std::string>& inputs);

}  // namespace trex::pipeline
