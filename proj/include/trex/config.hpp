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

// The run configuration: one JSON document holding every module's settings.
// Every field has a default and unknown keys are rejected by name.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "trex/model.hpp"
#include "trex/synthgen.hpp"
#include "trex/tracker.hpp"
#include "trex/trainer.hpp"

namespace trex::config {

struct DatasetSection {
  int n_train = 4;
  int n_val = 1;
  int n_test = 1;
  int workers = 1;
};

struct Paths {
  std::string dataset_dir = "data/toy";
  std::string runs_dir = "runs";
  std::string run_name = "default";
};

struct RunConfig {
  std::uint64_t seed = 0;
  int run_index = 0;
  synth::GrowthConfig growth;
  synth::RenderConfig render;
  DatasetSection dataset;
  model::ModelConfig model;
  train::TrainConfig train;
  tracking::TrackerConfig tracker;
  Paths paths;

  /// Copies the ablation switches into the sections that act on them and
  /// derives per-run seeds. Call after every override.
  void resolve();
  /// Validates every section; throws ConfigError.
  void validate() const;

  /// Seed of the training run: differs per run index, shared data seed.
  std::uint64_t train_seed() const;
  std::uint64_t model_init_seed() const;
  synth::DatasetConfig dataset_config() const;
};

/// Full document with every field, in a stable order.
nlohmann::ordered_json to_json(const RunConfig& c);
/// Starts from the defaults and overlays `j`. Unknown keys and type errors
/// raise ConfigError naming the dotted key.
RunConfig from_json(const nlohmann::json& j);
RunConfig load_file(const std::string& path);

/// Applies "key=on|off[,key=on|off]" with keys stt, fca, ta.
void apply_ablation(RunConfig& c, const std::string& spec);

/// Run root: TREXSUPER_RUNS_DIR if set, else paths.runs_dir.
std::string runs_root(const RunConfig& c);
/// `<root>/<run_name>-r<run_index>`.
std::string run_dir(const RunConfig& c);
/// Creates config, checkpoints, logs, predictions and reports below `dir`.
void make_run_layout(const std::string& dir);

}  // namespace trex::config
