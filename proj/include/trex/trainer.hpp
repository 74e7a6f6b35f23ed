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

// Super Trajectory Training: six chained patches per sample, set matching of
// spawned queries, per-step losses, Adam, and checkpoints.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "trex/model.hpp"
#include "trex/sampler.hpp"
#include "trex/volume.hpp"

namespace trex::train {

struct LossWeights {
  double w_class = 2.0;
  double w_offset = 5.0;
  double w_radius = 1.0;
  double discard = 1.0;  // extra factor on the class term of Discard rows
  void validate() const;
};

struct Ablation {
  bool stt = true;
  bool fca = true;
  bool ta = true;
};

struct TrainConfig {
  int iterations = 1000;
  int batch_size = 1;
  double learning_rate = 1e-4;
  double min_lr_fraction = 0.0;  // cosine decay floor, fraction of learning_rate
  double grad_clip = 1.0;
  /// Std (voxels) of a random displacement of each query tip during
  /// training; the target still points at the true next node. 0 disables.
  double tip_jitter = 0.0;
  bool aux_loss = true;
  std::uint64_t seed = 0;
  Ablation ablate;
  int checkpoint_every = 100;
  int log_every = 10;
  int workers = 1;
  LossWeights weights;
  sample::SamplerConfig sampler;
  sample::AugmentConfig augment;
  void validate() const;
};

// ---------------------------------------------------------------- matching

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Returns the column of each row. Throws std::invalid_argument on
/// non-finite costs or more rows than columns.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

struct StepPrediction {
  std::array<double, 4> logits{};
  Vec3 offset{};
  double radius = 0.0;
};

/// Rows [begin, end) of a head output as plain values.
std::vector<StepPrediction> to_predictions(const model::HeadOutput& out, int begin, int end);

double match_cost(const StepPrediction& p, const sample::StepTarget& t, const LossWeights& w);

struct Assignment {
  std::vector<int> target_of_pred;  // -1: unmatched (Discard)
  std::vector<int> pred_of_target;
  double total_cost = 0.0;
};

/// k predictions against m <= k real targets.
Assignment hungarian_match(const std::vector<StepPrediction>& preds, const std::vector<sample::StepTarget>& targets,
                           const LossWeights& w);

// ---------------------------------------------------------------- losses

struct RowTarget {
  int cls = sample::kDiscard;
  Vec3 offset{};
  double radius = 0.0;
  bool real() const { return cls == sample::kIntermediate || cls == sample::kBifurcation; }
};

RowTarget row_target(const sample::StepTarget& t);
/// Matched predictions take their target, the rest become Discard.
std::vector<RowTarget> rows_from_assignment(const std::vector<sample::StepTarget>& targets, const Assignment& a);

struct LossParts {
  ag::Var total;
  double cls = 0.0, offset = 0.0, radius = 0.0;
  LossParts& operator+=(const LossParts& o);
};

/// Class cross-entropy over all rows, L1 offset and radius over real rows.
/// Every term is multiplied by `scale`.
LossParts step_loss(const model::HeadOutput& out, const std::vector<RowTarget>& rows, const LossWeights& w,
                    double scale = 1.0);

// ---------------------------------------------------------------- forward

struct SampleData {
  std::string id;
  sample::IndexedTree tree;
  Volume volume;
};

/// Hooks used by the mechanism checks.
struct ForwardOptions {
  ag::Var embedding_probe;  // added to the first query of sub-trajectory 0
  ag::Var volume;           // [1, X, Y, Z]; crops become differentiable
  int loss_sub = -1;        // only this sub-trajectory contributes to the loss
  Rng* jitter_rng = nullptr;  // source for TrainConfig::tip_jitter
};

struct ForwardResult {
  LossParts loss;
  int supervised_rows = 0;
  int patches = 0;
};

/// Teacher-forced pass over one super trajectory. `tree` must be the tree the
/// targets were built from (the augmented one when TA is on).
ForwardResult forward_trajectory(const model::Model& m, const Volume& volume, const sample::IndexedTree& tree,
                                 const sample::TrajectoryTargets& targets, const TrainConfig& cfg,
                                 const ForwardOptions& opt = {});

struct BuiltSample {
  sample::SuperTrajectory traj;
  sample::IndexedTree tree;
  sample::TrajectoryTargets targets;
};

/// Draws a trajectory and builds (optionally augmented) targets.
BuiltSample build_sample(const SampleData& s, const model::ModelConfig& mc, const TrainConfig& cfg, Rng& rng);

// ---------------------------------------------------------------- optimiser

struct StepLog {
  int iteration = 0;
  double loss = 0.0, cls = 0.0, offset = 0.0, radius = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  double wallclock_s = 0.0;
};

class Trainer {
 public:
  Trainer(model::Model& m, TrainConfig cfg, const std::vector<SampleData>* data);

  /// One optimiser update over a batch. Throws std::runtime_error naming the
  /// sample on a non-finite loss.
  StepLog step();
  int iteration() const { return iteration_; }
  double learning_rate(int iteration) const;
  const TrainConfig& config() const { return cfg_; }

  void save_checkpoint(const std::string& path) const;
  /// Verifies magic, checksum, version and model config before touching any
  /// state; throws ParseError or ConfigError and leaves the trainer intact.
  void load_checkpoint(const std::string& path);

 private:
  model::Model& model_;
  TrainConfig cfg_;
  const std::vector<SampleData>* data_;
  int iteration_ = 0;
  std::vector<ag::Tensor> m_, v_;
};

struct CheckpointInfo {
  model::ModelConfig model;
  Ablation ablate;
  int iteration = 0;
};

/// Reads and verifies a checkpoint's header without loading weights.
CheckpointInfo read_checkpoint_info(const std::string& path);
/// Loads model parameters only (for tracking). Same checks as above.
void load_model_weights(model::Model& m, const std::string& path);

/// Header line of the tab-separated training log.
std::string log_header();
std::string format_log_line(const StepLog& s);

}  // namespace trex::train
