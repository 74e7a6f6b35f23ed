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

// Breadth-first tracking from a root point. Queries are processed in patch
// groups: every query in a group is decoded jointly for `steps_per_patch`
// steps inside one patch, after which each survivor opens a new group
// centred on its tip. Groups are served first in, first out.
//
// Every emitted node gets exactly one parent that already exists, so the
// output is a single tree whatever the network predicts.

#include <deque>
#include <memory>
#include <ostream>
#include <vector>

#include "trex/model.hpp"
#include "trex/treegraph.hpp"
#include "trex/volume.hpp"

namespace trex::tracking {

struct TrackerConfig {
  int steps_per_patch = 9;
  int max_concurrent = 196;
  int max_total_nodes = 11000;
  int max_depth = 1024;
  int bifurcation_query_count = 26;
  /// Surviving spawned queries per bifurcation, highest confidence first;
  /// bounded by the tree's maximum out-degree.
  int max_children = tree::kMaxOutDegree;
  /// Radius (voxels) given to the root in the past-trajectory token.
  double root_radius = 2.5;
  /// Chain query embeddings across patches; off re-seeds every patch from
  /// the past-trajectory token, matching a model trained without the carry.
  bool carry_queries = true;

  void validate() const;
};

struct QueryState {
  ag::Tensor embedding;  // [1, E]
  int tip = 0;           // index of the tip node in the output tree
  Vec3 prev_dir{};
  int depth = 0;
  int branch_id = 0;
  bool spawn_pending = false;  // predicted Bifurcation, children not spawned yet
  bool alive = true;
};

struct PatchGroup {
  std::array<int, 3> center{};
  std::vector<QueryState> queries;
  int steps_done = 0;
  std::shared_ptr<const model::Encoded> encoded;  // built on the first step
};

struct Frontier {
  std::deque<PatchGroup> groups;  // front is the active group
  tree::CenterlineTree tree;
  int next_branch_id = 1;
  int decode_calls = 0;
  bool node_budget_hit = false;

  bool empty() const { return groups.empty(); }
  std::size_t pending_queries() const;
};

/// Rows each query occupies in the next decode call: 1 for a regular query,
/// `spawn_count` for an expanded bifurcation, 0 for a spawn deferred because
/// it would push the call past `max_rows`. Queries are served in order.
std::vector<int> plan_rows(const std::vector<QueryState>& queries, int max_rows, int spawn_count);

struct StepReport {
  int group_center[3]{};
  int rows = 0;           // queries decoded together in this call
  int deferred = 0;       // spawns waiting for capacity
  std::vector<int> emitted;  // new node indices
};

/// Starts a frontier with one query at the root. Throws std::invalid_argument
/// when the root lies outside the volume.
Frontier start_frontier(const Volume& volume, const Vec3& root, const model::Model& m, const TrackerConfig& cfg);

/// One decode step of the active patch group. Finished groups are replaced
/// by one new group per surviving query.
StepReport step_frontier(Frontier& f, const model::Model& m, const Volume& volume, const TrackerConfig& cfg);

/// Tracks until the frontier empties or a budget is reached. When `trace`
/// is set, one JSON object per decode call is written to it.
tree::CenterlineTree track(const Volume& volume, const Vec3& root, const model::Model& m, const TrackerConfig& cfg,
                           std::ostream* trace = nullptr);

}  // namespace trex::tracking
