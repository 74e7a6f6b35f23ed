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
#include "trex/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include <json.hpp>

#include "trex/sampler.hpp"

namespace trex::tracking {

using ag::Tensor;
using ag::Var;

void TrackerConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("tracker.") + name + ": must be positive");
  };
  positive(steps_per_patch, "steps_per_patch");
  positive(max_concurrent, "max_concurrent");
  positive(max_total_nodes, "max_total_nodes");
  positive(max_depth, "max_depth");
  positive(bifurcation_query_count, "bifurcation_query_count");
  if (max_concurrent < bifurcation_query_count)
    throw ConfigError("tracker.max_concurrent: must be >= bifurcation_query_count");
  if (max_children < 1 || max_children > tree::kMaxOutDegree)
    throw ConfigError("tracker.max_children: must be in [1, " + std::to_string(tree::kMaxOutDegree) + "]");
  if (!(root_radius > 0.0)) throw ConfigError("tracker.root_radius: must be positive");
}

std::size_t Frontier::pending_queries() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.queries.size();
  return n;
}

std::vector<int> plan_rows(const std::vector<QueryState>& queries, int max_rows, int spawn_count) {
  std::vector<int> rows(queries.size(), 0);
  int used = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const int need = queries[i].spawn_pending ? spawn_count : 1;
    if (used + need > max_rows) continue;
    rows[i] = need;
    used += need;
  }
  return rows;
}

namespace {

sample::PatchTransform transform_for(const model::Model& m, std::array<int, 3> center) {
  const auto& c = m.config();
  const sample::PatchGeometry g{c.focal_size, c.context_size};
  return sample::make_transform({double(center[0]), double(center[1]), double(center[2])}, g);
}

std::array<int, 3> round_center(const Vec3& p) {
  return {static_cast<int>(std::lround(p[0])), static_cast<int>(std::lround(p[1])), static_cast<int>(std::lround(p[2]))};
}

Tensor past_token(const model::Model& m, const tree::CenterlineTree& t, int tip, const sample::PatchTransform& tf) {
  std::vector<Vec3> pos;
  std::vector<double> radii;
  for (int i = tip; i >= 0 && static_cast<int>(pos.size()) < sample::kPastPositions; i = t.nodes[i].parent_id) {
    pos.push_back(tf.to_patch(t.nodes[i].position));
    radii.push_back(t.nodes[i].radius / tf.half);
  }
  return m.embed_past_trajectory(pos, radii).value();
}

int argmax4(const Tensor& logits, int row) {
  int best = 0;
  for (int c = 1; c < 4; ++c)
    if (logits.at(row, c) > logits.at(row, best)) best = c;
  return best;
}

double confidence(const Tensor& logits, int row, int cls) {
  double mx = logits.at(row, 0);
  for (int c = 1; c < 4; ++c) mx = std::max(mx, logits.at(row, c));
  double s = 0.0;
  for (int c = 0; c < 4; ++c) s += std::exp(logits.at(row, c) - mx);
  return std::exp(logits.at(row, cls) - mx) / s;
}

}  // namespace

Frontier start_frontier(const Volume& volume, const Vec3& root, const model::Model& m, const TrackerConfig& cfg) {
  cfg.validate();
  if (!volume.contains(root))
    throw std::invalid_argument("track: root (" + std::to_string(root[0]) + ", " + std::to_string(root[1]) + ", " +
                                std::to_string(root[2]) + ") is outside the volume");
  Frontier f;
  f.tree.nodes.push_back({0, root, cfg.root_radius, tree::kNoParent});
  f.tree.root_id = 0;
  PatchGroup g;
  g.center = round_center(root);
  QueryState q;
  q.tip = 0;
  q.branch_id = 0;
  g.queries.push_back(q);
  f.groups.push_back(std::move(g));
  (void)m;
  return f;
}

StepReport step_frontier(Frontier& f, const model::Model& m, const Volume& volume, const TrackerConfig& cfg) {
  StepReport rep;
  if (f.groups.empty()) return rep;
  ag::NoGradGuard no_grad;
  PatchGroup& g = f.groups.front();
  for (int k = 0; k < 3; ++k) rep.group_center[k] = g.center[k];
  const sample::PatchTransform tf = transform_for(m, g.center);
  const double half = tf.half;

  if (!g.encoded) {
    const int S = m.config().input_size();
    const Volume crop = sample::crop_cube(volume, g.center, S);
    const Var input = ag::constant(Tensor({1, S, S, S}, std::vector<double>(crop.voxels.begin(), crop.voxels.end())));
    g.encoded = std::make_shared<const model::Encoded>(m.encode(input));
    for (QueryState& q : g.queries)
      if (q.embedding.empty() || !cfg.carry_queries) q.embedding = past_token(m, f.tree, q.tip, tf);
  }

  const std::vector<int> plan = plan_rows(g.queries, cfg.max_concurrent, cfg.bifurcation_query_count);
  const auto& dirs = sample::neighbour_directions();
  std::vector<Var> embs;
  std::vector<model::QueryInput> inputs;
  std::vector<int> first_row(g.queries.size(), -1);
  for (std::size_t i = 0; i < g.queries.size(); ++i) {
    const QueryState& q = g.queries[i];
    if (plan[i] == 0) {
      ++rep.deferred;
      continue;
    }
    first_row[i] = static_cast<int>(embs.size());
    const Vec3 tip = tf.to_patch(f.tree.nodes[q.tip].position);
    if (q.spawn_pending) {
      for (const Var& e : m.spawn_bifurcation_queries(ag::constant(q.embedding))) {
        inputs.push_back({tip, dirs[embs.size() - first_row[i]]});
        embs.push_back(e);
      }
    } else {
      embs.push_back(ag::constant(q.embedding));
      inputs.push_back({tip, q.prev_dir});
    }
  }
  rep.rows = static_cast<int>(embs.size());
  ++f.decode_calls;

  std::vector<QueryState> next;
  if (!embs.empty()) {
    const model::StepOutput out = m.decode_step(embs, inputs, *g.encoded);
    const Tensor& logits = out.final().logits.value();
    const Tensor& offset = out.final().offset.value();
    const Tensor& radius = out.final().radius.value();
    const Tensor& emb = out.embedding.value();

    // Appends the node predicted by `row` under `parent`; returns the
    // continuing query, or none when the node would leave the volume.
    auto emit = [&](const QueryState& from, int row, int cls, int branch_id) -> std::optional<QueryState> {
      if (static_cast<int>(f.tree.nodes.size()) >= cfg.max_total_nodes) {
        f.node_budget_hit = true;
        return std::nullopt;
      }
      const Vec3 p = f.tree.nodes[from.tip].position;  // copied: push_back below may reallocate
      const Vec3 w = p + Vec3{offset.at(row, 0), offset.at(row, 1), offset.at(row, 2)} * half;
      if (!volume.contains(w)) return std::nullopt;
      const int idx = static_cast<int>(f.tree.nodes.size());
      f.tree.nodes.push_back({idx, w, std::max(0.0, radius.at(row, 0) * half), f.tree.nodes[from.tip].id});
      rep.emitted.push_back(idx);
      QueryState q;
      q.embedding = Tensor({1, emb.cols()}, std::vector<double>(emb.data() + row * emb.cols(),
                                                                 emb.data() + (row + 1) * emb.cols()));
      q.tip = idx;
      q.prev_dir = normalized(w - p);
      q.depth = from.depth + 1;
      q.branch_id = branch_id;
      q.spawn_pending = cls == sample::kBifurcation;
      if (q.depth >= cfg.max_depth) return std::nullopt;
      return q;
    };

    for (std::size_t i = 0; i < g.queries.size(); ++i) {
      const QueryState& q = g.queries[i];
      if (first_row[i] < 0) {
        next.push_back(q);
        continue;
      }
      if (!q.spawn_pending) {
        const int cls = argmax4(logits, first_row[i]);
        // Discard only has meaning for freshly spawned queries; elsewhere it
        // ends the branch like End
        if (cls != sample::kIntermediate && cls != sample::kBifurcation) continue;
        if (auto c = emit(q, first_row[i], cls, q.branch_id)) next.push_back(std::move(*c));
        continue;
      }
      std::vector<std::pair<double, int>> keep;
      for (int j = 0; j < cfg.bifurcation_query_count; ++j) {
        const int row = first_row[i] + j;
        const int cls = argmax4(logits, row);
        if (cls == sample::kIntermediate || cls == sample::kBifurcation) keep.emplace_back(-confidence(logits, row, cls), j);
      }
      std::sort(keep.begin(), keep.end());
      if (static_cast<int>(keep.size()) > cfg.max_children) keep.resize(cfg.max_children);
      std::sort(keep.begin(), keep.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
      for (const auto& [neg_conf, j] : keep) {
        const int row = first_row[i] + j;
        if (auto c = emit(q, row, argmax4(logits, row), f.next_branch_id++)) next.push_back(std::move(*c));
      }
    }
  }

  g.queries = std::move(next);
  ++g.steps_done;
  if (f.node_budget_hit) {
    f.groups.clear();
    return rep;
  }
  if (g.steps_done >= cfg.steps_per_patch || g.queries.empty()) {
    std::vector<QueryState> survivors = std::move(g.queries);
    f.groups.pop_front();
    for (QueryState& q : survivors) {
      PatchGroup ng;
      ng.center = round_center(f.tree.nodes[q.tip].position);
      ng.queries.push_back(std::move(q));
      f.groups.push_back(std::move(ng));
    }
  }
  return rep;
}

tree::CenterlineTree track(const Volume& volume, const Vec3& root, const model::Model& m, const TrackerConfig& cfg,
                           std::ostream* trace) {
  Frontier f = start_frontier(volume, root, m, cfg);
  while (!f.empty()) {
    const StepReport r = step_frontier(f, m, volume, cfg);
    if (trace) {
      nlohmann::json j = {{"call", f.decode_calls - 1},
                          {"center", {r.group_center[0], r.group_center[1], r.group_center[2]}},
                          {"rows", r.rows},
                          {"deferred", r.deferred},
                          {"emitted", r.emitted.size()},
                          {"groups", f.groups.size()},
                          {"nodes", f.tree.nodes.size()}};
      *trace << j.dump() << '\n';
    }
  }
  return f.tree;
}

}  // namespace trex::tracking
