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
#include "trex/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace trex::sample {

const char* class_name(int c) {
  switch (c) {
    case kEnd: return "End";
    case kIntermediate: return "Intermediate";
    case kBifurcation: return "Bifurcation";
    case kDiscard: return "Discard";
  }
  return "?";
}

IndexedTree::IndexedTree(tree::CenterlineTree t) : tree(std::move(t)), index(tree::TreeIndex::build(tree)) {
  height.assign(tree.size(), 0);
  const std::vector<int> order = index.bfs_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (int c : index.children[*it]) height[*it] = std::max(height[*it], height[c] + 1);
}

int SuperTrajectory::active_subs() const {
  const int steps = real_steps();
  if (steps >= kTrajectorySteps) return kSubTrajectories;
  return steps / kStepsPerSub + 1;  // the sub holding the End step
}

SuperTrajectory sample_super_trajectory(const IndexedTree& t, Rng& rng, const SamplerConfig& cfg) {
  const int n = static_cast<int>(t.tree.size());
  if (n < 2) throw std::invalid_argument("sample_super_trajectory: tree needs at least two nodes");

  std::vector<int> candidates;
  const bool anywhere = cfg.short_path_fraction > 0.0 && rng.uniform() < cfg.short_path_fraction;
  for (int i = 0; i < n; ++i) {
    if (anywhere ? t.index.out_degree(i) > 0 : t.height[i] >= kTrajectorySteps) candidates.push_back(i);
  }
  int node = candidates.empty() ? t.index.root : candidates[rng.below(candidates.size())];

  SuperTrajectory traj;
  traj.nodes.push_back(node);
  while (traj.real_steps() < kTrajectorySteps && t.index.out_degree(node) > 0) {
    const auto& ch = t.index.children[node];
    node = ch[rng.below(ch.size())];
    traj.nodes.push_back(node);
  }
  return traj;
}

void PatchGeometry::validate() const {
  if (focal_size < 1 || focal_size % 2 == 0) throw ConfigError("patch.focal_size: must be a positive odd integer");
  if (context_size < 1 || context_size % 2 == 0) throw ConfigError("patch.context_size: must be a positive odd integer");
  if (focal_size > context_size) throw ConfigError("patch.focal_size: must not exceed patch.context_size");
}

Vec3 PatchTransform::to_patch(const Vec3& w) const {
  return {(w[0] - center[0]) / half, (w[1] - center[1]) / half, (w[2] - center[2]) / half};
}

Vec3 PatchTransform::to_world(const Vec3& p) const {
  return {center[0] + p[0] * half, center[1] + p[1] * half, center[2] + p[2] * half};
}

bool PatchTransform::in_focal(const Vec3& w) const {
  const double extent = half + 0.5;
  for (int k = 0; k < 3; ++k)
    if (std::abs(w[k] - center[k]) > extent) return false;
  return true;
}

PatchTransform make_transform(const Vec3& center_world, const PatchGeometry& g) {
  PatchTransform tf;
  for (int k = 0; k < 3; ++k) tf.center[k] = static_cast<int>(std::lround(center_world[k]));
  tf.half = g.focal_half();
  return tf;
}

Volume crop_cube(const Volume& volume, std::array<int, 3> center, int size) {
  Volume out({size, size, size}, 0.0f);
  const int h = size / 2;
  for (int i = 0; i < size; ++i) {
    const int x = center[0] - h + i;
    if (x < 0 || x >= volume.shape[0]) continue;
    for (int j = 0; j < size; ++j) {
      const int y = center[1] - h + j;
      if (y < 0 || y >= volume.shape[1]) continue;
      for (int k = 0; k < size; ++k) {
        const int z = center[2] - h + k;
        if (z < 0 || z >= volume.shape[2]) continue;
        out.at(i, j, k) = volume.at(x, y, z);
      }
    }
  }
  return out;
}

PatchSample extract_patch(const Volume& volume, const Vec3& center, const PatchGeometry& g) {
  g.validate();
  if (!volume.contains(center))
    throw std::invalid_argument("extract_patch: centre (" + std::to_string(center[0]) + ", " + std::to_string(center[1]) +
                                ", " + std::to_string(center[2]) + ") is outside the volume");
  PatchSample s;
  s.center_world = center;
  s.transform = make_transform(center, g);
  s.focal_crop = crop_cube(volume, s.transform.center, g.focal_size);
  s.context_crop = crop_cube(volume, s.transform.center, g.context_size);
  return s;
}

const StepTarget* SubTrajectoryTargets::find(int step, int key) const {
  for (const StepTarget& st : steps[step])
    if (st.branch_key == key) return &st;
  return nullptr;
}

bool SubTrajectoryTargets::is_spawned(int step, int key) const {
  for (const SpawnGroup& g : spawns)
    if (g.step == step && std::find(g.child_keys.begin(), g.child_keys.end(), key) != g.child_keys.end()) return true;
  return false;
}

namespace {

struct Track {
  int key;
  int node;
  bool primary;
  bool spawn_pending;
};

int appended_class(const IndexedTree& t, int node) {
  return t.index.out_degree(node) >= 2 ? kBifurcation : kIntermediate;
}

StepTarget real_target(const IndexedTree& t, const PatchTransform& tf, int key, int from, int to) {
  StepTarget st;
  st.cls = appended_class(t, to);
  const Vec3 d = t.pos(to) - t.pos(from);
  st.offset = d * (1.0 / tf.half);
  st.radius = t.radius(to) / tf.half;
  st.branch_key = key;
  st.from_node = from;
  st.to_node = to;
  return st;
}

StepTarget end_target(int key, int from) {
  StepTarget st;
  st.branch_key = key;
  st.from_node = from;
  return st;
}

SubTrajectoryTargets build_sub(const SuperTrajectory& traj, const IndexedTree& t, const PatchGeometry& g, int k) {
  const int L = traj.real_steps();
  SubTrajectoryTargets sub;
  sub.index = k;
  sub.start_node = traj.nodes[kStepsPerSub * k];
  sub.transform = make_transform(t.pos(sub.start_node), g);
  const PatchTransform& tf = sub.transform;

  for (int i = sub.start_node; i >= 0 && static_cast<int>(sub.past_positions.size()) < kPastPositions;
       i = t.index.parent[i]) {
    sub.past_positions.push_back(tf.to_patch(t.pos(i)));
    sub.past_radii.push_back(t.radius(i) / tf.half);
  }

  std::vector<Track> tracks{{0, sub.start_node, true, t.index.out_degree(sub.start_node) >= 2}};
  int next_key = 1;
  for (int step = 0; step < kStepsPerSub && !tracks.empty(); ++step) {
    const int gstep = kStepsPerSub * k + step;
    std::vector<Track> next;
    auto& out = sub.steps[step];
    for (const Track& tr : tracks) {
      const int u = tr.node;
      if (tr.spawn_pending) {
        SpawnGroup grp;
        grp.step = step;
        grp.parent_key = tr.key;
        grp.node = u;
        for (int c : t.index.children[u]) {
          const bool primary = tr.primary && gstep < L && traj.nodes[gstep + 1] == c;
          if (!primary && !tf.in_focal(t.pos(c))) continue;
          const int key = next_key++;
          out.push_back(real_target(t, tf, key, u, c));
          grp.child_keys.push_back(key);
          next.push_back({key, c, primary, out.back().cls == kBifurcation});
        }
        sub.spawns.push_back(std::move(grp));
        continue;
      }
      int c = -1;
      if (tr.primary) {
        if (gstep < L) c = traj.nodes[gstep + 1];
      } else if (t.index.out_degree(u) > 0) {
        c = t.index.children[u][0];
        if (!tf.in_focal(t.pos(c))) c = -1;  // secondary leaves the focal cube
      }
      if (c < 0) {
        out.push_back(end_target(tr.key, u));
        continue;
      }
      out.push_back(real_target(t, tf, tr.key, u, c));
      next.push_back({tr.key, c, tr.primary, out.back().cls == kBifurcation});
    }
    tracks = std::move(next);
  }
  for (const Track& tr : tracks)
    if (tr.primary) sub.carry_key = tr.key;
  return sub;
}

}  // namespace

TrajectoryTargets build_step_targets(const SuperTrajectory& traj, const IndexedTree& t, const PatchGeometry& g) {
  TrajectoryTargets out;
  for (int k = 0; k < traj.active_subs(); ++k) out.push_back(build_sub(traj, t, g, k));
  return out;
}

void AugmentConfig::validate() const {
  if (!(laplace_scale_factor >= 0.0)) throw ConfigError("augment.laplace_scale_factor: must be >= 0");
  if (!(noise_std >= 0.0)) throw ConfigError("augment.noise_std: must be >= 0");
  if (smoothing_window < 1 || smoothing_window % 2 == 0)
    throw ConfigError("augment.smoothing_window: must be a positive odd integer");
  if (smoothed_nodes < 0) throw ConfigError("augment.smoothed_nodes: must be >= 0");
}

namespace {

bool spacing_ok(const Vec3& a, const Vec3& b) {
  const double d = distance(a, b);
  return d > tree::kMinSpacing && d < tree::kMaxSpacing;
}

// Moves the secondary children of primary node P[j] to P[jn] and blends the
// first nodes of each secondary branch toward the new attachment. Returns
// false (leaving the tree untouched) when spacing cannot be kept valid.
bool reattach(tree::CenterlineTree& tr, const tree::TreeIndex& ix, const std::vector<int>& P, int j, int jn,
              const AugmentConfig& cfg) {
  const int from = P[j], to = P[jn];
  const Vec3 anchor = tr.nodes[to].position;
  const Vec3 delta = anchor - tr.nodes[from].position;
  const auto saved = tr.nodes;

  for (int c : ix.children[from]) {
    if (c == P[j + 1]) continue;
    std::vector<int> chain{c};
    while (static_cast<int>(chain.size()) < cfg.smoothed_nodes + 1 && ix.out_degree(chain.back()) == 1)
      chain.push_back(ix.children[chain.back()][0]);
    // chain.back() is the fixed far end of the blend: the node after the
    // smoothed ones, or the branch point or leaf that cuts the chain short
    const int m = static_cast<int>(chain.size());
    const int moved = m - 1;
    std::vector<Vec3> seq{anchor};
    for (int q = 0; q < m; ++q) {
      const double w = q < moved ? 1.0 - static_cast<double>(q + 1) / (moved + 1) : 0.0;
      seq.push_back(tr.nodes[chain[q]].position + delta * w);
    }
    const int h = cfg.smoothing_window / 2;
    std::vector<Vec3> smooth = seq;
    for (int q = 1; q <= moved && q + 1 < static_cast<int>(seq.size()); ++q) {
      Vec3 acc{};
      int cnt = 0;
      for (int r = std::max(0, q - h); r <= std::min(static_cast<int>(seq.size()) - 1, q + h); ++r, ++cnt) acc = acc + seq[r];
      smooth[q] = acc * (1.0 / cnt);
    }
    for (int q = 0; q < moved; ++q) tr.nodes[chain[q]].position = smooth[q + 1];
    tr.nodes[c].parent_id = tr.nodes[to].id;
    bool ok = spacing_ok(anchor, tr.nodes[c].position);
    for (int q = 0; q + 1 < m && ok; ++q) ok = spacing_ok(tr.nodes[chain[q]].position, tr.nodes[chain[q + 1]].position);
    if (!ok) {
      tr.nodes = saved;
      return false;
    }
  }
  return true;
}

}  // namespace

AugmentResult augment_targets(const SuperTrajectory& traj, const IndexedTree& t, const PatchGeometry& g,
                              const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  tree::CenterlineTree tr = t.tree;
  std::vector<double> draws;
  std::vector<int> shifts;
  if (cfg.laplace_scale_factor > 0.0) {
    const auto& P = traj.nodes;
    const int n = traj.real_steps();
    std::vector<int> bifs;
    for (int j = 1; j < n; ++j)
      if (t.index.out_degree(P[j]) >= 2) bifs.push_back(j);
    int prev_new = 0;
    for (std::size_t b = 0; b < bifs.size(); ++b) {
      const int j = bifs[b];
      const double d = rng.laplace(cfg.laplace_scale_factor * t.radius(P[j]));
      draws.push_back(d);
      const int lo = std::max(b > 0 ? bifs[b - 1] : 0, prev_new) + 1;
      const int hi = (b + 1 < bifs.size() ? bifs[b + 1] : n) - 1;
      const int jn = std::clamp(j + static_cast<int>(std::lround(d)), lo, hi);
      if (jn != j && reattach(tr, t.index, P, j, jn, cfg)) {
        shifts.push_back(jn - j);
        prev_new = jn;
      } else {
        shifts.push_back(0);
        prev_new = j;
      }
    }
  }

  AugmentResult res{IndexedTree(std::move(tr)), {}, std::move(draws), std::move(shifts)};
  res.targets = build_step_targets(traj, res.tree, g);

  if (cfg.noise_std > 0.0) {
    const double lo = 0.3 / g.focal_half(), hi = 1.9 / g.focal_half();
    for (auto& sub : res.targets)
      for (auto& step : sub.steps)
        for (StepTarget& st : step) {
          if (st.cls != kIntermediate && st.cls != kBifurcation) continue;
          for (double& v : st.offset) v += rng.normal(0.0, cfg.noise_std);
          const double len = norm(st.offset);
          const double clamped = std::clamp(len, lo, hi);
          if (len > 0.0 && clamped != len) st.offset = st.offset * (clamped / len);
        }
  }
  return res;
}

const std::array<Vec3, 26>& neighbour_directions() {
  static const std::array<Vec3, 26> dirs = [] {
    std::array<Vec3, 26> d{};
    int n = 0;
    for (int x = -1; x <= 1; ++x)
      for (int y = -1; y <= 1; ++y)
        for (int z = -1; z <= 1; ++z)
          if (x || y || z) d[n++] = normalized(Vec3{double(x), double(y), double(z)});
    return d;
  }();
  return dirs;
}

}  // namespace trex::sample
