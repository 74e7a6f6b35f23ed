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

// Training samples: super trajectories through a ground-truth tree, the
// per-step child targets a tracker should reproduce inside each patch, and
// label-space augmentation of those targets.

#include <array>
#include <cstdint>
#include <vector>

#include "trex/common.hpp"
#include "trex/treegraph.hpp"
#include "trex/volume.hpp"

namespace trex::sample {

inline constexpr int kSubTrajectories = 6;
inline constexpr int kStepsPerSub = 9;
inline constexpr int kTrajectorySteps = kSubTrajectories * kStepsPerSub;  // 54
inline constexpr int kPastPositions = 10;

/// Class targets. End is a virtual terminator: no node is appended.
enum TargetClass : int { kEnd = 0, kIntermediate = 1, kBifurcation = 2, kDiscard = 3 };
inline constexpr int kClassCount = 4;
const char* class_name(int c);

/// A tree plus the adjacency and subtree heights the sampler needs.
/// Everything below refers to nodes by index into `tree.nodes`.
struct IndexedTree {
  tree::CenterlineTree tree;
  tree::TreeIndex index;
  std::vector<int> height;  // longest downward path, in edges

  explicit IndexedTree(tree::CenterlineTree t);
  const Vec3& pos(int i) const { return tree.nodes[i].position; }
  double radius(int i) const { return tree.nodes[i].radius; }
};

struct SamplerConfig {
  /// Probability of starting anywhere in the tree instead of only at nodes
  /// with 54 steps below them. Zero reproduces strict sampling.
  double short_path_fraction = 0.0;
};

struct SuperTrajectory {
  std::vector<int> nodes;  // 1..55 node indices, consecutive pairs are parent->child
  std::array<int, kSubTrajectories> sub_starts{0, 9, 18, 27, 36, 45};

  int real_steps() const { return static_cast<int>(nodes.size()) - 1; }
  bool padded() const { return real_steps() < kTrajectorySteps; }
  /// Sub-trajectories that contain at least one supervised step.
  int active_subs() const;
};

/// Throws std::invalid_argument for trees with fewer than two nodes.
SuperTrajectory sample_super_trajectory(const IndexedTree& t, Rng& rng, const SamplerConfig& cfg = {});

struct PatchGeometry {
  int focal_size = 33;
  int context_size = 65;

  double focal_half() const { return (focal_size - 1) / 2.0; }
  /// Throws ConfigError unless both sizes are odd and focal <= context.
  void validate() const;
};

/// Maps world coordinates to the normalised focal frame of one patch, in
/// which the focal cube spans [-1, 1]^3.
struct PatchTransform {
  std::array<int, 3> center{};  // voxel at the patch centre
  double half = 16.0;

  Vec3 to_patch(const Vec3& w) const;
  Vec3 to_world(const Vec3& p) const;
  /// Whether a world point lies in the focal cube (voxel extents included).
  bool in_focal(const Vec3& w) const;
};

PatchTransform make_transform(const Vec3& center_world, const PatchGeometry& g);

struct PatchSample {
  Volume focal_crop;
  Volume context_crop;
  Vec3 center_world{};
  PatchTransform transform;
};

/// Crops centred on the rounded centre; voxels outside the volume are zero.
/// Throws std::invalid_argument when the centre is outside the volume.
PatchSample extract_patch(const Volume& volume, const Vec3& center, const PatchGeometry& g);
/// Crop helper shared with the tracker.
Volume crop_cube(const Volume& volume, std::array<int, 3> center, int size);

struct StepTarget {
  int cls = kEnd;
  Vec3 offset{};       // normalised focal units; zero for End
  double radius = 0.0; // normalised focal units; zero for End
  int branch_key = 0;
  int from_node = -1;  // tip the prediction is made from
  int to_node = -1;    // appended node, -1 for End
};

/// Fresh queries at a bifurcation node; their real targets are the StepTargets
/// with keys in `child_keys` at the same step. Remaining slots are Discard.
struct SpawnGroup {
  int step = 0;
  int parent_key = 0;
  int node = -1;
  std::vector<int> child_keys;
};

struct SubTrajectoryTargets {
  int index = 0;       // 0..5
  int start_node = -1;
  PatchTransform transform;
  int primary_key = 0;            // key of the primary branch entering the patch
  int carry_key = -1;             // key of the primary branch leaving it, -1 if it ended
  std::vector<Vec3> past_positions;  // start node first, normalised
  std::vector<double> past_radii;
  std::array<std::vector<StepTarget>, kStepsPerSub> steps;
  std::vector<SpawnGroup> spawns;

  const StepTarget* find(int step, int key) const;
  bool is_spawned(int step, int key) const;
};

using TrajectoryTargets = std::vector<SubTrajectoryTargets>;

/// Targets for every active sub-trajectory. Secondary branches are tracked
/// inside their patch only and forced to End where they leave the focal cube.
TrajectoryTargets build_step_targets(const SuperTrajectory& traj, const IndexedTree& t, const PatchGeometry& g);

struct AugmentConfig {
  double laplace_scale_factor = 0.5;  // b = factor * bifurcation radius
  double noise_std = 0.025;           // normalised focal units
  int smoothing_window = 3;
  int smoothed_nodes = 5;
  void validate() const;
};

struct AugmentResult {
  IndexedTree tree;                // secondary branches re-attached and smoothed
  TrajectoryTargets targets;
  std::vector<double> draws;       // raw Laplace draws, one per primary bifurcation
  std::vector<int> shifts;         // applied shift in nodes (0 when reverted)
};

/// Target Augmentation. With both magnitudes zero the targets equal
/// build_step_targets bit for bit and no random numbers are consumed.
AugmentResult augment_targets(const SuperTrajectory& traj, const IndexedTree& t, const PatchGeometry& g,
                              const AugmentConfig& cfg, Rng& rng);

/// Unit vectors of the 26 voxel-neighbourhood directions, lexicographic in
/// (dx, dy, dz) with the zero offset skipped.
const std::array<Vec3, 26>& neighbour_directions();

}  // namespace trex::sample
