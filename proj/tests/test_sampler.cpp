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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "test_support.hpp"
#include "trex/sampler.hpp"
#include "trex/synthgen.hpp"

using namespace trex;
using namespace trex::sample;
using trex::testing::comb_tree;
using trex::testing::path_tree;
using trex::testing::same_targets;

namespace {

std::vector<int> sorted_out_degrees(const tree::CenterlineTree& t) {
  auto d = trex::testing::out_degrees(tree::canonicalize(t));
  std::sort(d.begin(), d.end());
  return d;
}

}  // namespace

TEST_CASE("sample_super_trajectory: a 55-node path yields the unique path") {
  IndexedTree t(path_tree(55));
  Rng rng(1);
  const auto traj = sample_super_trajectory(t, rng);
  REQUIRE(traj.nodes.size() == 55);
  for (int i = 0; i < 55; ++i) CHECK(traj.nodes[i] == i);
  CHECK_FALSE(traj.padded());
  CHECK(traj.active_subs() == 6);
}

TEST_CASE("sample_super_trajectory: start index on a 60-node path is uniform over 0..5") {
  IndexedTree t(path_tree(60));
  Rng rng(2);
  std::map<int, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto traj = sample_super_trajectory(t, rng);
    REQUIRE(traj.nodes.size() == 55);
    ++counts[traj.nodes.front()];
  }
  REQUIRE(counts.size() == 6);
  const double expected = draws / 6.0;
  const double sigma = std::sqrt(draws * (1.0 / 6) * (5.0 / 6));
  double chi2 = 0.0;
  for (auto [start, c] : counts) {
    CHECK(start >= 0);
    CHECK(start <= 5);
    CHECK(std::abs(c - expected) <= 3 * sigma);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi2 < 20.515);  // chi-square, 5 dof, p = 0.001
}

TEST_CASE("sample_super_trajectory: a depth-30 tree gives 30 real steps then End padding") {
  IndexedTree t(path_tree(31));
  Rng rng(3);
  const auto traj = sample_super_trajectory(t, rng);
  CHECK(traj.real_steps() == 30);
  CHECK(traj.padded());
  CHECK(traj.active_subs() == 4);
  const auto targets = build_step_targets(traj, t, PatchGeometry{});
  REQUIRE(targets.size() == 4);
  // global step 30 is sub 3 step 3
  REQUIRE(targets[3].steps[3].size() == 1);
  CHECK(targets[3].steps[3][0].cls == kEnd);
  for (int s = 4; s < kStepsPerSub; ++s) CHECK(targets[3].steps[s].empty());
  CHECK(targets[3].carry_key == -1);
}

TEST_CASE("sample_super_trajectory: rejects trees with fewer than two nodes") {
  IndexedTree t(path_tree(1));
  Rng rng(4);
  CHECK_THROWS_AS(sample_super_trajectory(t, rng), std::invalid_argument);
}

TEST_CASE("sample_super_trajectory: continuation children are chosen uniformly") {
  // root -> 2 nodes -> bifurcation into two long arms
  tree::CenterlineTree t = path_tree(3);
  int parent_a = 2, parent_b = 2;
  for (int i = 0; i < 60; ++i) {
    const int a = static_cast<int>(t.nodes.size());
    t.nodes.push_back({a, {7.0 + i, 5.0 + 0.5 * i, 5}, 1.0, parent_a});
    const int b = a + 1;
    t.nodes.push_back({b, {7.0 + i, 5.0 - 0.5 * i, 5}, 1.0, parent_b});
    parent_a = a;
    parent_b = b;
  }
  // only the root and the first arm nodes have >= 54 steps below
  IndexedTree it(t);
  Rng rng(5);
  int first_arm = 0;
  const int draws = 4000;
  for (int i = 0; i < draws; ++i) {
    const auto traj = sample_super_trajectory(it, rng);
    const int after_bif = traj.nodes.front() <= 2 ? traj.nodes[3 - traj.nodes.front()] : traj.nodes.front();
    if (after_bif % 2 == 1) ++first_arm;
  }
  const double share = static_cast<double>(first_arm) / draws;
  CHECK(share > 0.4);
  CHECK(share < 0.6);
}

TEST_CASE("super trajectory: sub-trajectories share exactly one link node") {
  IndexedTree t(path_tree(80));
  Rng rng(6);
  const auto traj = sample_super_trajectory(t, rng);
  const auto targets = build_step_targets(traj, t, PatchGeometry{});
  REQUIRE(targets.size() == 6);
  for (int k = 1; k < 6; ++k) {
    CHECK(targets[k].start_node == traj.nodes[9 * k]);
    const auto& last = targets[k - 1].steps[kStepsPerSub - 1];
    REQUIRE(last.size() == 1);
    CHECK(last[0].to_node == targets[k].start_node);
    CHECK(targets[k - 1].steps[0][0].from_node == traj.nodes[9 * (k - 1)]);
  }
}

TEST_CASE("build_step_targets: straight segment gives 9 Intermediate targets") {
  IndexedTree t(path_tree(80));
  Rng rng(7);
  const auto traj = sample_super_trajectory(t, rng);
  const PatchGeometry g;
  const auto targets = build_step_targets(traj, t, g);
  for (const auto& sub : targets) {
    CHECK(sub.spawns.empty());
    for (const auto& step : sub.steps) {
      REQUIRE(step.size() == 1);
      CHECK(step[0].cls == kIntermediate);
      CHECK(step[0].branch_key == sub.primary_key);
      CHECK(norm(step[0].offset) * g.focal_half() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("build_step_targets: bifurcation at step 4 spawns 26 slots with 2 real children at step 5") {
  // spine of 70 with a side branch at node 5
  auto t = comb_tree(70, 5, 6);
  t.nodes.resize(70 + 6);  // keep only the first side branch
  IndexedTree it(t);
  SuperTrajectory traj;
  for (int i = 0; i <= 54; ++i) traj.nodes.push_back(i);
  const auto targets = build_step_targets(traj, it, PatchGeometry{});
  const auto& sub = targets[0];
  REQUIRE(sub.steps[4].size() == 1);
  CHECK(sub.steps[4][0].cls == kBifurcation);
  REQUIRE(sub.spawns.size() == 1);
  CHECK(sub.spawns[0].step == 5);
  CHECK(sub.spawns[0].parent_key == sub.steps[4][0].branch_key);
  CHECK(sub.spawns[0].child_keys.size() == 2);
  CHECK(sub.steps[5].size() == 2);
  for (int key : sub.spawns[0].child_keys) CHECK(sub.is_spawned(5, key));
  // the continuation child carries the primary branch out of the patch
  CHECK(sub.carry_key >= 0);
  const StepTarget* carried = sub.find(8, sub.carry_key);
  REQUIRE(carried != nullptr);
  CHECK(carried->to_node == 9);
}

TEST_CASE("build_step_targets: a secondary branch leaving the focal cube ends at step 7") {
  // primary along +x from the root, side branch along +y from node 1
  auto t = path_tree(70, {10, 10, 10});
  int parent = 1;
  for (int k = 1; k <= 12; ++k) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.push_back({id, {11, 10.0 + k, 10}, 2.0, parent});
    parent = id;
  }
  IndexedTree it(t);
  SuperTrajectory traj;
  for (int i = 0; i <= 54; ++i) traj.nodes.push_back(i);
  PatchGeometry g{13, 13};  // focal extent +-6.5 voxels around the root
  const auto targets = build_step_targets(traj, it, g);
  const auto& sub = targets[0];
  REQUIRE(sub.spawns.size() == 1);
  CHECK(sub.spawns[0].step == 1);
  int side_key = -1;
  for (int key : sub.spawns[0].child_keys)
    if (sub.find(1, key)->to_node != 2) side_key = key;
  REQUIRE(side_key >= 0);
  for (int s = 2; s < 7; ++s) CHECK(sub.find(s, side_key)->cls == kIntermediate);
  CHECK(sub.find(7, side_key)->cls == kEnd);
  CHECK(sub.find(8, side_key) == nullptr);
}

TEST_CASE("extract_patch: constant volume gives constant crops") {
  Volume v({40, 40, 40}, 0.5f);
  const auto p = extract_patch(v, {20, 20, 20}, PatchGeometry{9, 17});
  CHECK(p.focal_crop.shape == std::array<int, 3>{9, 9, 9});
  CHECK(p.context_crop.shape == std::array<int, 3>{17, 17, 17});
  for (float x : p.focal_crop.voxels) CHECK(x == 0.5f);
  for (float x : p.context_crop.voxels) CHECK(x == 0.5f);
}

TEST_CASE("extract_patch: a corner centre zero-pads all but one octant of the context") {
  // (C+1)/2 voxels per axis remain inside, so the zero share tends to 7/8
  // from below as C grows.
  Volume v({80, 80, 80}, 1.0f);
  for (int c : {17, 65}) {
    const auto p = extract_patch(v, {0, 0, 0}, PatchGeometry{9, c});
    const auto zeros = std::count(p.context_crop.voxels.begin(), p.context_crop.voxels.end(), 0.0f);
    const long inside = static_cast<long>((c + 1) / 2) * ((c + 1) / 2) * ((c + 1) / 2);
    CHECK(zeros == static_cast<long>(p.context_crop.size()) - inside);
  }
  const auto p = extract_patch(v, {0, 0, 0}, PatchGeometry{33, 65});
  const auto zeros = std::count(p.context_crop.voxels.begin(), p.context_crop.voxels.end(), 0.0f);
  CHECK(static_cast<double>(zeros) / p.context_crop.size() > 0.86);
}

TEST_CASE("extract_patch: world -> patch -> world round-trips") {
  Volume v({50, 50, 50});
  const auto p = extract_patch(v, {20.3, 31.7, 12.5}, PatchGeometry{});
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const Vec3 w{rng.uniform(-20, 80), rng.uniform(-20, 80), rng.uniform(-20, 80)};
    const Vec3 back = p.transform.to_world(p.transform.to_patch(w));
    CHECK(distance(w, back) < 1e-9);
  }
  CHECK_THROWS_AS(extract_patch(v, {-1, 3, 3}, PatchGeometry{}), std::invalid_argument);
  CHECK_THROWS_AS(extract_patch(v, {3, 3, 3}, PatchGeometry{10, 33}), ConfigError);
}

TEST_CASE("augment_targets: zero magnitudes are the bitwise identity") {
  IndexedTree t(comb_tree(90, 7, 8));
  Rng rng(9);
  AugmentConfig cfg;
  cfg.laplace_scale_factor = 0.0;
  cfg.noise_std = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto traj = sample_super_trajectory(t, rng);
    const auto plain = build_step_targets(traj, t, PatchGeometry{});
    Rng before = rng;
    const auto aug = augment_targets(traj, t, PatchGeometry{}, cfg, rng);
    CHECK(same_targets(plain, aug.targets));
    CHECK(aug.tree.tree == t.tree);
    CHECK(rng.next_u64() == before.next_u64());  // no draws consumed
  }
}

TEST_CASE("augment_targets: Laplace draws pass a KS test at b = 2") {
  IndexedTree t(comb_tree(90, 7, 8, 1.0));
  Rng rng(10);
  AugmentConfig cfg;
  cfg.laplace_scale_factor = 2.0;  // radius 1 -> b = 2
  cfg.noise_std = 0.0;
  std::vector<double> draws;
  while (draws.size() < 100000) {
    const auto traj = sample_super_trajectory(t, rng);
    const auto aug = augment_targets(traj, t, PatchGeometry{}, cfg, rng);
    draws.insert(draws.end(), aug.draws.begin(), aug.draws.end());
  }
  const double d = trex::testing::ks_statistic(draws, [](double x) { return trex::testing::laplace_cdf(x, 2.0); });
  CHECK(d < trex::testing::ks_critical_001(draws.size()));
}

TEST_CASE("augment_targets: topology, counts and spacing survive augmentation") {
  IndexedTree comb(comb_tree(90, 7, 8, 1.5));
  auto gcfg = synth::toy_growth_config();
  gcfg.seed = 3;
  IndexedTree grown(synth::generate_tree(gcfg).tree);
  Rng rng(11);
  AugmentConfig cfg;
  cfg.laplace_scale_factor = 1.0;
  SamplerConfig scfg{0.5};
  const PatchGeometry g;
  int moved = 0;
  for (int i = 0; i < 400; ++i) {
    const IndexedTree& t = i % 2 ? comb : grown;
    const auto traj = sample_super_trajectory(t, rng, scfg);
    const auto aug = augment_targets(traj, t, g, cfg, rng);
    CHECK(aug.tree.tree.size() == t.tree.size());
    CHECK(tree::validate_tree(aug.tree.tree).ok());
    CHECK(tree::topology_signature(aug.tree.tree) == tree::topology_signature(t.tree));
    CHECK(sorted_out_degrees(aug.tree.tree) == sorted_out_degrees(t.tree));
    CHECK(tree::decompose_branches(aug.tree.tree).size() == tree::decompose_branches(t.tree).size());
    for (int s : aug.shifts) moved += s != 0;
    for (const auto& sub : aug.targets)
      for (const auto& step : sub.steps)
        for (const auto& st : step)
          if (st.cls == kIntermediate || st.cls == kBifurcation) {
            const double len = norm(st.offset) * g.focal_half();
            CHECK(len > 0.25);
            CHECK(len < 2.0);
          }
  }
  CHECK(moved > 50);
}

TEST_CASE("neighbour directions are 26 distinct unit vectors") {
  const auto& d = neighbour_directions();
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(norm(d[i]) == doctest::Approx(1.0));
    for (std::size_t j = 0; j < i; ++j) CHECK(distance(d[i], d[j]) > 0.1);
  }
}
