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

// Synthetic vascular trees grown by tip advancement with collision
// avoidance, and their rendering into intensity volumes.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "trex/treegraph.hpp"
#include "trex/volume.hpp"

namespace trex::synth {

struct GrowthConfig {
  std::array<int, 3> volume_shape{96, 96, 96};
  int target_point_count = 600;
  double root_radius = 4.0;
  double radius_decay = 0.8;
  double bifurcation_prob_per_step = 0.04;
  double min_radius = 1.5;
  int max_out_degree = 2;
  double clearance_factor = 1.0;
  double step_length = 1.0;
  double tortuosity = 0.15;
  std::uint64_t seed = 0;

  // Growth shape controls.
  int min_branch_length = 8;         // steps between consecutive bifurcations
  double bifurcation_angle_deg = 70.0;
  double hop_exclusion_factor = 2.0;  // see clearance_hop_exclusion
  int max_step_retries = 12;
  int max_restarts = 6;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

/// Small trees in a 64^3 volume, used by tests and the desk-scale runs.
GrowthConfig toy_growth_config();

/// Number of tree hops within which two segments are exempt from the
/// clearance rule. Two segments h hops apart can be no more than about
/// h * step apart along the tree, so the exemption grows with the radii.
int clearance_hop_exclusion(const GrowthConfig& cfg, double radius_a, double radius_b);

struct GrowthResult {
  tree::CenterlineTree tree;
  bool reached_target = false;  // false: the largest tree grown is returned
  int restarts = 0;
};

GrowthResult generate_tree(const GrowthConfig& cfg);

struct RenderConfig {
  double foreground = 0.8;
  double background = 0.1;
  double noise_std = 0.05;
  double blur_sigma = 0.8;
};

/// Thresholded distance-to-centerline occupancy, blurred and noised.
/// Throws std::invalid_argument naming the first node outside the volume.
Volume render_volume(const tree::CenterlineTree& tree, std::array<int, 3> shape, const RenderConfig& cfg,
                     std::uint64_t seed);

/// Binary occupancy before blur and noise (foreground/background levels).
Volume rasterize_tree(const tree::CenterlineTree& tree, std::array<int, 3> shape, const RenderConfig& cfg);

/// In-place separable Gaussian blur with replicated borders.
void gaussian_blur(Volume& v, double sigma);

struct DatasetConfig {
  GrowthConfig growth;
  RenderConfig render;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
};

struct ManifestEntry {
  std::string split;
  std::string id;
  std::string graph_path;   // relative to the dataset directory
  std::string volume_path;  // relative to the dataset directory
  std::uint64_t seed = 0;
  int root_id = 0;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> warnings;

  std::vector<ManifestEntry> split(const std::string& name) const;
  bool operator==(const Manifest& o) const { return entries == o.entries; }
};

inline constexpr const char* kManifestName = "manifest.txt";
inline constexpr const char* kIncompleteMarker = ".incomplete";

/// Writes paired `.trex`/`.tvol` files and `manifest.txt`. A `.incomplete`
/// marker exists while writing; rerunning over a marked directory only
/// regenerates missing files.
Manifest make_dataset(int n_train, int n_val, int n_test, const DatasetConfig& cfg, const std::string& out_dir);

std::string format_manifest(const Manifest& m);
Manifest parse_manifest(const std::string& text);
Manifest read_manifest(const std::string& dataset_dir);

}  // namespace trex::synth
