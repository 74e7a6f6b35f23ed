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

// Point-, branch- and graph-level comparison of a predicted centerline
// against ground truth, plus aggregation over samples and runs.

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trex/treegraph.hpp"

namespace trex::eval {

inline constexpr double kMatchRadius = 1.5;
inline constexpr double kBranchCoverage = 0.8;

/// Fixed-radius neighbour queries over a static point set.
class PointGrid {
 public:
  PointGrid(const std::vector<Vec3>& points, double cell);
  /// Indices of points within `radius` of `p` (radius <= cell), unordered.
  void within(const Vec3& p, double radius, std::vector<int>& out) const;
  bool any_within(const Vec3& p, double radius) const;

 private:
  const std::vector<Vec3>* points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
  std::uint64_t key(long x, long y, long z) const;
};

struct PointMatchResult {
  std::vector<std::pair<int, int>> pairs;  // (pred id, gt id)
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;
};

/// Greedy matching: predicted nodes in BFS order each claim the nearest
/// unclaimed ground-truth node within `radius` (ties: lower node index).
PointMatchResult match_points(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt,
                              double radius = kMatchRadius);

struct PointMetrics {
  int tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double radius_mae = 0.0;  // over matched pairs, 0 when none
};

PointMetrics point_metrics(const PointMatchResult& match, const tree::CenterlineTree& pred,
                           const tree::CenterlineTree& gt);

struct BranchMetrics {
  int tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// Predicted branches, longest first, each claim the unclaimed ground-truth
/// branch they cover best, provided at least `coverage` of its points lie
/// within `radius` of the predicted branch.
BranchMetrics branch_metrics(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt,
                             double radius = kMatchRadius, double coverage = kBranchCoverage);

struct GraphMetrics {
  int betti0_err = 0;
  int betti1_err = 0;
};

GraphMetrics graph_metrics(const tree::Graph& pred, const tree::Graph& gt);
GraphMetrics graph_metrics(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt);

struct SampleMetrics {
  std::string id;
  PointMetrics point;
  BranchMetrics branch;
  GraphMetrics graph;
  bool missing_prediction = false;
};

SampleMetrics evaluate_sample(const std::string& id, const tree::CenterlineTree& pred, const tree::CenterlineTree& gt);

/// Ordered (name, value) pairs; the order is the report column order.
using MetricRow = std::vector<std::pair<std::string, double>>;

/// Dataset-level metrics: means over samples (F1 etc. as fractions).
MetricRow summarize(const std::vector<SampleMetrics>& samples);

struct MeanStd {
  std::string name;
  double mean = 0.0;
  double std = 0.0;  // unbiased, 0 for a single run
};

/// Throws std::invalid_argument when runs disagree on metric names or order,
/// or when `runs` is empty.
std::vector<MeanStd> aggregate_runs(const std::vector<MetricRow>& runs);

struct Report {
  std::vector<SampleMetrics> samples;
  MetricRow summary;
  std::vector<std::string> warnings;
};

nlohmann::ordered_json report_to_json(const Report& r);
/// Aligned text table: precision, recall, F1 (percent, 2 decimals), radius
/// MAE, branch F1, Betti errors.
std::string format_table(const MetricRow& summary);
std::string format_table(const std::vector<MeanStd>& aggregate);
std::string per_sample_csv(const std::vector<SampleMetrics>& samples);
MetricRow metric_row_from_json(const nlohmann::ordered_json& j);

/// Three orthogonal projections (xy, xz, yz) of ground truth and prediction
/// as an SVG document; marker radius is proportional to node radius.
std::string projection_svg(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt, const std::string& title);

}  // namespace trex::eval
