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

// Centerline tree data model shared by every stage of the pipeline.
//
// A tree is stored parent-pointer style: each node knows its parent id and
// the child lists are rebuilt on demand by `TreeIndex`. Node ids only need to
// be unique; `canonicalize` renumbers them densely in breadth-first order,
// which is also the order of the `.trex` text format.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trex/common.hpp"

namespace trex::tree {

inline constexpr int kNoParent = -1;
inline constexpr int kMaxOutDegree = 3;
inline constexpr double kMinSpacing = 0.25;
inline constexpr double kMaxSpacing = 2.0;

struct Node {
  int id = 0;
  Vec3 position{};
  double radius = 0.0;
  int parent_id = kNoParent;

  bool operator==(const Node&) const = default;
};

enum class NodeClass { End, Intermediate, Bifurcation };

inline NodeClass classify_out_degree(std::size_t out_degree) {
  if (out_degree == 0) return NodeClass::End;
  if (out_degree == 1) return NodeClass::Intermediate;
  return NodeClass::Bifurcation;
}

const char* to_string(NodeClass c);

struct CenterlineTree {
  std::vector<Node> nodes;
  int root_id = 0;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  bool operator==(const CenterlineTree&) const = default;
};

enum class ViolationKind {
  MissingRoot,
  MultipleRoots,
  RootMismatch,
  DuplicateId,
  DanglingParent,
  Cycle,
  Disconnected,
  Degree,
  Spacing,
  NonFinite,
  NegativeRadius,
};

const char* to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  int node_id;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind k) const;
  bool structural_ok() const;  // ignores spacing and degree
  std::string summary() const;
};

/// Lists every violated invariant. Never throws; malformed input produces a
/// report.
ValidationReport validate_tree(const CenterlineTree& tree);

class InvalidTreeError : public std::runtime_error {
 public:
  explicit InvalidTreeError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Index-based adjacency of a structurally valid tree. Positions in the
/// `nodes` vector are used throughout ("index"), never ids.
struct TreeIndex {
  std::vector<int> parent;                 // index of parent, -1 for root
  std::vector<std::vector<int>> children;  // child indices in ascending id order
  int root = 0;

  /// Throws InvalidTreeError on structural violations (cycle, dangling parent,
  /// disconnected nodes, root problems).
  static TreeIndex build(const CenterlineTree& tree);

  std::size_t out_degree(int idx) const { return children[idx].size(); }
  NodeClass node_class(int idx) const { return classify_out_degree(children[idx].size()); }
  /// Node indices in breadth-first order from the root.
  std::vector<int> bfs_order() const;
};

/// Dense ids 0..N-1 in BFS order, children visited in ascending original id.
CenterlineTree canonicalize(const CenterlineTree& tree);

enum class BranchStart { Root, Bifurcation };
enum class BranchEnd { Bifurcation, End };

struct Branch {
  std::vector<int> node_ids;  // includes the start node, so consecutive ids are edges
  BranchStart start = BranchStart::Root;
  BranchEnd end = BranchEnd::End;
};

/// Maximal branches partitioning the edge set. A lone root yields a single
/// one-node branch. Structural violations raise InvalidTreeError.
std::vector<Branch> decompose_branches(const CenterlineTree& tree);

using Edge = std::pair<int, int>;

struct BettiNumbers {
  int b0 = 0;
  int b1 = 0;
  bool operator==(const BettiNumbers&) const = default;
};

/// Betti-0/Betti-1 of a simple undirected graph: duplicate edges collapse and
/// self-loops are ignored. Throws std::out_of_range for bad endpoints.
BettiNumbers betti_numbers(int node_count, const std::vector<Edge>& edges);

/// Canonical string of the tree with runs of intermediate nodes contracted,
/// labelled by node class. Two trees have equal signatures exactly when their
/// branch structures are isomorphic as rooted, class-labelled trees.
std::string topology_signature(const CenterlineTree& tree);

/// Undirected graph with node attributes, for predictions that need not be trees.
struct Graph {
  std::vector<Vec3> positions;
  std::vector<double> radii;
  std::vector<Edge> edges;
};

Graph to_graph(const CenterlineTree& tree);

/// `.trex` text encoding. Serialization canonicalizes the tree first.
std::string serialize_tree(const CenterlineTree& tree);
CenterlineTree deserialize_tree(std::string_view text);

void write_tree_file(const std::string& path, const CenterlineTree& tree);
CenterlineTree read_tree_file(const std::string& path);

}  // namespace trex::tree
