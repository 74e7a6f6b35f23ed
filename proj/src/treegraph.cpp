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
#include "trex/treegraph.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace trex::tree {

const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::End: return "end";
    case NodeClass::Intermediate: return "intermediate";
    case NodeClass::Bifurcation: return "bifurcation";
  }
  return "?";
}

const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::MissingRoot: return "missing-root";
    case ViolationKind::MultipleRoots: return "multiple-roots";
    case ViolationKind::RootMismatch: return "root-mismatch";
    case ViolationKind::DuplicateId: return "duplicate-id";
    case ViolationKind::DanglingParent: return "dangling-parent";
    case ViolationKind::Cycle: return "cycle";
    case ViolationKind::Disconnected: return "disconnected";
    case ViolationKind::Degree: return "degree";
    case ViolationKind::Spacing: return "spacing";
    case ViolationKind::NonFinite: return "non-finite";
    case ViolationKind::NegativeRadius: return "negative-radius";
  }
  return "?";
}

std::size_t ValidationReport::count(ViolationKind k) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; }));
}

bool ValidationReport::structural_ok() const {
  return std::all_of(violations.begin(), violations.end(), [](const Violation& v) {
    return v.kind == ViolationKind::Spacing || v.kind == ViolationKind::Degree;
  });
}

std::string ValidationReport::summary() const {
  if (ok()) return "valid";
  std::ostringstream os;
  os << violations.size() << " violation(s)";
  const std::size_t shown = std::min<std::size_t>(violations.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& v = violations[i];
    os << "; " << to_string(v.kind) << " at node " << v.node_id;
    if (!v.detail.empty()) os << " (" << v.detail << ")";
  }
  if (shown < violations.size()) os << "; ...";
  return os.str();
}

InvalidTreeError::InvalidTreeError(ValidationReport report)
    : std::runtime_error("invalid centerline tree: " + report.summary()), report_(std::move(report)) {}

namespace {

bool finite(const Vec3& p) { return std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]); }

}  // namespace

ValidationReport validate_tree(const CenterlineTree& tree) {
  ValidationReport report;
  auto add = [&](ViolationKind k, int id, std::string detail = {}) {
    report.violations.push_back({k, id, std::move(detail)});
  };
  const auto& nodes = tree.nodes;
  const int n = static_cast<int>(nodes.size());
  if (n == 0) {
    add(ViolationKind::MissingRoot, kNoParent, "empty node list");
    return report;
  }

  std::unordered_map<int, int> index_of;
  index_of.reserve(nodes.size());
  for (int i = 0; i < n; ++i) {
    const Node& node = nodes[i];
    if (!finite(node.position) || !std::isfinite(node.radius)) add(ViolationKind::NonFinite, node.id);
    if (node.radius < 0.0) add(ViolationKind::NegativeRadius, node.id);
    if (!index_of.emplace(node.id, i).second) add(ViolationKind::DuplicateId, node.id);
  }

  std::vector<int> roots;
  for (int i = 0; i < n; ++i)
    if (nodes[i].parent_id == kNoParent) roots.push_back(i);
  int root = -1;
  if (roots.empty()) {
    add(ViolationKind::MissingRoot, tree.root_id, "no node without a parent");
  } else {
    root = roots.front();
    for (int r : roots)
      if (nodes[r].id == tree.root_id) root = r;
    if (roots.size() > 1) add(ViolationKind::MultipleRoots, tree.root_id, std::to_string(roots.size()) + " roots");
    if (nodes[root].id != tree.root_id) add(ViolationKind::RootMismatch, tree.root_id);
  }

  // parent index per node; -2 marks a dangling reference
  std::vector<int> parent(n, -1);
  for (int i = 0; i < n; ++i) {
    const int pid = nodes[i].parent_id;
    if (pid == kNoParent) continue;
    auto it = index_of.find(pid);
    if (it == index_of.end()) {
      parent[i] = -2;
      add(ViolationKind::DanglingParent, nodes[i].id, "parent " + std::to_string(pid));
    } else {
      parent[i] = it->second;
    }
  }

  // 0 unvisited, 1 on the current walk, 2 reaches the root, 3 does not
  std::vector<char> state(n, 0);
  std::vector<char> in_cycle(n, 0);
  std::vector<int> walk;
  for (int start = 0; start < n; ++start) {
    if (state[start] != 0) continue;
    walk.clear();
    int cur = start;
    char outcome = 3;
    while (true) {
      if (state[cur] == 2 || state[cur] == 3) {
        outcome = state[cur];
        break;
      }
      if (state[cur] == 1) {
        // closed a loop: mark the members from `cur` onwards
        auto pos = std::find(walk.begin(), walk.end(), cur);
        for (auto it = pos; it != walk.end(); ++it) in_cycle[*it] = 1;
        add(ViolationKind::Cycle, nodes[cur].id, std::to_string(walk.end() - pos) + " node loop");
        outcome = 3;
        break;
      }
      state[cur] = 1;
      walk.push_back(cur);
      const int p = parent[cur];
      if (p == -1) {
        outcome = (cur == root) ? 2 : 3;
        break;
      }
      if (p == -2) {
        outcome = 3;
        break;
      }
      cur = p;
    }
    for (int w : walk) state[w] = outcome;
  }
  for (int i = 0; i < n; ++i) {
    if (state[i] == 3 && !in_cycle[i] && parent[i] != -2 && !(parent[i] == -1 && i != root && roots.size() > 1))
      add(ViolationKind::Disconnected, nodes[i].id);
  }

  std::vector<int> out_degree(n, 0);
  for (int i = 0; i < n; ++i)
    if (parent[i] >= 0) ++out_degree[parent[i]];
  for (int i = 0; i < n; ++i) {
    if (out_degree[i] > kMaxOutDegree)
      add(ViolationKind::Degree, nodes[i].id, "out-degree " + std::to_string(out_degree[i]));
    if (parent[i] >= 0) {
      const double d = distance(nodes[i].position, nodes[parent[i]].position);
      if (!(d > kMinSpacing && d < kMaxSpacing)) add(ViolationKind::Spacing, nodes[i].id, "distance " + std::to_string(d));
    }
  }
  return report;
}

TreeIndex TreeIndex::build(const CenterlineTree& tree) {
  const auto& nodes = tree.nodes;
  const int n = static_cast<int>(nodes.size());
  TreeIndex index;
  index.parent.assign(n, -1);
  index.children.assign(n, {});

  // Fast path: dense ids equal to positions, as produced by every stage here.
  bool dense = n > 0;
  for (int i = 0; i < n && dense; ++i) {
    const int p = nodes[i].parent_id;
    dense = nodes[i].id == i && (p == kNoParent ? i == tree.root_id : (p >= 0 && p < n && p != i));
  }
  if (dense) {
    int roots = 0;
    for (int i = 0; i < n; ++i) {
      index.parent[i] = nodes[i].parent_id;
      if (nodes[i].parent_id == kNoParent) ++roots;
      else index.children[nodes[i].parent_id].push_back(i);
    }
    index.root = tree.root_id;
    // Reachability check: BFS must visit every node.
    if (roots == 1 && index.bfs_order().size() == static_cast<std::size_t>(n)) return index;
  }

  ValidationReport report = validate_tree(tree);
  if (!report.structural_ok()) throw InvalidTreeError(std::move(report));

  std::unordered_map<int, int> index_of;
  for (int i = 0; i < n; ++i) index_of.emplace(nodes[i].id, i);
  index.children.assign(n, {});
  for (int i = 0; i < n; ++i) {
    if (nodes[i].parent_id == kNoParent) {
      index.root = i;
      index.parent[i] = -1;
    } else {
      index.parent[i] = index_of.at(nodes[i].parent_id);
      index.children[index.parent[i]].push_back(i);
    }
  }
  for (auto& c : index.children)
    std::sort(c.begin(), c.end(), [&](int a, int b) { return nodes[a].id < nodes[b].id; });
  return index;
}

std::vector<int> TreeIndex::bfs_order() const {
  std::vector<int> order;
  order.reserve(parent.size());
  if (parent.empty()) return order;
  order.push_back(root);
  for (std::size_t head = 0; head < order.size(); ++head)
    for (int c : children[order[head]]) order.push_back(c);
  return order;
}

CenterlineTree canonicalize(const CenterlineTree& tree) {
  const TreeIndex index = TreeIndex::build(tree);
  const std::vector<int> order = index.bfs_order();
  std::vector<int> new_id(tree.nodes.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) new_id[order[k]] = static_cast<int>(k);

  CenterlineTree out;
  out.root_id = 0;
  out.nodes.reserve(order.size());
  for (int old : order) {
    const Node& src = tree.nodes[old];
    Node n = src;
    n.id = new_id[old];
    n.parent_id = index.parent[old] < 0 ? kNoParent : new_id[index.parent[old]];
    out.nodes.push_back(n);
  }
  return out;
}

std::vector<Branch> decompose_branches(const CenterlineTree& tree) {
  const TreeIndex index = TreeIndex::build(tree);
  std::vector<Branch> branches;
  const auto id = [&](int idx) { return tree.nodes[idx].id; };
  if (index.children[index.root].empty()) {
    branches.push_back({{id(index.root)}, BranchStart::Root, BranchEnd::End});
    return branches;
  }
  for (int s : index.bfs_order()) {
    const bool is_root = s == index.root;
    if (!is_root && index.out_degree(s) < 2) continue;
    for (int c : index.children[s]) {
      Branch b;
      b.start = is_root ? BranchStart::Root : BranchStart::Bifurcation;
      b.node_ids.push_back(id(s));
      int cur = c;
      while (true) {
        b.node_ids.push_back(id(cur));
        if (index.out_degree(cur) != 1) break;
        cur = index.children[cur].front();
      }
      b.end = index.out_degree(cur) == 0 ? BranchEnd::End : BranchEnd::Bifurcation;
      branches.push_back(std::move(b));
    }
  }
  return branches;
}

BettiNumbers betti_numbers(int node_count, const std::vector<Edge>& edges) {
  if (node_count < 0) throw std::out_of_range("negative node count");
  std::vector<Edge> simple;
  simple.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= node_count || b >= node_count)
      throw std::out_of_range("edge endpoint out of range: (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    if (a == b) continue;
    simple.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(simple.begin(), simple.end());
  simple.erase(std::unique(simple.begin(), simple.end()), simple.end());

  std::vector<int> parent(node_count);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  int components = node_count;
  for (auto [a, b] : simple) {
    const int ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return {components, static_cast<int>(simple.size()) - node_count + components};
}

Graph to_graph(const CenterlineTree& tree) {
  Graph g;
  std::unordered_map<int, int> index_of;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    index_of.emplace(tree.nodes[i].id, static_cast<int>(i));
    g.positions.push_back(tree.nodes[i].position);
    g.radii.push_back(tree.nodes[i].radius);
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const int p = tree.nodes[i].parent_id;
    if (p == kNoParent) continue;
    auto it = index_of.find(p);
    if (it != index_of.end()) g.edges.emplace_back(it->second, static_cast<int>(i));
  }
  return g;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(len));
}

template <typename T>
T parse_field(std::string_view tok, std::size_t line, const char* field) {
  T value{};
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError("line " + std::to_string(line) + ": field '" + field + "': cannot parse '" + std::string(tok) + "'");
  return value;
}

}  // namespace

std::string serialize_tree(const CenterlineTree& tree) {
  const CenterlineTree canon = canonicalize(tree);
  std::string out = "TREXGRAPH 1\n";
  out.reserve(out.size() + canon.nodes.size() * 96);
  for (const Node& n : canon.nodes) {
    out += std::to_string(n.id);
    out += ' ';
    out += std::to_string(n.parent_id);
    for (double v : {n.position[0], n.position[1], n.position[2], n.radius}) {
      out += ' ';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

CenterlineTree deserialize_tree(std::string_view text) {
  CenterlineTree tree;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool root_seen = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != "TREXGRAPH 1")
        throw ParseError("line " + std::to_string(line_no) + ": field 'header': expected 'TREXGRAPH 1'");
      header_seen = true;
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::string_view fields[6];
    std::size_t count = 0;
    std::size_t p = 0;
    while (p < line.size()) {
      p = line.find_first_not_of(" \t", p);
      if (p == std::string_view::npos) break;
      std::size_t q = line.find_first_of(" \t", p);
      if (q == std::string_view::npos) q = line.size();
      if (count == 6)
        throw ParseError("line " + std::to_string(line_no) + ": field 'r': unexpected trailing data");
      fields[count++] = line.substr(p, q - p);
      p = q;
    }
    static constexpr const char* kNames[6] = {"id", "parent_id", "x", "y", "z", "r"};
    if (count < 6)
      throw ParseError("line " + std::to_string(line_no) + ": field '" + kNames[count] + "': missing");
    Node n;
    n.id = parse_field<int>(fields[0], line_no, kNames[0]);
    n.parent_id = parse_field<int>(fields[1], line_no, kNames[1]);
    for (int k = 0; k < 3; ++k) n.position[k] = parse_field<double>(fields[2 + k], line_no, kNames[2 + k]);
    n.radius = parse_field<double>(fields[5], line_no, kNames[5]);
    if (n.parent_id < kNoParent)
      throw ParseError("line " + std::to_string(line_no) + ": field 'parent_id': negative id other than -1");
    if (n.parent_id == kNoParent && !root_seen) {
      tree.root_id = n.id;
      root_seen = true;
    }
    tree.nodes.push_back(n);
  }
  if (!header_seen) throw ParseError("line 1: field 'header': empty input");
  if (!root_seen) throw ParseError("line " + std::to_string(line_no) + ": missing root");
  return tree;
}

void write_tree_file(const std::string& path, const CenterlineTree& tree) {
  const std::string data = serialize_tree(tree);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

CenterlineTree read_tree_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize_tree(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string topology_signature(const CenterlineTree& tree) {
  const TreeIndex ix = TreeIndex::build(tree);
  // Walks down a run of single-child nodes to the next branch point or end.
  auto chain_end = [&](int i) {
    while (ix.out_degree(i) == 1) i = ix.children[i][0];
    return i;
  };
  std::function<std::string(int)> encode = [&](int i) {
    std::vector<std::string> parts;
    for (int c : ix.children[i]) parts.push_back(encode(chain_end(c)));
    std::sort(parts.begin(), parts.end());
    std::string s = "(";
    s += ix.out_degree(i) == 0 ? 'E' : (ix.out_degree(i) == 1 ? 'I' : 'B');
    for (const auto& p : parts) s += p;
    return s + ")";
  };
  // The root keeps its own label so a trunk of any length reads the same.
  std::string out = "R";
  out += ix.out_degree(ix.root) == 1 ? encode(chain_end(ix.children[ix.root][0])) : encode(ix.root);
  return out;
}

}  // namespace trex::tree
