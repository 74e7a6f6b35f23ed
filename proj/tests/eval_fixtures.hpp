#pragma once

// Hand-constructed prediction/ground-truth pairs and quadratic-time oracles
// for the evaluation metrics. The oracles share no code with the metric
// implementation: their own BFS, their own branch split, their own search.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "trex/treegraph.hpp"

namespace trex::testing {

struct EvalFixture {
  std::string name;
  tree::CenterlineTree pred, gt;
};

/// Node indices in breadth-first order, children by ascending id.
inline std::vector<int> oracle_bfs(const tree::CenterlineTree& t) {
  std::vector<int> order;
  if (t.nodes.empty()) return order;
  int root = 0;
  for (std::size_t i = 0; i < t.nodes.size(); ++i)
    if (t.nodes[i].parent_id < 0) root = static_cast<int>(i);
  order.push_back(root);
  for (std::size_t h = 0; h < order.size(); ++h) {
    std::vector<std::pair<int, int>> kids;
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
      if (t.nodes[i].parent_id == t.nodes[order[h]].id) kids.emplace_back(t.nodes[i].id, static_cast<int>(i));
    std::sort(kids.begin(), kids.end());
    for (auto [id, i] : kids) order.push_back(i);
  }
  return order;
}

struct OraclePoint {
  int tp = 0;
  double radius_abs_sum = 0.0;
};

inline OraclePoint oracle_point_match(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt, double r = 1.5) {
  OraclePoint o;
  std::vector<char> taken(gt.nodes.size(), 0);
  for (int p : oracle_bfs(pred)) {
    int best = -1;
    for (std::size_t g = 0; g < gt.nodes.size(); ++g) {
      if (taken[g]) continue;
      const double d = distance(pred.nodes[p].position, gt.nodes[g].position);
      if (d > r) continue;
      if (best < 0 || d < distance(pred.nodes[p].position, gt.nodes[best].position)) best = static_cast<int>(g);
    }
    if (best >= 0) {
      taken[best] = 1;
      ++o.tp;
      o.radius_abs_sum += std::abs(pred.nodes[p].radius - gt.nodes[best].radius);
    }
  }
  return o;
}

/// Branches as node-index lists: every edge leaving the root or a node with
/// two or more children opens one. Ordered by first child index (which is
/// breadth-first order for canonical trees).
inline std::vector<std::vector<int>> oracle_branches(const tree::CenterlineTree& t) {
  std::vector<std::vector<int>> out;
  if (t.nodes.empty()) return out;
  const int n = static_cast<int>(t.nodes.size());
  std::vector<std::vector<int>> kids(n);
  int root = 0;
  for (int i = 0; i < n; ++i) {
    if (t.nodes[i].parent_id < 0) root = i;
    for (int j = 0; j < n; ++j)
      if (t.nodes[j].parent_id == t.nodes[i].id) kids[i].push_back(j);
  }
  if (kids[root].empty()) return {{root}};
  std::vector<std::pair<int, std::vector<int>>> keyed;
  for (int s = 0; s < n; ++s) {
    if (s != root && kids[s].size() < 2) continue;
    for (int c : kids[s]) {
      std::vector<int> b{s, c};
      while (kids[b.back()].size() == 1) b.push_back(kids[b.back()][0]);
      keyed.emplace_back(c, b);
    }
  }
  std::sort(keyed.begin(), keyed.end());
  for (auto& [k, b] : keyed) out.push_back(b);
  return out;
}

struct OracleBranch {
  int tp = 0, fp = 0, fn = 0;
};

inline OracleBranch oracle_branch_match(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt, double r = 1.5,
                                        double cov = 0.8) {
  const auto pb = oracle_branches(pred), gb = oracle_branches(gt);
  std::vector<int> order(pb.size());
  for (std::size_t i = 0; i < pb.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pb[a].size() > pb[b].size(); });
  std::vector<char> claimed(gb.size(), 0);
  OracleBranch o;
  for (int b : order) {
    int best = -1;
    double best_cov = -1;
    for (std::size_t g = 0; g < gb.size(); ++g) {
      if (claimed[g]) continue;
      int covered = 0;
      for (int q : gb[g]) {
        bool hit = false;
        for (int p : pb[b]) hit = hit || distance(gt.nodes[q].position, pred.nodes[p].position) <= r;
        covered += hit;
      }
      const double c = double(covered) / double(gb[g].size());
      if (c >= cov && c > best_cov) {
        best = static_cast<int>(g);
        best_cov = c;
      }
    }
    if (best >= 0) {
      claimed[best] = 1;
      ++o.tp;
    } else {
      ++o.fp;
    }
  }
  o.fn = static_cast<int>(gb.size()) - o.tp;
  return o;
}

inline tree::CenterlineTree polyline(const std::vector<Vec3>& pts, double radius = 1.0, int first_id = 0,
                                     int parent = tree::kNoParent) {
  tree::CenterlineTree t;
  for (std::size_t i = 0; i < pts.size(); ++i)
    t.nodes.push_back({first_id + static_cast<int>(i), pts[i], radius, i == 0 ? parent : first_id + int(i) - 1});
  return t;
}

/// Appends a chain hanging off node id `parent`.
inline void add_chain(tree::CenterlineTree& t, int parent, Vec3 start, Vec3 step, int n, double radius = 1.0) {
  for (int i = 0; i < n; ++i) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.push_back({id, start + step * double(i), radius, parent});
    parent = id;
  }
}

inline tree::CenterlineTree y_shape(Vec3 o = {5, 20, 20}, int trunk = 8, int arm = 6, bool left = true, bool right = true) {
  tree::CenterlineTree t = path_tree(trunk, o, 1.5);
  const Vec3 fork = t.nodes.back().position;
  if (left) add_chain(t, trunk - 1, fork + Vec3{0.7, 0.7, 0}, {0.7, 0.7, 0}, arm);
  if (right) add_chain(t, trunk - 1, fork + Vec3{0.7, -0.7, 0}, {0.7, -0.7, 0}, arm);
  return t;
}

inline tree::CenterlineTree shifted(tree::CenterlineTree t, Vec3 d) {
  for (auto& n : t.nodes) n.position = n.position + d;
  return t;
}

inline std::vector<EvalFixture> eval_fixtures() {
  std::vector<EvalFixture> f;
  Rng rng(2024);
  const auto line10 = path_tree(10);
  f.push_back({"identity_path", line10, line10});
  f.push_back({"single_point_2.0_apart", polyline({{7, 5, 5}}), polyline({{5, 5, 5}})});
  f.push_back({"single_point_1.5_apart", polyline({{6.5, 5, 5}}), polyline({{5, 5, 5}})});
  {
    auto p = line10;
    add_chain(p, 9, {14, 5, 5}, {1, 0, 0}, 10);  // ten spurious nodes beyond the end
    f.push_back({"spurious_half", p, line10});
  }
  {
    auto p = line10;
    for (auto& n : p.nodes) n.radius += 0.3;
    f.push_back({"radius_plus_0.3", p, line10});
  }
  f.push_back({"empty_prediction", tree::CenterlineTree{}, line10});
  f.push_back({"covers_7_of_10", path_tree(6), line10});
  {
    tree::CenterlineTree dup = polyline({{4, 5, 5}});
    add_chain(dup, 0, {5, 5.3, 5}, {1, 0, 0}, 10);
    add_chain(dup, 0, {5, 4.7, 5}, {1, 0, 0}, 10);
    tree::CenterlineTree gt = path_tree(11, {4, 5, 5});
    f.push_back({"duplicate_branches", dup, gt});
  }
  f.push_back({"y_identity", y_shape(), y_shape()});
  f.push_back({"y_missing_arm", y_shape({5, 20, 20}, 8, 6, true, false), y_shape()});
  f.push_back({"shift_1.0", shifted(y_shape(), {0, 1.0, 0}), y_shape()});
  f.push_back({"shift_1.6", shifted(y_shape(), {0, 0, 1.6}), y_shape()});
  const auto comb = comb_tree(30, 6, 5);
  f.push_back({"comb_identity", comb, comb});
  f.push_back({"comb_short_sides", comb_tree(30, 6, 2), comb});
  f.push_back({"comb_trunk_only", path_tree(30, {4, 40, 40}), comb});
  {
    auto j = comb;
    for (auto& n : j.nodes) n.position = n.position + Vec3{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), 0};
    f.push_back({"comb_jitter", j, comb});
  }
  {
    tree::CenterlineTree dense = polyline({{5, 5, 5}});
    add_chain(dense, 0, {5.5, 5, 5}, {0.5, 0, 0}, 18);
    f.push_back({"dense_resampling", dense, line10});
  }
  {
    auto rt = random_tree(60, 4, rng);
    auto jt = rt;
    for (auto& n : jt.nodes) n.position = n.position + random_direction(rng) * 0.6;
    f.push_back({"random_jitter", jt, rt});
    f.push_back({"random_vs_other", random_tree(60, 4, rng), rt});
  }
  f.push_back({"reverse_roles", y_shape(), y_shape({5, 20, 20}, 8, 6, true, false)});
  for (auto& x : f) {
    if (!x.pred.empty()) x.pred = tree::canonicalize(x.pred);
    x.gt = tree::canonicalize(x.gt);
  }
  return f;
}

}  // namespace trex::testing
