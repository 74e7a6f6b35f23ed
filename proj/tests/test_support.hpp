#pragma once

// Fixture builders and brute-force oracles shared by the unit tests. Nothing
// here calls into the code path it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <vector>

#include "trex/common.hpp"
#include "trex/treegraph.hpp"

namespace trex::testing {

inline Vec3 random_direction(Rng& rng) {
  Vec3 v{rng.normal(), rng.normal(), rng.normal()};
  return normalized(v);
}

/// Straight path of `n` unit-spaced nodes along +x starting at `origin`.
inline tree::CenterlineTree path_tree(int n, Vec3 origin = {5, 5, 5}, double radius = 2.0) {
  tree::CenterlineTree t;
  for (int i = 0; i < n; ++i)
    t.nodes.push_back({i, {origin[0] + i, origin[1], origin[2]}, radius, i == 0 ? tree::kNoParent : i - 1});
  return t;
}

/// Random tree of `n` nodes with exactly `bifurcations` out-degree-2 nodes
/// (root excluded) and unit spacing. Requires n > 2 * bifurcations + 2.
inline tree::CenterlineTree random_tree(int n, int bifurcations, Rng& rng) {
  tree::CenterlineTree t;
  std::vector<int> out(n, 0);
  auto add = [&](int parent) {
    const int id = static_cast<int>(t.nodes.size());
    Vec3 pos{50, 50, 50};
    if (parent >= 0) pos = t.nodes[parent].position + random_direction(rng);
    t.nodes.push_back({id, pos, 1.0 + rng.uniform(), parent});
    if (parent >= 0) ++out[parent];
    return id;
  };
  add(tree::kNoParent);
  add(0);
  int made = 0;
  while (static_cast<int>(t.nodes.size()) < n) {
    const int remaining = n - static_cast<int>(t.nodes.size());
    const int need = bifurcations - made;
    std::vector<int> candidates;
    if (need > 0 && (remaining <= need || rng.uniform() < 0.08)) {
      for (int i = 1; i < static_cast<int>(t.nodes.size()); ++i)
        if (out[i] == 1) candidates.push_back(i);
      if (!candidates.empty()) {
        add(candidates[rng.below(candidates.size())]);
        ++made;
        continue;
      }
    }
    candidates.clear();
    for (int i = 1; i < static_cast<int>(t.nodes.size()); ++i)
      if (out[i] == 0) candidates.push_back(i);
    add(candidates[rng.below(candidates.size())]);
  }
  return t;
}

inline std::vector<int> out_degrees(const tree::CenterlineTree& t) {
  std::vector<int> out(t.nodes.size(), 0);
  for (const auto& n : t.nodes)
    if (n.parent_id >= 0) ++out[n.parent_id];
  return out;
}

/// Branch count by edge partition: an edge opens a new branch iff its parent
/// is the root or a bifurcation. Dense ids only.
inline int brute_force_branch_count(const tree::CenterlineTree& t) {
  const auto out = out_degrees(t);
  int heads = 0;
  for (const auto& n : t.nodes)
    if (n.parent_id >= 0 && (n.parent_id == t.root_id || out[n.parent_id] >= 2)) ++heads;
  return std::max(heads, 1);
}

/// Components by DFS labelling and independent cycles by counting non-tree
/// edges of a DFS spanning forest over the simple graph.
inline std::pair<int, int> brute_force_betti(int n, const std::vector<std::pair<int, int>>& edges) {
  std::set<std::pair<int, int>> simple;
  for (auto [a, b] : edges)
    if (a != b) simple.emplace(std::min(a, b), std::max(a, b));
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : simple) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> label(n, -1);
  int components = 0;
  int tree_edges = 0;
  for (int s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::vector<int> stack{s};
    label[s] = components;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (label[w] < 0) {
          label[w] = components;
          ++tree_edges;
          stack.push_back(w);
        }
    }
    ++components;
  }
  return {components, static_cast<int>(simple.size()) - tree_edges};
}

}  // namespace trex::testing

namespace trex::testing {

/// Segment distance by nested ternary search over the two (convex)
/// parameterisations; independent of the closed-form routine.
inline double ternary_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  auto inner = [&](double s) {
    const Vec3 a = p1 + (q1 - p1) * s;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 80; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (distance(a, p2 + (q2 - p2) * m1) <= distance(a, p2 + (q2 - p2) * m2)) hi = m2;
      else lo = m1;
    }
    return distance(a, p2 + (q2 - p2) * (0.5 * (lo + hi)));
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (inner(m1) <= inner(m2)) hi = m2;
    else lo = m1;
  }
  return std::min({inner(0.5 * (lo + hi)), inner(0.0), inner(1.0)});
}

/// All-pairs hop distances of a tree with dense ids, by BFS from every node.
inline std::vector<std::vector<int>> all_pairs_hops(const tree::CenterlineTree& t) {
  const int n = static_cast<int>(t.nodes.size());
  std::vector<std::vector<int>> adj(n);
  for (const auto& node : t.nodes)
    if (node.parent_id >= 0) {
      adj[node.id].push_back(node.parent_id);
      adj[node.parent_id].push_back(node.id);
    }
  std::vector<std::vector<int>> hops(n, std::vector<int>(n, -1));
  for (int s = 0; s < n; ++s) {
    std::vector<int> queue{s};
    hops[s][s] = 0;
    for (std::size_t h = 0; h < queue.size(); ++h)
      for (int w : adj[queue[h]])
        if (hops[s][w] < 0) {
          hops[s][w] = hops[s][queue[h]] + 1;
          queue.push_back(w);
        }
  }
  return hops;
}

/// Straight +x spine with a perpendicular side branch every `every` nodes,
/// cycling through +y, -y, +z, -z. Unit spacing, constant radius.
inline tree::CenterlineTree comb_tree(int spine, int every, int side, double radius = 1.0, Vec3 origin = {4, 40, 40}) {
  tree::CenterlineTree t;
  for (int i = 0; i < spine; ++i)
    t.nodes.push_back({i, {origin[0] + i, origin[1], origin[2]}, radius, i == 0 ? tree::kNoParent : i - 1});
  const Vec3 dirs[4] = {{0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  int which = 0;
  for (int j = every; j < spine - 1; j += every, ++which) {
    int parent = j;
    for (int k = 1; k <= side; ++k) {
      const int id = static_cast<int>(t.nodes.size());
      t.nodes.push_back({id, t.nodes[j].position + dirs[which % 4] * double(k), radius, parent});
      parent = id;
    }
  }
  return t;
}

inline double laplace_cdf(double x, double b) { return x < 0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b); }

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

/// Asymptotic critical value of the KS statistic at alpha = 0.01.
inline double ks_critical_001(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace trex::testing

#include "trex/model.hpp"

namespace trex::testing {

/// Smallest configuration the extractor accepts; fast enough for per-test
/// forward and backward passes.
inline model::ModelConfig tiny_model_config(bool fca = true) {
  model::ModelConfig c;
  c.embed_dim = 12;
  c.decoder_layers = 2;
  c.attention_heads = 2;
  c.focal_size = 9;
  c.context_size = 17;
  c.channels = {3, 4, 4};
  c.fca = fca;
  return c;
}

/// Smooth random field: a few Gaussian blobs over a constant floor.
inline ag::Tensor blob_field(int size, Rng& rng, int blobs = 6) {
  ag::Tensor t({1, size, size, size}, 0.1);
  for (int b = 0; b < blobs; ++b) {
    const Vec3 c{rng.uniform(0, size), rng.uniform(0, size), rng.uniform(0, size)};
    const double s = rng.uniform(2.0, 5.0), a = rng.uniform(0.3, 1.0);
    for (int x = 0; x < size; ++x)
      for (int y = 0; y < size; ++y)
        for (int z = 0; z < size; ++z) {
          const double d2 = (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]) + (z - c[2]) * (z - c[2]);
          t[(static_cast<std::size_t>(x) * size + y) * size + z] += a * std::exp(-d2 / (2 * s * s));
        }
  }
  return t;
}

}  // namespace trex::testing

#include "trex/sampler.hpp"
#include "trex/synthgen.hpp"
#include "trex/trainer.hpp"

namespace trex::testing {

/// Comb tree rendered into a volume that leaves room around it.
inline train::SampleData comb_sample(const std::string& id, int spine = 64, int every = 11, int side = 6,
                                     std::uint64_t seed = 1) {
  tree::CenterlineTree t = comb_tree(spine, every, side, 1.5, {4, 16, 16});
  const std::array<int, 3> shape{spine + 8, 32, 32};
  Volume v = synth::render_volume(t, shape, synth::RenderConfig{}, seed);
  return {id, sample::IndexedTree(std::move(t)), std::move(v)};
}

// Number of segment pairs violating clearance, checked exhaustively.
inline int clearance_violations(const tree::CenterlineTree& t, const synth::GrowthConfig& cfg) {
  const auto hops = all_pairs_hops(t);
  std::vector<int> segs;
  for (const auto& n : t.nodes)
    if (n.parent_id >= 0) segs.push_back(n.id);
  int bad = 0;
  for (std::size_t i = 0; i < segs.size(); ++i)
    for (std::size_t j = i + 1; j < segs.size(); ++j) {
      const auto& a1 = t.nodes[segs[i]];
      const auto& a0 = t.nodes[a1.parent_id];
      const auto& b1 = t.nodes[segs[j]];
      const auto& b0 = t.nodes[b1.parent_id];
      const double ra = std::max(a0.radius, a1.radius), rb = std::max(b0.radius, b1.radius);
      const int hop = std::min({hops[a0.id][b0.id], hops[a0.id][b1.id], hops[a1.id][b0.id], hops[a1.id][b1.id]});
      if (hop <= synth::clearance_hop_exclusion(cfg, ra, rb)) continue;
      const double need = cfg.clearance_factor * (ra + rb);
      if (distance(a0.position, b0.position) > need + 2.5 * cfg.step_length) continue;
      if (ternary_segment_distance(a0.position, a1.position, b0.position, b1.position) < need - 1e-9) ++bad;
    }
  return bad;
}

/// Field-by-field equality of two target sets.
inline bool same_targets(const sample::TrajectoryTargets& a, const sample::TrajectoryTargets& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (int s = 0; s < sample::kStepsPerSub; ++s) {
      const auto& x = a[k].steps[s];
      const auto& y = b[k].steps[s];
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].cls != y[i].cls || x[i].offset != y[i].offset || x[i].radius != y[i].radius ||
            x[i].branch_key != y[i].branch_key || x[i].to_node != y[i].to_node)
          return false;
      }
    }
    if (a[k].spawns.size() != b[k].spawns.size()) return false;
  }
  return true;
}

}  // namespace trex::testing
