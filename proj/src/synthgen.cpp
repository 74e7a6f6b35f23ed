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
#include "trex/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "trex/geometry.hpp"
#include "trex/parallel.hpp"

namespace trex::synth {

namespace fs = std::filesystem;

void GrowthConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("growth." + field + ": " + why); };
  for (int k = 0; k < 3; ++k)
    if (volume_shape[k] < 32) fail("volume_shape", "each dimension must be >= 32");
  if (target_point_count < 1) fail("target_point_count", "must be positive");
  if (!(root_radius > 0.0)) fail("root_radius", "must be positive");
  if (!(radius_decay > 0.0 && radius_decay <= 1.0)) fail("radius_decay", "must lie in (0, 1]");
  if (!(bifurcation_prob_per_step >= 0.0 && bifurcation_prob_per_step <= 1.0))
    fail("bifurcation_prob_per_step", "must lie in [0, 1]");
  if (!(min_radius > 0.0 && min_radius <= root_radius)) fail("min_radius", "must lie in (0, root_radius]");
  if (max_out_degree < 2 || max_out_degree > tree::kMaxOutDegree) fail("max_out_degree", "must be 2 or 3");
  if (!(clearance_factor >= 1.0)) fail("clearance_factor", "must be >= 1");
  if (!(step_length > tree::kMinSpacing && step_length < tree::kMaxSpacing)) fail("step_length", "must lie in (0.25, 2)");
  if (!(tortuosity >= 0.0)) fail("tortuosity", "must be >= 0");
  if (min_branch_length < 1) fail("min_branch_length", "must be positive");
  if (!(bifurcation_angle_deg > 0.0 && bifurcation_angle_deg < 180.0)) fail("bifurcation_angle_deg", "must lie in (0, 180)");
  if (!(hop_exclusion_factor >= 0.0)) fail("hop_exclusion_factor", "must be >= 0");
  if (max_step_retries < 1) fail("max_step_retries", "must be positive");
  if (max_restarts < 0) fail("max_restarts", "must be >= 0");
  const double margin = 2.0 * root_radius + 2.0;
  for (int k = 0; k < 3; ++k)
    if (volume_shape[k] <= margin) fail("volume_shape", "too small for root_radius");
}

GrowthConfig toy_growth_config() {
  GrowthConfig c;
  c.volume_shape = {64, 64, 64};
  c.target_point_count = 160;
  c.root_radius = 2.5;
  c.radius_decay = 0.8;
  c.bifurcation_prob_per_step = 0.06;
  c.min_radius = 1.5;
  c.max_out_degree = 2;
  c.tortuosity = 0.12;
  c.min_branch_length = 10;
  return c;
}

int clearance_hop_exclusion(const GrowthConfig& cfg, double radius_a, double radius_b) {
  const double reach = cfg.hop_exclusion_factor * cfg.clearance_factor * (radius_a + radius_b) / cfg.step_length;
  return std::max(3, static_cast<int>(std::ceil(reach)));
}

namespace {

// Rodrigues rotation of v about unit axis k.
Vec3 rotate(const Vec3& v, const Vec3& k, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return v * c + cross(k, v) * s + k * (dot(k, v) * (1.0 - c));
}

Vec3 random_unit(Rng& rng) {
  Vec3 v{rng.normal(), rng.normal(), rng.normal()};
  return normalized(v);
}

class Grower {
 public:
  Grower(const GrowthConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        rng_(seed),
        cell_(2.0 * cfg.root_radius),
        max_hops_(clearance_hop_exclusion(cfg, cfg.root_radius, cfg.root_radius)) {}

  tree::CenterlineTree grow() {
    place_root();
    while (!tips_.empty() && static_cast<int>(nodes_.size()) < cfg_.target_point_count) {
      Tip tip = tips_.front();
      tips_.pop_front();
      advance(tip);
    }
    tree::CenterlineTree t;
    t.nodes = std::move(nodes_);
    t.root_id = 0;
    return t;
  }

 private:
  struct Tip {
    int node;
    Vec3 dir;
    int since_bifurcation;
  };

  void place_root() {
    const int axis = static_cast<int>(rng_.below(3));
    const bool high = rng_.below(2) == 1;
    Vec3 pos{};
    for (int k = 0; k < 3; ++k) pos[k] = rng_.uniform(0.35, 0.65) * (cfg_.volume_shape[k] - 1);
    pos[axis] = high ? cfg_.volume_shape[axis] - 2.0 - cfg_.root_radius : cfg_.root_radius + 1.0;
    Vec3 dir{};
    dir[axis] = high ? -1.0 : 1.0;
    add_node(pos, cfg_.root_radius, tree::kNoParent);
    tips_.push_back({0, dir, cfg_.min_branch_length / 2});
  }

  int add_node(const Vec3& pos, double radius, int parent) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({id, pos, radius, parent});
    neighbours_.emplace_back();
    if (parent != tree::kNoParent) {
      neighbours_[parent].push_back(id);
      neighbours_[id].push_back(parent);
      grid_[cell_key(midpoint(id))].push_back(id);
    }
    hops_.push_back(-1);
    return id;
  }

  Vec3 midpoint(int child) const {
    return (nodes_[child].position + nodes_[nodes_[child].parent_id].position) * 0.5;
  }

  std::int64_t cell_key(const Vec3& p) const {
    auto c = [&](int k) { return static_cast<std::int64_t>(std::floor(p[k] / cell_)) + (1 << 20); };
    return (c(0) << 42) | (c(1) << 21) | c(2);
  }

  // Bounded BFS over the tree from `from`; fills hops_ for reached nodes.
  void mark_hops(int from) {
    for (int v : touched_) hops_[v] = -1;
    touched_.clear();
    hops_[from] = 0;
    touched_.push_back(from);
    for (std::size_t head = 0; head < touched_.size(); ++head) {
      const int v = touched_[head];
      if (hops_[v] >= max_hops_) continue;
      for (int w : neighbours_[v]) {
        if (hops_[w] >= 0) continue;
        hops_[w] = hops_[v] + 1;
        touched_.push_back(w);
      }
    }
  }

  int hop_of(int v) const { return hops_[v] < 0 ? max_hops_ + 1 : hops_[v]; }

  bool inside(const Vec3& p, double r) const {
    for (int k = 0; k < 3; ++k)
      if (p[k] < r || p[k] > cfg_.volume_shape[k] - 1 - r) return false;
    return true;
  }

  // Clearance of a prospective segment parent -> q against every existing
  // segment more than the exempt number of hops away. Assumes mark_hops(parent).
  bool clear(int parent, const Vec3& q, double seg_radius) const {
    const Vec3& p = nodes_[parent].position;
    const Vec3 mid = (p + q) * 0.5;
    const double reach = cfg_.clearance_factor * (seg_radius + cfg_.root_radius) + cfg_.step_length;
    const int span = static_cast<int>(std::ceil(reach / cell_));
    const auto base = [&](int k) { return static_cast<std::int64_t>(std::floor(mid[k] / cell_)) + (1 << 20); };
    const std::int64_t bx = base(0), by = base(1), bz = base(2);
    for (std::int64_t dx = -span; dx <= span; ++dx)
      for (std::int64_t dy = -span; dy <= span; ++dy)
        for (std::int64_t dz = -span; dz <= span; ++dz) {
          auto it = grid_.find(((bx + dx) << 42) | ((by + dy) << 21) | (bz + dz));
          if (it == grid_.end()) continue;
          for (int child : it->second) {
            const int up = nodes_[child].parent_id;
            const double r_other = std::max(nodes_[child].radius, nodes_[up].radius);
            const int hop = std::min(hop_of(child), hop_of(up));
            if (hop <= clearance_hop_exclusion(cfg_, seg_radius, r_other)) continue;
            const double need = cfg_.clearance_factor * (seg_radius + r_other);
            if (geom::segment_distance(p, q, nodes_[up].position, nodes_[child].position) < need) return false;
          }
        }
    return true;
  }

  Vec3 steer(const Vec3& pos, const Vec3& dir, double noise) {
    Vec3 centre{};
    double boundary = 1e9;
    for (int k = 0; k < 3; ++k) {
      centre[k] = 0.5 * (cfg_.volume_shape[k] - 1);
      boundary = std::min({boundary, pos[k], cfg_.volume_shape[k] - 1 - pos[k]});
    }
    const double pull = boundary < cfg_.root_radius + 6.0 ? 0.5 : 0.04;
    const Vec3 jitter{rng_.normal(), rng_.normal(), rng_.normal()};
    return normalized(dir + jitter * noise + normalized(centre - pos) * pull);
  }

  bool try_bifurcate(Tip& tip) {
    const tree::Node& at = nodes_[tip.node];
    const double child_radius = cfg_.radius_decay * at.radius;
    if (tip.since_bifurcation < cfg_.min_branch_length || child_radius < cfg_.min_radius) return false;
    if (!(rng_.uniform() < cfg_.bifurcation_prob_per_step)) return false;
    int count = 2;
    if (cfg_.max_out_degree >= 3 && rng_.uniform() < 0.2) count = 3;
    if (static_cast<int>(nodes_.size()) + count > cfg_.target_point_count) return false;

    const double half_angle = 0.5 * cfg_.bifurcation_angle_deg * M_PI / 180.0;
    mark_hops(tip.node);
    for (int attempt = 0; attempt < cfg_.max_step_retries; ++attempt) {
      const Vec3 axis0 = normalized(cross(tip.dir, random_unit(rng_)));
      std::vector<Vec3> dirs, points;
      bool ok = true;
      for (int j = 0; j < count && ok; ++j) {
        const Vec3 axis = rotate(axis0, tip.dir, 2.0 * M_PI * j / count);
        const Vec3 d = normalized(rotate(tip.dir, axis, half_angle));
        const Vec3 q = at.position + d * cfg_.step_length;
        ok = inside(q, child_radius) && clear(tip.node, q, at.radius);
        dirs.push_back(d);
        points.push_back(q);
      }
      // children of one bifurcation are mutually exempt (they share a node)
      if (!ok) continue;
      for (int j = 0; j < count; ++j) {
        const int id = add_node(points[j], child_radius, tip.node);
        tips_.push_back({id, dirs[j], 0});
      }
      return true;
    }
    return false;
  }

  void advance(Tip tip) {
    if (try_bifurcate(tip)) return;
    const tree::Node& at = nodes_[tip.node];
    const double radius = at.radius;
    const Vec3 pos = at.position;
    mark_hops(tip.node);
    for (int attempt = 0; attempt < cfg_.max_step_retries; ++attempt) {
      const double noise = cfg_.tortuosity * (1.0 + 0.6 * attempt);
      const Vec3 d = steer(pos, tip.dir, noise);
      if (dot(d, tip.dir) < 0.2) continue;  // no sharp turns
      const Vec3 q = pos + d * cfg_.step_length;
      if (!inside(q, radius) || !clear(tip.node, q, radius)) continue;
      const int id = add_node(q, radius, tip.node);
      tips_.push_back({id, d, tip.since_bifurcation + 1});
      return;
    }
    // the tip becomes a leaf
  }

  const GrowthConfig& cfg_;
  Rng rng_;
  double cell_;
  int max_hops_;
  std::vector<tree::Node> nodes_;
  std::vector<std::vector<int>> neighbours_;
  std::unordered_map<std::int64_t, std::vector<int>> grid_;
  std::deque<Tip> tips_;
  std::vector<int> hops_;
  std::vector<int> touched_;
};

}  // namespace

GrowthResult generate_tree(const GrowthConfig& cfg) {
  cfg.validate();
  GrowthResult best;
  for (int attempt = 0; attempt <= cfg.max_restarts; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt));
    tree::CenterlineTree t = Grower(cfg, seed).grow();
    const bool reached = static_cast<int>(t.size()) >= cfg.target_point_count;
    if (attempt == 0 || t.size() > best.tree.size()) {
      best.tree = std::move(t);
      best.restarts = attempt;
    }
    if (reached) {
      best.reached_target = true;
      break;
    }
  }
  return best;
}

Volume rasterize_tree(const tree::CenterlineTree& tree, std::array<int, 3> shape, const RenderConfig& cfg) {
  Volume v(shape, static_cast<float>(cfg.background));
  for (const auto& node : tree.nodes) {
    if (!v.contains(node.position))
      throw std::invalid_argument("node " + std::to_string(node.id) + " lies outside the volume");
  }
  const float fg = static_cast<float>(cfg.foreground);
  for (const auto& node : tree.nodes) {
    const double r = node.radius;
    int lo[3], hi[3];
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::max(0, static_cast<int>(std::floor(node.position[k] - r)));
      hi[k] = std::min(shape[k] - 1, static_cast<int>(std::ceil(node.position[k] + r)));
    }
    const double r2 = r * r;
    for (int x = lo[0]; x <= hi[0]; ++x) {
      const double dx = x - node.position[0];
      for (int y = lo[1]; y <= hi[1]; ++y) {
        const double dy = y - node.position[1];
        for (int z = lo[2]; z <= hi[2]; ++z) {
          const double dz = z - node.position[2];
          if (dx * dx + dy * dy + dz * dz <= r2) v.at(x, y, z) = fg;
        }
      }
    }
  }
  return v;
}

void gaussian_blur(Volume& v, double sigma) {
  if (!(sigma > 0.0)) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& k : kernel) k /= total;

  const int n[3] = {v.shape[0], v.shape[1], v.shape[2]};
  std::vector<double> line, out;
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3, b = (axis + 2) % 3;
    line.resize(n[axis]);
    out.resize(n[axis]);
    for (int i = 0; i < n[a]; ++i)
      for (int j = 0; j < n[b]; ++j) {
        int c[3];
        c[a] = i;
        c[b] = j;
        for (int t = 0; t < n[axis]; ++t) {
          c[axis] = t;
          line[t] = v.at(c[0], c[1], c[2]);
        }
        for (int t = 0; t < n[axis]; ++t) {
          double s = 0.0;
          for (int o = -radius; o <= radius; ++o) s += kernel[o + radius] * line[std::clamp(t + o, 0, n[axis] - 1)];
          out[t] = s;
        }
        for (int t = 0; t < n[axis]; ++t) {
          c[axis] = t;
          v.at(c[0], c[1], c[2]) = static_cast<float>(out[t]);
        }
      }
  }
}

Volume render_volume(const tree::CenterlineTree& tree, std::array<int, 3> shape, const RenderConfig& cfg,
                     std::uint64_t seed) {
  Volume v = rasterize_tree(tree, shape, cfg);
  gaussian_blur(v, cfg.blur_sigma);
  if (cfg.noise_std > 0.0) {
    Rng rng(seed);
    for (float& x : v.voxels) x = static_cast<float>(x + cfg.noise_std * rng.normal());
  }
  for (float& x : v.voxels) x = std::clamp(x, 0.0f, 1.0f);
  return v;
}

std::vector<ManifestEntry> Manifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == name) out.push_back(e);
  return out;
}

std::string format_manifest(const Manifest& m) {
  std::ostringstream os;
  for (const auto& e : m.entries)
    os << e.split << ' ' << e.id << ' ' << e.graph_path << ' ' << e.volume_path << ' ' << e.seed << ' ' << e.root_id
       << '\n';
  return os.str();
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!(ls >> e.split >> e.id >> e.graph_path >> e.volume_path >> e.seed >> e.root_id))
      throw ParseError("manifest line " + std::to_string(line_no) + ": expected 'split id graph_path volume_path seed root_id'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest read_manifest(const std::string& dataset_dir) {
  const fs::path path = fs::path(dataset_dir) / kManifestName;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("no manifest at '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

namespace {

void write_atomically(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace

Manifest make_dataset(int n_train, int n_val, int n_test, const DatasetConfig& cfg, const std::string& out_dir) {
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ConfigError("dataset split sizes must be non-negative");
  cfg.growth.validate();
  const fs::path root(out_dir);
  fs::create_directories(root / "graphs");
  fs::create_directories(root / "volumes");
  const fs::path marker = root / kIncompleteMarker;
  const bool resuming = fs::exists(marker);
  { std::ofstream(marker) << "generation in progress\n"; }

  Manifest manifest;
  const std::pair<const char*, int> splits[] = {{"train", n_train}, {"val", n_val}, {"test", n_test}};
  for (auto [name, count] : splits) {
    for (int i = 0; i < count; ++i) {
      ManifestEntry e;
      e.split = name;
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04d", name, i);
      e.id = id;
      e.graph_path = "graphs/" + e.id + ".trex";
      e.volume_path = "volumes/" + e.id + ".tvol";
      e.seed = derive_seed(cfg.master_seed, manifest.entries.size());
      manifest.entries.push_back(std::move(e));
    }
  }

  std::vector<std::string> warnings(manifest.entries.size());
  parallel_for(manifest.entries.size(), cfg.workers, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    const fs::path graph = root / e.graph_path;
    const fs::path volume = root / e.volume_path;
    if (resuming && fs::exists(graph) && fs::exists(volume)) return;
    GrowthConfig g = cfg.growth;
    g.seed = e.seed;
    GrowthResult grown = generate_tree(g);
    if (!grown.reached_target)
      warnings[i] = e.id + ": grew " + std::to_string(grown.tree.size()) + " of " +
                    std::to_string(g.target_point_count) + " target points";
    const Volume v = render_volume(grown.tree, g.volume_shape, cfg.render, derive_seed(e.seed, 0x5eedULL));
    write_atomically(graph, tree::serialize_tree(grown.tree));
    write_atomically(volume, serialize_volume(v));
  });
  for (auto& w : warnings)
    if (!w.empty()) manifest.warnings.push_back(std::move(w));
  // every generated tree is canonical with root id 0
  write_atomically(root / kManifestName, format_manifest(manifest));
  fs::remove(marker);
  return manifest;
}

}  // namespace trex::synth
