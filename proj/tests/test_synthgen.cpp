#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "test_support.hpp"
#include "trex/synthgen.hpp"

using namespace trex;
using namespace trex::synth;
namespace fs = std::filesystem;
using trex::testing::clearance_violations;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("trex_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("generate_tree: no bifurcations gives a single branch") {
  GrowthConfig cfg = toy_growth_config();
  cfg.bifurcation_prob_per_step = 0.0;
  cfg.target_point_count = 40;
  cfg.seed = 3;
  const auto t = generate_tree(cfg).tree;
  CHECK(tree::validate_tree(t).ok());
  CHECK(tree::decompose_branches(t).size() == 1);
}

TEST_CASE("generate_tree: deterministic given the seed") {
  GrowthConfig cfg = toy_growth_config();
  cfg.seed = 77;
  CHECK(tree::serialize_tree(generate_tree(cfg).tree) == tree::serialize_tree(generate_tree(cfg).tree));
  GrowthConfig other = cfg;
  other.seed = 78;
  CHECK(tree::serialize_tree(generate_tree(other).tree) != tree::serialize_tree(generate_tree(cfg).tree));
}

TEST_CASE("generate_tree: 50 default trees pass validation and the all-pairs clearance oracle") {
  int reached = 0;
  for (int s = 0; s < 50; ++s) {
    GrowthConfig cfg;
    cfg.seed = 1000 + s;
    const auto result = generate_tree(cfg);
    const auto& t = result.tree;
    reached += result.reached_target;
    INFO("seed " << cfg.seed);
    CHECK(tree::validate_tree(t).ok());
    CHECK(clearance_violations(t, cfg) == 0);
    for (const auto& n : t.nodes) {
      if (n.parent_id >= 0) CHECK(n.radius <= t.nodes[n.parent_id].radius + 1e-6);
      for (int k = 0; k < 3; ++k) {
        CHECK(n.position[k] >= n.radius);
        CHECK(n.position[k] <= cfg.volume_shape[k] - 1 - n.radius);
      }
    }
  }
  CHECK(reached >= 45);
}

TEST_CASE("generate_tree: config validation names the field") {
  GrowthConfig cfg;
  cfg.radius_decay = 1.5;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("radius_decay"), ConfigError);
  cfg = GrowthConfig{};
  cfg.volume_shape = {16, 64, 64};
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("volume_shape"), ConfigError);
}

TEST_CASE("generate_tree: unreachable target returns the largest tree with a flag") {
  GrowthConfig cfg = toy_growth_config();
  cfg.volume_shape = {32, 32, 32};
  cfg.target_point_count = 20000;
  cfg.max_restarts = 1;
  const auto r = generate_tree(cfg);
  CHECK_FALSE(r.reached_target);
  CHECK(r.tree.size() > 10);
  CHECK(tree::validate_tree(r.tree).ok());
}

TEST_CASE("render_volume: straight tube cross-section") {
  tree::CenterlineTree t;
  for (int i = 0; i < 30; ++i) t.nodes.push_back({i, {20, 20, 5.0 + i}, 3.0, i == 0 ? -1 : i - 1});
  RenderConfig rc;
  rc.noise_std = 0.0;
  for (double blur : {0.0, 0.8}) {
    rc.blur_sigma = blur;
    const Volume v = render_volume(t, {40, 40, 40}, rc, 1);
    // Analytic cylinder: voxel x is inside iff |x - 20| <= 3, i.e. 7 voxel centres.
    int across = 0;
    for (int x = 0; x < 40; ++x) across += v.at(x, 20, 20) >= 0.5f;
    INFO("blur " << blur);
    CHECK(across >= 5);
    CHECK(across <= 7);
  }
}

TEST_CASE("render_volume: zero noise and blur yields a binary volume; far field sits at background") {
  GrowthConfig cfg = toy_growth_config();
  cfg.seed = 5;
  const auto t = generate_tree(cfg).tree;
  RenderConfig rc;
  rc.noise_std = 0.0;
  rc.blur_sigma = 0.0;
  const Volume v = render_volume(t, cfg.volume_shape, rc, 9);
  for (float x : v.voxels) CHECK((x == 0.1f || x == 0.8f));

  rc.noise_std = 0.05;
  rc.blur_sigma = 0.8;
  const Volume noisy = render_volume(t, cfg.volume_shape, rc, 9);
  for (int x = 0; x < 64; ++x)
    for (int y = 0; y < 64; ++y)
      for (int z = 0; z < 64; ++z) {
        double nearest = 1e9;
        for (const auto& n : t.nodes) nearest = std::min(nearest, distance(n.position, Vec3{1.0 * x, 1.0 * y, 1.0 * z}) - n.radius);
        if (nearest > 6.0) CHECK(std::abs(noisy.at(x, y, z) - 0.1f) <= 5 * 0.05f + 1e-6f);
      }
  CHECK(render_volume(t, cfg.volume_shape, rc, 9) == noisy);
}

TEST_CASE("render_volume: enlarging radii never lowers pre-noise intensity") {
  GrowthConfig cfg = toy_growth_config();
  cfg.seed = 8;
  auto t = generate_tree(cfg).tree;
  RenderConfig rc;
  Volume a = rasterize_tree(t, cfg.volume_shape, rc);
  gaussian_blur(a, rc.blur_sigma);
  for (auto& n : t.nodes) n.radius += 0.4;
  Volume b = rasterize_tree(t, cfg.volume_shape, rc);
  gaussian_blur(b, rc.blur_sigma);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.voxels[i] >= a.voxels[i] - 1e-6f);
}

TEST_CASE("render_volume: out-of-bounds node is named") {
  auto t = testing::path_tree(5);
  t.nodes[3].position = {100, 5, 5};
  CHECK_THROWS_WITH_AS(render_volume(t, {32, 32, 32}, RenderConfig{}, 0), doctest::Contains("node 3"),
                       std::invalid_argument);
}

TEST_CASE("volume format round-trips bitwise") {
  Volume v({33, 34, 35});
  Rng rng(4);
  for (float& x : v.voxels) x = static_cast<float>(rng.uniform());
  const std::string bytes = serialize_volume(v);
  CHECK(bytes.substr(0, 8) == "TREXVOL1");
  CHECK(bytes.size() == 8 + 12 + v.size() * 4);
  CHECK(deserialize_volume(bytes) == v);
  CHECK(serialize_volume(deserialize_volume(bytes)) == bytes);
  CHECK_THROWS_AS(deserialize_volume(bytes.substr(0, bytes.size() - 1)), ParseError);
  CHECK_THROWS_AS(deserialize_volume("TREXVOL2"), ParseError);
}

TEST_CASE("make_dataset: toy splits, manifest, reproducibility and resume") {
  const fs::path dir = scratch_dir("dataset");
  DatasetConfig cfg;
  cfg.growth = toy_growth_config();
  cfg.master_seed = 42;
  const Manifest m = make_dataset(4, 1, 1, cfg, dir.string());
  CHECK(m.entries.size() == 6);
  CHECK(m.split("train").size() == 4);
  CHECK(m.split("val").size() == 1);
  CHECK(m.split("test").size() == 1);
  CHECK_FALSE(fs::exists(dir / kIncompleteMarker));
  for (const auto& e : m.entries) {
    CHECK(fs::exists(dir / e.graph_path));
    CHECK(fs::exists(dir / e.volume_path));
    CHECK(tree::validate_tree(tree::read_tree_file((dir / e.graph_path).string())).ok());
  }
  CHECK(read_manifest(dir.string()) == m);

  const std::string manifest_bytes = slurp(dir / kManifestName);
  const std::string graph0 = slurp(dir / m.entries[0].graph_path);
  const std::string vol0 = slurp(dir / m.entries[0].volume_path);

  const fs::path again = scratch_dir("dataset_again");
  make_dataset(4, 1, 1, cfg, again.string());
  CHECK(fnv1a(slurp(again / kManifestName)) == fnv1a(manifest_bytes));
  for (const auto& e : m.entries) {
    CHECK(slurp(again / e.graph_path) == slurp(dir / e.graph_path));
    CHECK(slurp(again / e.volume_path) == slurp(dir / e.volume_path));
  }

  // interrupted run: marker left behind and one file missing
  { std::ofstream(dir / kIncompleteMarker) << "x"; }
  fs::remove(dir / m.entries[0].volume_path);
  make_dataset(4, 1, 1, cfg, dir.string());
  CHECK_FALSE(fs::exists(dir / kIncompleteMarker));
  CHECK(slurp(dir / m.entries[0].volume_path) == vol0);
  CHECK(slurp(dir / m.entries[0].graph_path) == graph0);

  fs::remove_all(dir);
  fs::remove_all(again);
}
