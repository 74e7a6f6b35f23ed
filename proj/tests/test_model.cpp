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

#include <cmath>
#include <set>

#include "test_support.hpp"
#include "trex/model.hpp"

using namespace trex;
using namespace trex::model;
using ag::Tensor;
using ag::Var;
using trex::testing::blob_field;
using trex::testing::tiny_model_config;

namespace {

Var constant_crop(int size, double v) { return ag::constant(Tensor({1, size, size, size}, v)); }

bool all_finite(const Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

double cosine(const double* a, const double* b, int n) {
  double ab = 0, aa = 0, bb = 0;
  for (int i = 0; i < n; ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.attention_heads = 5;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("model.attention_heads"), ConfigError);
  c = ModelConfig{};
  c.focal_size = 32;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("model.focal_size"), ConfigError);
  c = ModelConfig{};
  c.context_size = 31;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.bifurcation_query_count = 25;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  auto j = ModelConfig{}.to_json();
  CHECK(ModelConfig::from_json(j) == ModelConfig{});
  j["embed_dims"] = 3;
  CHECK_THROWS_WITH_AS(ModelConfig::from_json(j), doctest::Contains("embed_dims"), ConfigError);
}

TEST_CASE("default geometry selects 4096 of 32768 cells and zero input stays finite") {
  const ModelConfig c;
  Model m(c, 1);
  ag::NoGradGuard ng;
  const Var f = m.extract_features(constant_crop(65, 0.0));
  CHECK(f.shape() == ag::Shape{32768, 96});
  CHECK(all_finite(f.value()));
  const Encoded e = m.focal_token_select(f);
  CHECK(e.focal_cells == 16);
  CHECK(e.tokens.shape() == ag::Shape{4096, 96});
  CHECK(e.token_centers.size() == 4096);
  // every selected centre lies inside the focal cube, every other cell outside
  int inside = 0;
  for (int i = 0; i < 32; ++i) inside += std::abs(2.0 * i + 0.5 - 32) <= 16.0;
  CHECK(inside == 16);
  for (const Vec3& p : e.token_centers)
    for (double v : p) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("focal size equal to context size selects every cell") {
  ModelConfig c = tiny_model_config();
  c.focal_size = c.context_size;
  Model m(c, 2);
  ag::NoGradGuard ng;
  const Encoded e = m.encode(constant_crop(17, 0.5));
  CHECK(e.focal_cells == c.grid_size());
  CHECK(e.tokens.shape()[0] == c.grid_size() * c.grid_size() * c.grid_size());
}

TEST_CASE("fca off feeds the focal crop and keeps every cell") {
  const ModelConfig c = tiny_model_config(false);
  Model m(c, 3);
  ag::NoGradGuard ng;
  CHECK_THROWS_AS(m.extract_features(constant_crop(17, 0.0)), std::invalid_argument);
  const Encoded e = m.encode(constant_crop(9, 0.0));
  CHECK(e.focal_cells == 4);
  CHECK(e.tokens.shape()[0] == 64);
}

TEST_CASE("translating the input by one stride translates interior features") {
  ModelConfig c = tiny_model_config();
  c.context_size = 33;
  c.focal_size = 17;
  c.embed_dim = 16;
  c.channels = {6, 8, 8};
  Model m(c, 4);
  Rng rng(11);
  const int S = 33, G = 16, E = c.embed_dim;
  const Tensor big = blob_field(S + 2, rng, 10);
  Tensor a({1, S, S, S}), b({1, S, S, S});
  for (int x = 0; x < S; ++x)
    for (int y = 0; y < S; ++y)
      for (int z = 0; z < S; ++z) {
        a[(static_cast<std::size_t>(x) * S + y) * S + z] = big[(static_cast<std::size_t>(x) * (S + 2) + y) * (S + 2) + z];
        b[(static_cast<std::size_t>(x) * S + y) * S + z] =
            big[(static_cast<std::size_t>(x + 2) * (S + 2) + y) * (S + 2) + z];
      }
  ag::NoGradGuard ng;
  Tensor fa = m.extract_features(ag::constant(a)).value();
  Tensor fb = m.extract_features(ag::constant(b)).value();
  // remove the per-channel mean so the shared bias direction does not
  // dominate the cosine
  for (Tensor* f : {&fa, &fb})
    for (int ch = 0; ch < E; ++ch) {
      double mu = 0.0;
      for (int r = 0; r < G * G * G; ++r) mu += f->at(r, ch);
      mu /= G * G * G;
      for (int r = 0; r < G * G * G; ++r) f->at(r, ch) -= mu;
    }
  auto mean_cosine = [&](int lag) {
    double mean = 0.0;
    int n = 0;
    for (int i = 4; i < G - 4; ++i)
      for (int j = 4; j < G - 4; ++j)
        for (int k = 4; k < G - 4; ++k) {
          mean += cosine(fb.data() + ((i * G + j) * G + k) * E, fa.data() + (((i + lag) * G + j) * G + k) * E, E);
          ++n;
        }
    return mean / n;
  };
  // b is a shifted by two voxels along x, so b's cell i is a's cell i+1
  const double aligned = mean_cosine(1), misaligned = mean_cosine(0);
  MESSAGE("shift cosine aligned " << aligned << " misaligned " << misaligned);
  CHECK(aligned > 0.9);
  CHECK(aligned > misaligned + 0.05);
}

TEST_CASE("past trajectory token") {
  Model m(tiny_model_config(), 5);
  ag::NoGradGuard ng;
  std::vector<Vec3> path;
  std::vector<double> radii;
  for (int i = 0; i < 10; ++i) {
    path.push_back({-0.1 * i, 0.02 * i * i, 0.0});
    radii.push_back(0.1 + 0.01 * i);
  }
  const Tensor t1 = m.embed_past_trajectory(path, radii).value();
  CHECK(t1 == m.embed_past_trajectory(path, radii).value());
  CHECK(t1.shape() == ag::Shape{1, 12});
  auto rev = path;
  std::reverse(rev.begin(), rev.end());
  CHECK_FALSE(t1 == m.embed_past_trajectory(rev, radii).value());
  CHECK(m.embed_past_trajectory({path[0]}, {radii[0]}).shape() == ag::Shape{1, 12});
  CHECK(m.embed_past_trajectory({}, {}).value() == m.params().get("past.start").value());
  CHECK_THROWS_AS(m.embed_past_trajectory(std::vector<Vec3>(11), std::vector<double>(11)), std::invalid_argument);
}

TEST_CASE("decode step: cardinality, coupling, bounds, determinism") {
  const ModelConfig c = tiny_model_config();
  Model m(c, 6);
  Rng rng(7);
  ag::NoGradGuard ng;
  const Encoded e = m.encode(ag::constant(blob_field(17, rng)));
  auto random_query = [&](double spread) {
    return ag::constant(nn::uniform_tensor({1, c.embed_dim}, spread, rng));
  };
  const Var q0 = random_query(1.0), q1 = random_query(1.0);
  const QueryInput in0{{0.1, -0.2, 0.3}, {1, 0, 0}}, in1{{-0.4, 0.0, 0.2}, {0, 1, 0}};

  const StepOutput one = m.decode_step({q0}, {in0}, e);
  CHECK(one.layers.size() == 2);
  CHECK(one.final().logits.shape() == ag::Shape{1, 4});
  CHECK(one.final().offset.shape() == ag::Shape{1, 3});
  CHECK(one.final().radius.shape() == ag::Shape{1, 1});
  CHECK(one.embedding.shape() == ag::Shape{1, 12});
  CHECK(all_finite(one.final().logits.value()));

  // self-attention couples queries: adding a duplicate changes query 0's output
  const StepOutput two = m.decode_step({q0, q1}, {in0, in1}, e);
  const StepOutput dup = m.decode_step({q0, q1, q1}, {in0, in1, in1}, e);
  double diff = 0.0;
  for (int k = 0; k < 4; ++k) diff += std::abs(two.final().logits.value().at(0, k) - dup.final().logits.value().at(0, k));
  CHECK(diff > 1e-9);

  // bitwise determinism
  const StepOutput again = m.decode_step({q0, q1}, {in0, in1}, e);
  CHECK(again.final().logits.value() == two.final().logits.value());
  CHECK(again.embedding.value() == two.embedding.value());

  CHECK_THROWS_AS(m.decode_step({}, {}, e), std::invalid_argument);
  std::vector<Var> many(c.max_queries + 1, q0);
  std::vector<QueryInput> many_in(c.max_queries + 1, in0);
  CHECK_THROWS_AS(m.decode_step(many, many_in, e), std::invalid_argument);
  many.pop_back();
  many_in.pop_back();
  CHECK(m.decode_step(many, many_in, e).final().logits.shape()[0] == c.max_queries);

  // arbitrary (large) inputs keep offsets in [-1, 1] and radii >= 0
  std::vector<Var> wild;
  std::vector<QueryInput> wild_in;
  for (int i = 0; i < 40; ++i) {
    wild.push_back(random_query(1e3));
    wild_in.push_back({{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)}, {0, 0, 0}});
  }
  const StepOutput w = m.decode_step(wild, wild_in, e);
  for (double v : w.final().offset.value().values()) CHECK(std::abs(v) <= 1.0);
  for (double v : w.final().radius.value().values()) CHECK(v >= 0.0);
  for (int q = 0; q < 40; ++q) {
    const double len = std::hypot(w.final().offset.value().at(q, 0), w.final().offset.value().at(q, 1),
                                  w.final().offset.value().at(q, 2)) * c.focal_half();
    CHECK(len >= 0.5 - 1e-9);
    CHECK(len <= 1.5 + 1e-9);
  }
}

TEST_CASE("bifurcation spawning yields 26 distinct queries") {
  Model m(tiny_model_config(), 8);
  const Var parent = ag::constant(Tensor({1, 12}, 0.3));
  const auto q = m.spawn_bifurcation_queries(parent);
  REQUIRE(q.size() == 26);
  double min_d = 1e300;
  for (int i = 0; i < 26; ++i)
    for (int j = i + 1; j < 26; ++j) {
      double d = 0;
      for (int k = 0; k < 12; ++k) d += std::pow(q[i].value()[k] - q[j].value()[k], 2);
      min_d = std::min(min_d, std::sqrt(d));
    }
  CHECK(min_d > 0.0);
}

TEST_CASE("same seed, same parameters; names are unique") {
  Model a(tiny_model_config(), 9), b(tiny_model_config(), 9), c(tiny_model_config(), 10);
  CHECK(a.params().hash() == b.params().hash());
  CHECK(a.params().hash() != c.params().hash());
  std::set<std::string> names;
  for (const auto& [name, p] : a.params().entries()) CHECK(names.insert(name).second);
  CHECK(names.count("head.class.w"));
  CHECK(names.count("spawn.directions"));
}

TEST_CASE("focal cross-attention gradient reaches context voxels but nothing beyond") {
  const ModelConfig c = tiny_model_config();
  Model m(c, 12);
  Rng rng(13);
  const int V = 27;  // volume larger than the 17^3 context crop
  Var volume = Var::parameter(blob_field(V, rng));
  const std::array<int, 3> center{13, 13, 13};
  const Encoded e = m.encode(ag::crop3d(volume, center, c.context_size));
  const StepOutput out = m.decode_step({m.embed_past_trajectory({}, {})}, {{{0, 0, 0}, {0, 0, 0}}}, e);
  ag::backward(ag::sum(out.final().logits));
  const Tensor& g = volume.grad();
  const int ch = (c.context_size - 1) / 2, fh = (c.focal_size - 1) / 2;
  double outside_focal = 0.0, outside_context = 0.0;
  for (int x = 0; x < V; ++x)
    for (int y = 0; y < V; ++y)
      for (int z = 0; z < V; ++z) {
        const int d = std::max({std::abs(x - center[0]), std::abs(y - center[1]), std::abs(z - center[2])});
        const double v = std::abs(g[(static_cast<std::size_t>(x) * V + y) * V + z]);
        if (d > ch) outside_context += v;
        else if (d > fh) outside_focal += v;
      }
  CHECK(outside_focal > 0.0);
  CHECK(outside_context == 0.0);
}
