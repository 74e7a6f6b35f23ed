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
#include "trex/model.hpp"

#include <cmath>
#include <stdexcept>

namespace trex::model {

using ag::Tensor;
using ag::Var;

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("model." + field + ": " + why); };
  if (embed_dim <= 0) fail("embed_dim", "must be positive");
  if (attention_heads <= 0 || embed_dim % attention_heads != 0) fail("attention_heads", "must divide embed_dim");
  if (decoder_layers <= 0) fail("decoder_layers", "must be positive");
  if (focal_size < 5 || focal_size % 2 == 0) fail("focal_size", "must be an odd integer >= 5");
  if (context_size % 2 == 0 || context_size < focal_size) fail("context_size", "must be odd and >= focal_size");
  if (feature_stride != 2) fail("feature_stride", "only stride 2 is supported");
  const int g = grid_size();
  if (g < 4 || g % 4 != 0) fail(fca ? "context_size" : "focal_size", "(size - 1) / 2 must be a positive multiple of 4");
  if (bifurcation_query_count != 26) fail("bifurcation_query_count", "must be 26 (one per neighbour direction)");
  if (max_queries < bifurcation_query_count) fail("max_queries", "must be >= bifurcation_query_count");
  if (class_count != 4) fail("class_count", "must be 4 (End, Intermediate, Bifurcation, Discard)");
  for (int c : channels)
    if (c <= 0) fail("channels", "must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"embed_dim", embed_dim},
          {"decoder_layers", decoder_layers},
          {"attention_heads", attention_heads},
          {"focal_size", focal_size},
          {"context_size", context_size},
          {"feature_stride", feature_stride},
          {"bifurcation_query_count", bifurcation_query_count},
          {"max_queries", max_queries},
          {"class_count", class_count},
          {"channels", channels},
          {"fca", fca}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  ModelConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "embed_dim") c.embed_dim = v.get<int>();
      else if (key == "decoder_layers") c.decoder_layers = v.get<int>();
      else if (key == "attention_heads") c.attention_heads = v.get<int>();
      else if (key == "focal_size") c.focal_size = v.get<int>();
      else if (key == "context_size") c.context_size = v.get<int>();
      else if (key == "feature_stride") c.feature_stride = v.get<int>();
      else if (key == "bifurcation_query_count") c.bifurcation_query_count = v.get<int>();
      else if (key == "max_queries") c.max_queries = v.get<int>();
      else if (key == "class_count") c.class_count = v.get<int>();
      else if (key == "channels") c.channels = v.get<std::array<int, 3>>();
      else if (key == "fca") c.fca = v.get<bool>();
      else throw ConfigError("model." + key + ": unknown key");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("model." + key + ": " + e.what());
    }
  }
  return c;
}

std::vector<double> positional_encoding(const Vec3& p, int dim) {
  std::vector<double> out(dim, 0.0);
  const int freqs = dim / 6;
  int k = 0;
  for (int a = 0; a < 3; ++a)
    for (int f = 0; f < freqs; ++f) {
      const double w = 0.5 * M_PI * std::ldexp(1.0, f);
      out[k++] = std::sin(w * p[a]);
      out[k++] = std::cos(w * p[a]);
    }
  return out;
}

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  const int E = cfg_.embed_dim;
  const auto [c0, c1, c2] = cfg_.channels;
  patchify_ = nn::Conv3d::make(params_, "extractor.patchify", 1, c0, 2, 2, 0, rng);
  down1_ = nn::Conv3d::make(params_, "extractor.down1", c0, c1, 2, 2, 0, rng);
  conv1_ = nn::Conv3d::make(params_, "extractor.conv1", c1, c1, 3, 1, 1, rng);
  down2_ = nn::Conv3d::make(params_, "extractor.down2", c1, c2, 2, 2, 0, rng);
  conv2_ = nn::Conv3d::make(params_, "extractor.conv2", c2, c2, 3, 1, 1, rng);
  lateral2_ = nn::Conv3d::make(params_, "extractor.lateral2", c2, c1, 1, 1, 0, rng);
  upconv1_ = nn::Conv3d::make(params_, "extractor.upconv1", c1, c1, 3, 1, 1, rng);
  lateral1_ = nn::Conv3d::make(params_, "extractor.lateral1", c1, c0, 1, 1, 0, rng);
  head_ = nn::Conv3d::make(params_, "extractor.head", c0, E, 1, 1, 0, rng);

  query_in_ = nn::Linear::make(params_, "query.input", E + 3 + E, E, rng);
  past1_ = nn::Linear::make(params_, "past.l1", 5 * 10, E, rng);
  past2_ = nn::Linear::make(params_, "past.l2", E, E, rng);
  start_token_ = params_.add("past.start", nn::uniform_tensor({1, E}, 0.1, rng));
  spawn_dirs_ = params_.add("spawn.directions", nn::uniform_tensor({cfg_.bifurcation_query_count, E}, 1.0, rng));

  for (int l = 0; l < cfg_.decoder_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l) + ".";
    DecoderLayer d;
    d.sa_q = nn::Linear::make(params_, p + "self.q", E, E, rng);
    d.sa_k = nn::Linear::make(params_, p + "self.k", E, E, rng);
    d.sa_v = nn::Linear::make(params_, p + "self.v", E, E, rng);
    d.sa_o = nn::Linear::make(params_, p + "self.out", E, E, rng);
    d.ln1 = nn::LayerNorm::make(params_, p + "norm1", E);
    d.ca_q = nn::Linear::make(params_, p + "cross.q", E, E, rng);
    d.ca_k = nn::Linear::make(params_, p + "cross.k", E, E, rng);
    d.ca_v = nn::Linear::make(params_, p + "cross.v", E, E, rng);
    d.ca_o = nn::Linear::make(params_, p + "cross.out", E, E, rng);
    d.ln2 = nn::LayerNorm::make(params_, p + "norm2", E);
    d.ff1 = nn::Linear::make(params_, p + "ffn.l1", E, 2 * E, rng);
    d.ff2 = nn::Linear::make(params_, p + "ffn.l2", 2 * E, E, rng);
    d.ln3 = nn::LayerNorm::make(params_, p + "norm3", E);
    layers_.push_back(d);
  }
  cls_ = nn::Linear::make(params_, "head.class", E, cfg_.class_count, rng);
  off1_ = nn::Linear::make(params_, "head.offset.l1", E, E, rng);
  off2_ = nn::Linear::make(params_, "head.offset.l2", E, 4, rng);
  rad_ = nn::Linear::make(params_, "head.radius", E, 1, rng);
}

Var Model::extract_features(const Var& crop) const {
  const int S = cfg_.input_size();
  if (crop.shape() != ag::Shape{1, S, S, S})
    throw std::invalid_argument("extract_features: expected crop [1, " + std::to_string(S) + ", " + std::to_string(S) +
                                ", " + std::to_string(S) + "], got " + ag::shape_string(crop.shape()));
  using ag::relu;
  const Var e0 = relu(patchify_(crop));
  const Var e1 = relu(conv1_(relu(down1_(e0))));
  const Var e2 = relu(conv2_(relu(down2_(e1))));
  // channel reduction before upsampling; the two commute and the coarse
  // grid is cheaper. Interpolating instead of a transposed convolution keeps
  // the output free of stride-parity artefacts.
  const Var u1 = relu(upconv1_(relu(ag::add(ag::upsample2x(lateral2_(e2)), e1))));
  const Var u0 = relu(ag::add(ag::upsample2x(lateral1_(u1)), e0));
  const int G = cfg_.grid_size();
  return ag::transpose(ag::reshape(head_(u0), {cfg_.embed_dim, G * G * G}));
}

Encoded Model::focal_token_select(const Var& features) const {
  const int G = cfg_.grid_size();
  const int E = cfg_.embed_dim;
  if (features.shape() != ag::Shape{G * G * G, E})
    throw std::invalid_argument("focal_token_select: feature grid shape " + ag::shape_string(features.shape()));
  // cell i covers crop voxels 2i and 2i+1; its centre sits 2i + 0.5 - G
  // voxels from the crop centre and must lie within the focal half-width
  const double reach = cfg_.focal_half();
  int first = -1, last = -1;
  for (int i = 0; i < G; ++i) {
    if (std::abs(2.0 * i + 0.5 - G) <= reach) {
      if (first < 0) first = i;
      last = i;
    }
  }
  Encoded e;
  e.first_cell = first;
  e.focal_cells = last - first + 1;
  const int n = e.focal_cells;
  std::vector<int> rows;
  Tensor pe({n * n * n, E});
  for (int a = first; a <= last; ++a)
    for (int b = first; b <= last; ++b)
      for (int c = first; c <= last; ++c) {
        rows.push_back((a * G + b) * G + c);
        const Vec3 p{(2.0 * a + 0.5 - G) / cfg_.focal_half(), (2.0 * b + 0.5 - G) / cfg_.focal_half(),
                     (2.0 * c + 0.5 - G) / cfg_.focal_half()};
        e.token_centers.push_back(p);
        const auto enc = positional_encoding(p, E);
        std::copy(enc.begin(), enc.end(), pe.data() + (e.token_centers.size() - 1) * E);
      }
  e.features = ag::gather_rows(features, rows);
  e.tokens = ag::add_constant(e.features, pe);
  for (const DecoderLayer& d : layers_) {
    e.k_heads.push_back(nn::split_heads(d.ca_k(e.tokens), cfg_.attention_heads));
    e.v_heads.push_back(nn::split_heads(d.ca_v(e.tokens), cfg_.attention_heads));
  }
  return e;
}

Vec3 Model::grid_coordinate(const Encoded& e, const Vec3& p) const {
  const int G = cfg_.grid_size();
  Vec3 g;
  for (int k = 0; k < 3; ++k) g[k] = (p[k] * cfg_.focal_half() + G - 0.5) / 2.0 - e.first_cell;
  return g;
}

Var Model::embed_past_trajectory(const std::vector<Vec3>& positions, const std::vector<double>& radii) const {
  if (positions.empty()) return start_token_;
  if (positions.size() > 10 || radii.size() != positions.size())
    throw std::invalid_argument("embed_past_trajectory: expected 1-10 positions with matching radii");
  Tensor x({1, 50}, 0.0);
  for (std::size_t s = 0; s < positions.size(); ++s) {
    for (int k = 0; k < 3; ++k) x[5 * s + k] = positions[s][k];
    x[5 * s + 3] = radii[s];
    x[5 * s + 4] = 1.0;
  }
  return past2_(ag::relu(past1_(ag::constant(std::move(x)))));
}

HeadOutput Model::heads(const Var& h) const {
  const int Q = h.value().rows();
  HeadOutput o;
  o.logits = cls_(h);
  const Var raw = off2_(ag::relu(off1_(h)));
  const Var dir = ag::normalize_rows(ag::slice_cols(raw, 0, 3));
  const Var len = ag::add_constant(ag::scale(ag::tanh(ag::slice_cols(raw, 3, 4)), 0.5), Tensor({Q, 1}, 1.0));
  o.offset = ag::scale(ag::mul(dir, ag::concat_cols({len, len, len})), 1.0 / cfg_.focal_half());
  o.radius = ag::softplus(rad_(h));
  return o;
}

StepOutput Model::decode_step(const std::vector<Var>& embeddings, const std::vector<QueryInput>& inputs,
                              const Encoded& patch) const {
  const int Q = static_cast<int>(embeddings.size());
  if (Q == 0 || Q > cfg_.max_queries)
    throw std::invalid_argument("decode_step: " + std::to_string(Q) + " queries (allowed 1.." +
                                std::to_string(cfg_.max_queries) + ")");
  if (inputs.size() != embeddings.size()) throw std::invalid_argument("decode_step: inputs/embeddings size mismatch");
  const int E = cfg_.embed_dim;
  Tensor fixed({Q, E + 3});
  std::vector<Vec3> grid_pts;
  for (int q = 0; q < Q; ++q) {
    const auto pe = positional_encoding(inputs[q].tip, E);
    std::copy(pe.begin(), pe.end(), fixed.data() + q * (E + 3));
    for (int k = 0; k < 3; ++k) fixed.at(q, E + k) = inputs[q].prev_dir[k];
    grid_pts.push_back(grid_coordinate(patch, inputs[q].tip));
  }
  const int n = patch.focal_cells;
  const Var local = ag::trilinear_sample(patch.features, {n, n, n}, grid_pts);
  const Var emb = Q == 1 ? embeddings[0] : ag::concat_rows(embeddings);
  Var h = ag::add(emb, query_in_(ag::concat_cols({ag::constant(std::move(fixed)), local})));

  StepOutput out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DecoderLayer& d = layers_[l];
    const int H = cfg_.attention_heads;
    const Var sa = d.sa_o(nn::attention(d.sa_q(h), nn::split_heads(d.sa_k(h), H), nn::split_heads(d.sa_v(h), H)));
    h = d.ln1(ag::add(h, sa));
    const Var ca = d.ca_o(nn::attention(d.ca_q(h), patch.k_heads[l], patch.v_heads[l]));
    h = d.ln2(ag::add(h, ca));
    h = d.ln3(ag::add(h, d.ff2(ag::relu(d.ff1(h)))));
    out.layers.push_back(heads(h));
  }
  out.embedding = h;
  return out;
}

std::vector<Var> Model::spawn_bifurcation_queries(const Var& parent_embedding) const {
  std::vector<Var> out;
  for (int j = 0; j < cfg_.bifurcation_query_count; ++j)
    out.push_back(ag::add(parent_embedding, ag::slice_rows(spawn_dirs_, j, j + 1)));
  return out;
}

}  // namespace trex::model
