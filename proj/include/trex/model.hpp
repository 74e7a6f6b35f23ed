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

// The tracking network.
//
//   crop ──► U-shaped conv extractor ──► dense grid [G^3, E]
//                                           │ keep focal cells, add PE
//                                           ▼
//   queries ──► L x (self-attn, cross-attn to focal tokens, FFN) ──► heads
//      ▲                                                   │
//      └──────────── new embedding (recurrent carry) ◄─────┘
//
// With `fca` off the extractor only sees the focal crop, so every cell is a
// focal cell.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "trex/ag/ops.hpp"
#include "trex/nn.hpp"

namespace trex::model {

struct ModelConfig {
  int embed_dim = 96;
  int decoder_layers = 3;
  int attention_heads = 4;
  int focal_size = 33;
  int context_size = 65;
  int feature_stride = 2;
  int bifurcation_query_count = 26;
  int max_queries = 196;
  int class_count = 4;
  std::array<int, 3> channels{16, 32, 64};  // extractor widths per scale
  bool fca = true;

  void validate() const;
  /// Side of the crop fed to the extractor.
  int input_size() const { return fca ? context_size : focal_size; }
  int grid_size() const { return input_size() / 2; }
  double focal_half() const { return (focal_size - 1) / 2.0; }

  nlohmann::json to_json() const;
  /// Unknown keys raise ConfigError naming the key.
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

/// Focal tokens of one patch plus the per-layer key/value projections, which
/// are shared by every decode step inside the patch.
struct Encoded {
  ag::Var features;  // [T, E] focal cells, no positional encoding
  ag::Var tokens;    // [T, E] with positional encoding
  int focal_cells = 0;     // focal grid side
  int first_cell = 0;      // index of the first focal cell in the full grid
  std::vector<Vec3> token_centers;  // normalised patch coordinates
  std::vector<std::vector<ag::Var>> k_heads, v_heads;  // [layer][head]
};

struct QueryInput {
  Vec3 tip{};       // normalised patch coordinates
  Vec3 prev_dir{};  // unit direction of the last step, zero if unknown
};

struct HeadOutput {
  ag::Var logits;  // [Q, 4]
  ag::Var offset;  // [Q, 3] normalised, |step| in (0.5, 1.5) voxels
  ag::Var radius;  // [Q, 1] normalised, >= 0
};

struct StepOutput {
  std::vector<HeadOutput> layers;  // one per decoder layer, last is final
  ag::Var embedding;               // [Q, E] recurrent carry
  const HeadOutput& final() const { return layers.back(); }
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// Dense features over the whole crop, [G^3, E] with z fastest.
  /// `crop` is [1, S, S, S] with S = config().input_size().
  ag::Var extract_features(const ag::Var& crop) const;
  /// Focal cells of a dense grid plus their positional encodings.
  Encoded focal_token_select(const ag::Var& features) const;
  Encoded encode(const ag::Var& crop) const { return focal_token_select(extract_features(crop)); }

  /// Token for a branch entering its first patch: up to 10 previous
  /// positions (most recent first, normalised) and radii. Zero positions
  /// give the learned start token.
  ag::Var embed_past_trajectory(const std::vector<Vec3>& positions, const std::vector<double>& radii) const;

  /// Decodes all queries of one patch jointly. Throws std::invalid_argument
  /// for zero or more than max_queries queries.
  StepOutput decode_step(const std::vector<ag::Var>& embeddings, const std::vector<QueryInput>& inputs,
                         const Encoded& patch) const;

  /// Parent embedding plus each of the 26 learned direction embeddings.
  std::vector<ag::Var> spawn_bifurcation_queries(const ag::Var& parent_embedding) const;

  /// Continuous focal-grid index of a normalised patch position.
  Vec3 grid_coordinate(const Encoded& e, const Vec3& p) const;

 private:
  struct DecoderLayer {
    nn::Linear sa_q, sa_k, sa_v, sa_o, ca_q, ca_k, ca_v, ca_o, ff1, ff2;
    nn::LayerNorm ln1, ln2, ln3;
  };

  ModelConfig cfg_;
  nn::ParamStore params_;
  nn::Conv3d patchify_, down1_, conv1_, down2_, conv2_, lateral2_, upconv1_, lateral1_, head_;
  nn::Linear query_in_, past1_, past2_, cls_, off1_, off2_, rad_;
  ag::Var start_token_, spawn_dirs_;
  std::vector<DecoderLayer> layers_;

  HeadOutput heads(const ag::Var& h) const;
};

/// Sinusoidal encoding of a normalised 3-D position into `dim` values.
std::vector<double> positional_encoding(const Vec3& p, int dim);

}  // namespace trex::model
